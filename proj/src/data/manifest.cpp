// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/data/manifest.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

namespace lyrikit::data {

namespace {

std::string normalize_tag(const std::string& tag) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : tag) {
    if (std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

const char* genre_name(GenreClass g) {
  switch (g) {
    case GenreClass::kPop: return "pop";
    case GenreClass::kMetal: return "metal";
    case GenreClass::kHiphop: return "hiphop";
  }
  return "pop";
}

GenreClass genre_from_name(const std::string& name) {
  if (name == "pop") return GenreClass::kPop;
  if (name == "metal") return GenreClass::kMetal;
  if (name == "hiphop") return GenreClass::kHiphop;
  fail("unknown genre broadclass: " + name + " (expected pop|metal|hiphop)");
}

GenreMap default_genre_map() {
  GenreMap m;
  for (const char* t : {"rap", "hip hop", "hiphop", "r&b", "rhythms & blues"})
    m.table[t] = GenreClass::kHiphop;
  for (const char* t : {"metal", "hard rock", "death metal"})
    m.table[t] = GenreClass::kMetal;
  for (const char* t : {"pop", "country", "jazz", "reggae", "rock", "folk", "blues",
                        "soul", "electronic"})
    m.table[t] = GenreClass::kPop;
  return m;
}

GenreMap load_genre_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read genre map: " + path);
  GenreMap m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      fail("genre map " + path + " line " + std::to_string(lineno) + ": expected <tag>\\t<class>");
    m.table[normalize_tag(line.substr(0, tab))] = genre_from_name(normalize_tag(line.substr(tab + 1)));
  }
  return m;
}

void save_genre_map(const std::string& path, const GenreMap& map) {
  std::ofstream out(path);
  if (!out) fail("cannot write genre map: " + path);
  out << "# genre tag -> broadclass (pop|metal|hiphop)\n";
  for (const auto& [tag, cls] : map.table) out << tag << "\t" << genre_name(cls) << "\n";
}

GenreClass map_genre(const GenreMap& map, const std::string& tag,
                     std::optional<GenreClass> fallback) {
  auto it = map.table.find(normalize_tag(tag));
  if (it != map.table.end()) return it->second;
  if (fallback) return *fallback;
  fail("genre tag not in mapping table: \"" + tag + "\"");
}

std::vector<Utterance> load_manifest(const std::string& path, const GenreMap& genre_map,
                                     std::optional<GenreClass> default_genre) {
  std::ifstream in(path);
  if (!in) fail("cannot read manifest: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<Utterance> utts;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      fail("manifest " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    Utterance u;
    try {
      u.id = j.at("id").get<std::string>();
      u.audio = j.at("audio").get<std::string>();
      u.text = j.at("text").get<std::string>();
      u.raw_genre = j.at("genre").get<std::string>();
    } catch (const std::exception& e) {
      fail("manifest " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(u.id).second)
      fail("manifest " + path + " line " + std::to_string(lineno) + ": duplicate id \"" +
           u.id + "\"");
    u.genre = map_genre(genre_map, u.raw_genre, default_genre);
    if (!u.audio.empty() && std::filesystem::path(u.audio).is_relative())
      u.audio = (base / u.audio).string();
    utts.push_back(std::move(u));
  }
  return utts;
}

void save_manifest(const std::string& path, const std::vector<Utterance>& utts) {
  std::ofstream out(path);
  if (!out) fail("cannot write manifest: " + path);
  for (const Utterance& u : utts) {
    nlohmann::json j;
    j["id"] = u.id;
    j["audio"] = u.audio;
    j["text"] = u.text;
    j["genre"] = u.raw_genre.empty() ? genre_name(u.genre) : u.raw_genre;
    out << j.dump() << "\n";
  }
}

}  // namespace lyrikit::data
