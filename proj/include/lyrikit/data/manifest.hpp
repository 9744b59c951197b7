// Copyright 2026 lyrikit authors
// Manifest ingestion and genre broadclass mapping.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lyrikit/common.hpp"

namespace lyrikit::data {

enum class GenreClass { kPop = 0, kMetal = 1, kHiphop = 2 };
inline constexpr int kNumGenres = 3;

const char* genre_name(GenreClass g);
GenreClass genre_from_name(const std::string& name);  // "pop" | "metal" | "hiphop"

struct GenreMap {
  // Normalized tag (lowercase, single-spaced) to broadclass.
  std::map<std::string, GenreClass> table;
};

// Tags named by the mapping this build follows, plus common aliases.
GenreMap default_genre_map();

// TSV lines "<tag>\t<broadclass>"; '#' comments and blank lines are skipped.
GenreMap load_genre_map(const std::string& path);
void save_genre_map(const std::string& path, const GenreMap& map);

// Case-insensitive lookup of a free-text tag. Unknown tags raise unless a
// fallback class is supplied.
GenreClass map_genre(const GenreMap& map, const std::string& tag,
                     std::optional<GenreClass> fallback = std::nullopt);

struct Utterance {
  std::string id;
  std::string audio;      // resolved path to wav, or empty when cached features exist
  std::string text;
  GenreClass genre = GenreClass::kPop;
  std::string raw_genre;  // tag as written in the manifest
};

// JSON-lines records {"id","audio","text","genre"}. Audio paths resolve
// relative to the manifest location. Duplicate ids and malformed lines are
// errors; unknown genre tags are errors unless default_genre is given.
std::vector<Utterance> load_manifest(const std::string& path, const GenreMap& genre_map,
                                     std::optional<GenreClass> default_genre = std::nullopt);

void save_manifest(const std::string& path, const std::vector<Utterance>& utts);

}  // namespace lyrikit::data
