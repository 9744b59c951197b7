// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/tokenizer/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace lyrikit::bpe {

namespace {

std::vector<std::string> split_words(const std::string& normalized) {
  std::vector<std::string> words;
  std::istringstream in(normalized);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms;
  for (size_t i = 0; i < word.size(); ++i) {
    std::string s(1, word[i]);
    if (i == 0) s = kBoundary + s;
    syms.push_back(std::move(s));
  }
  return syms;
}

// Replace every adjacent (left,right) with the fused symbol, left to right.
void apply_merge(std::vector<std::string>& syms, const std::string& left,
                 const std::string& right) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
      out.push_back(left + right);
      i += 2;
    } else {
      out.push_back(syms[i]);
      ++i;
    }
  }
  syms = std::move(out);
}

}  // namespace

std::string normalize(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    char lc = static_cast<char>(std::tolower(c));
    if ((lc >= 'a' && lc <= 'z') || lc == '\'') {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(lc);
    } else {
      pending_space = true;
    }
  }
  return out;
}

BpeModel train_bpe(const std::vector<std::string>& corpus, int vocab_size) {
  if (corpus.empty()) usage_fail("bpe training corpus is empty");

  // Unique words with counts, in first-appearance order for determinism.
  std::vector<std::pair<std::vector<std::string>, int64_t>> words;
  std::map<std::string, size_t> word_index;
  for (const std::string& line : corpus)
    for (const std::string& w : split_words(normalize(line))) {
      auto it = word_index.find(w);
      if (it == word_index.end()) {
        word_index[w] = words.size();
        words.emplace_back(word_symbols(w), 1);
      } else {
        ++words[it->second].second;
      }
    }
  if (words.empty()) usage_fail("bpe corpus contains no usable text after normalization");

  std::set<std::string> inventory;
  for (const auto& [syms, cnt] : words)
    for (const std::string& s : syms) inventory.insert(s);

  const int min_vocab = static_cast<int>(inventory.size()) + 3;
  if (vocab_size < min_vocab)
    usage_fail("vocab size " + std::to_string(vocab_size) + " is below character inventory " +
               std::to_string(inventory.size()) + " + 3 specials");

  BpeModel model;
  const int merge_budget = vocab_size - min_vocab;
  for (int step = 0; step < merge_budget; ++step) {
    std::map<std::pair<std::string, std::string>, int64_t> pair_counts;
    for (const auto& [syms, cnt] : words)
      for (size_t i = 0; i + 1 < syms.size(); ++i)
        pair_counts[{syms[i], syms[i + 1]}] += cnt;
    // Highest count wins; the map's lexicographic order breaks ties.
    std::pair<std::string, std::string> best;
    int64_t best_count = 0;
    for (const auto& [pair, cnt] : pair_counts)
      if (cnt > best_count) {
        best = pair;
        best_count = cnt;
      }
    if (best_count < 2) break;
    for (auto& [syms, cnt] : words) apply_merge(syms, best.first, best.second);
    model.merges.push_back(best);
  }

  // Dense ids: blank, unk, single characters (sorted), merged tokens in
  // merge order, shared sos/eos last.
  model.id_to_token.push_back(kBlankToken);
  model.id_to_token.push_back(kUnkToken);
  for (const std::string& s : inventory) model.id_to_token.push_back(s);
  for (const auto& [l, r] : model.merges) model.id_to_token.push_back(l + r);
  model.id_to_token.push_back(kSosEosToken);
  model.vocab_size = static_cast<int>(model.id_to_token.size());
  for (int i = 0; i < model.vocab_size; ++i) model.token_to_id[model.id_to_token[static_cast<size_t>(i)]] = i;
  return model;
}

std::vector<int> encode(const BpeModel& model, const std::string& text) {
  std::vector<int> ids;
  for (const std::string& word : split_words(normalize(text))) {
    std::vector<std::string> syms = word_symbols(word);
    for (const auto& [l, r] : model.merges) apply_merge(syms, l, r);
    for (const std::string& s : syms) {
      auto it = model.token_to_id.find(s);
      ids.push_back(it == model.token_to_id.end() ? kUnkId : it->second);
    }
  }
  return ids;
}

std::string decode_tokens(const BpeModel& model, const std::vector<int>& ids) {
  std::string joined;
  for (int id : ids) {
    if (id < 0 || id >= model.vocab_size)
      fail("token id " + std::to_string(id) + " out of range [0," +
           std::to_string(model.vocab_size) + ")");
    joined += model.id_to_token[static_cast<size_t>(id)];
  }
  // Boundary markers become spaces.
  std::string out;
  size_t i = 0;
  while (i < joined.size()) {
    if (joined.compare(i, kBoundary.size(), kBoundary) == 0) {
      if (!out.empty()) out.push_back(' ');
      i += kBoundary.size();
    } else {
      out.push_back(joined[i]);
      ++i;
    }
  }
  return out;
}

void save_bpe(const std::string& path, const BpeModel& model) {
  std::ofstream out(path);
  if (!out) fail("cannot write bpe model: " + path);
  out << "bpe-v1 " << model.vocab_size << "\n";
  for (int i = 0; i < model.vocab_size; ++i)
    out << i << "\t" << model.id_to_token[static_cast<size_t>(i)] << "\n";
  out << "#merges\n";
  for (const auto& [l, r] : model.merges) out << l << "\t" << r << "\n";
  if (!out) fail("failed writing bpe model: " + path);
}

BpeModel load_bpe(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot read bpe model: " + path);
  std::string header, line;
  int vocab_size = 0;
  if (!(in >> header >> vocab_size) || header != "bpe-v1")
    fail("bad bpe model header in " + path);
  std::getline(in, line);
  BpeModel model;
  model.vocab_size = vocab_size;
  model.id_to_token.resize(static_cast<size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) fail("truncated bpe vocab in " + path);
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) fail("malformed bpe vocab line in " + path + ": " + line);
    const int id = std::stoi(line.substr(0, tab));
    if (id != i) fail("non-dense bpe ids in " + path);
    model.id_to_token[static_cast<size_t>(i)] = line.substr(tab + 1);
    model.token_to_id[model.id_to_token[static_cast<size_t>(i)]] = i;
  }
  if (!std::getline(in, line) || line != "#merges") fail("missing #merges section in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) fail("malformed merge line in " + path + ": " + line);
    model.merges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return model;
}

}  // namespace lyrikit::bpe
