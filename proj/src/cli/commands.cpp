// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "lyrikit/data/synth.hpp"
#include "lyrikit/decode/decode.hpp"
#include "lyrikit/eval/wer.hpp"
#include "lyrikit/features/frontend.hpp"
#include "lyrikit/features/wav.hpp"
#include "lyrikit/model/checkpoint.hpp"
#include "lyrikit/train/trainer.hpp"

namespace lyrikit::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config file: flat key=value lines under [section] headers.
// ---------------------------------------------------------------------------

class ConfigFile {
 public:
  static ConfigFile parse(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot read config file: " + path);
    ConfigFile cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const size_t eq = line.find('=');
      if (eq == std::string::npos)
        usage_fail(path + " line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      cfg.values_[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  std::string str(const std::string& key, const std::string& dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    used_.insert(key);
    return it->second;
  }
  int64_t integer(const std::string& key, int64_t dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    used_.insert(key);
    try {
      return std::stoll(it->second);
    } catch (const std::exception&) {
      usage_fail("config key " + key + " is not an integer: " + it->second);
    }
  }
  double number(const std::string& key, double dflt) {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    used_.insert(key);
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      usage_fail("config key " + key + " is not a number: " + it->second);
    }
  }
  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (!used_.count(key)) usage_fail("unknown config key: " + key);
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Prepared-data layout and the shared feature pipeline.
// ---------------------------------------------------------------------------

struct PrepPaths {
  fs::path dir;
  fs::path bpe_model() const { return dir / "bpe.model"; }
  fs::path cmvn() const { return dir / "cmvn.json"; }
  fs::path feats_dir() const { return dir / "feats"; }
  fs::path feat_file(const std::string& id) const { return feats_dir() / (id + ".feats"); }
};

// Cache-aside per-utterance features (pre-CMVN).
numeric::Tensor utterance_features(const data::Utterance& u, const PrepPaths& prep,
                                   bool* cache_hit = nullptr) {
  const fs::path cached = prep.feat_file(u.id);
  if (fs::exists(cached)) {
    if (cache_hit) *cache_hit = true;
    return features::read_feature_cache(cached.string());
  }
  if (cache_hit) *cache_hit = false;
  if (u.audio.empty()) fail("utterance " + u.id + " has neither cached features nor audio");
  features::FeatureMatrix fm = features::compute_features(features::read_wav(u.audio));
  if (fm.too_short)
    std::cerr << "warning: utterance " << u.id << " is shorter than one analysis window\n";
  fs::create_directories(prep.feats_dir());
  features::write_feature_cache(cached.string(), fm.frames);
  return fm.frames;
}

// CMVN granularity: "corpus" uses the prepared statistics, "utterance"
// normalizes each utterance with its own.
numeric::Tensor normalize_feats(const numeric::Tensor& raw, const features::CmvnStats& cmvn,
                                bool utterance_cmvn) {
  if (!utterance_cmvn) return features::apply_cmvn(raw, cmvn);
  features::CmvnAccumulator acc;
  acc.add(raw);
  return features::apply_cmvn(raw, acc.finalize());
}

bool parse_cmvn_mode(const std::string& mode) {
  if (mode == "corpus") return false;
  if (mode == "utterance") return true;
  usage_fail("cmvn mode must be corpus or utterance, got: " + mode);
}

std::vector<data::EncodedUtterance> load_encoded(const std::vector<data::Utterance>& utts,
                                                 const PrepPaths& prep,
                                                 const bpe::BpeModel& tokenizer,
                                                 const features::CmvnStats& cmvn,
                                                 bool utterance_cmvn = false) {
  std::vector<data::EncodedUtterance> out;
  for (const data::Utterance& u : utts) {
    data::EncodedUtterance e;
    e.id = u.id;
    numeric::Tensor raw = utterance_features(u, prep);
    if (raw.empty()) fail("utterance " + u.id + " produced no frames; cannot use it");
    e.feats = normalize_feats(raw, cmvn, utterance_cmvn);
    e.tokens = bpe::encode(tokenizer, u.text);
    if (e.tokens.empty()) fail("utterance " + u.id + " has an empty transcript after encoding");
    e.genre = u.genre;
    out.push_back(std::move(e));
  }
  return out;
}

data::GenreMap resolve_genre_map(const std::string& path) {
  return path.empty() ? data::default_genre_map() : data::load_genre_map(path);
}

std::optional<data::GenreClass> resolve_default_genre(const std::string& name) {
  if (name.empty()) return std::nullopt;
  return data::genre_from_name(name);
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail("cannot write " + tmp.string());
    out << content;
    if (!out) fail("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string outdir;
  int lines = 100;
  uint64_t seed = 0;
  int pct_metal = 35, pct_pop = 59, pct_hiphop = 6;
  std::string manifest_name = "manifest.jsonl";
};

int cmd_synth(const SynthArgs& a) {
  data::SynthConfig cfg;
  cfg.seed = a.seed;
  cfg.n_lines = a.lines;
  cfg.pct_metal = a.pct_metal;
  cfg.pct_pop = a.pct_pop;
  cfg.pct_hiphop = a.pct_hiphop;
  cfg.outdir = a.outdir;
  cfg.manifest_name = a.manifest_name;
  const std::string manifest = data::synth_corpus(cfg);
  std::cout << "wrote " << a.lines << " lines to " << manifest << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string manifest;
  std::string outdir;
  int vocab_size = 5000;
  std::string genre_map;
  std::string default_genre;
  std::vector<std::string> also;  // extra manifests to cache features for
};

int cmd_prepare(const PrepareArgs& a) {
  const data::GenreMap gmap = resolve_genre_map(a.genre_map);
  const auto fallback = resolve_default_genre(a.default_genre);
  const auto utts = data::load_manifest(a.manifest, gmap, fallback);
  if (utts.empty()) fail("manifest is empty: " + a.manifest);

  PrepPaths prep{fs::path(a.outdir)};
  fs::create_directories(prep.feats_dir());

  int hits = 0;
  features::CmvnAccumulator acc;
  std::vector<std::string> texts;
  for (const data::Utterance& u : utts) {
    bool hit = false;
    numeric::Tensor feats = utterance_features(u, prep, &hit);
    hits += hit ? 1 : 0;
    acc.add(feats);
    texts.push_back(u.text);
  }
  features::save_cmvn(prep.cmvn().string(), acc.finalize());

  bpe::BpeModel tokenizer = bpe::train_bpe(texts, a.vocab_size);
  bpe::save_bpe(prep.bpe_model().string(), tokenizer);

  for (const std::string& extra : a.also)
    for (const data::Utterance& u : data::load_manifest(extra, gmap, fallback))
      utterance_features(u, prep);

  std::cout << "prepared " << utts.size() << " utterances (" << hits << " cache hits), vocab "
            << tokenizer.vocab_size << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string phase;  // base | adapter
  std::string placement = "none";
  std::string init_from;
  std::string outdir;
  int64_t seed = -1;  // overrides the config seed when >= 0
  std::string train_manifest, dev_manifest, prep_dir;  // override [data]
};

int cmd_train(const TrainArgs& a) {
  if (a.phase != "base" && a.phase != "adapter")
    usage_fail("--phase must be base or adapter");
  const model::AdapterPlacement placement = model::placement_from_name(a.placement);
  if (a.phase == "adapter" && placement == model::AdapterPlacement::kNone)
    usage_fail("--phase adapter needs --placement mha|mha-maskmha|shared");
  if (a.phase == "base" && placement != model::AdapterPlacement::kNone)
    usage_fail("--phase base trains the bare model; drop --placement");
  if (a.phase == "adapter" && a.init_from.empty())
    usage_fail("--phase adapter needs --init-from <base checkpoint>");

  ConfigFile cfg = ConfigFile::parse(a.config);

  model::ModelConfig mc;
  mc.d_model = static_cast<int>(cfg.integer("model.d_model", 512));
  mc.heads = static_cast<int>(cfg.integer("model.heads", 8));
  mc.ffn_dim = static_cast<int>(cfg.integer("model.ffn_dim", 2048));
  mc.n_enc = static_cast<int>(cfg.integer("model.n_enc", 12));
  mc.n_dec = static_cast<int>(cfg.integer("model.n_dec", 6));
  mc.adapter_dim = static_cast<int>(cfg.integer("model.adapter_dim", 256));
  mc.norm_style = model::norm_style_from_name(cfg.str("model.norm_style", "post"));
  mc.dropout = cfg.number("model.dropout", 0.1);
  mc.feat_dim = static_cast<int>(cfg.integer("model.feat_dim", 83));
  mc.placement = placement;

  train::TrainRunConfig tc;
  tc.epochs = static_cast<int>(cfg.integer("train.epochs", 100));
  tc.warmup = cfg.integer("train.warmup", 25000);
  tc.lr_scale = cfg.number("train.lr_scale", 5.0);
  tc.max_bins = cfg.integer("train.max_bins", 5000000);
  tc.seed = static_cast<uint64_t>(cfg.integer("train.seed", 0));
  tc.grad_clip = cfg.number("train.grad_clip", 5.0);
  tc.keep_best = static_cast<int>(cfg.integer("train.keep_best", 5));
  tc.loss.alpha = cfg.number("train.alpha", 0.3);
  tc.loss.label_smoothing = cfg.number("train.label_smoothing", 0.0);
  tc.adam.beta1 = cfg.number("train.beta1", 0.9);
  tc.adam.beta2 = cfg.number("train.beta2", 0.98);
  tc.adam.eps = cfg.number("train.adam_eps", 1e-9);
  if (a.seed >= 0) tc.seed = static_cast<uint64_t>(a.seed);

  const std::string train_manifest =
      a.train_manifest.empty() ? cfg.str("data.train_manifest", "") : a.train_manifest;
  const std::string dev_manifest =
      a.dev_manifest.empty() ? cfg.str("data.dev_manifest", "") : a.dev_manifest;
  const std::string prep_dir = a.prep_dir.empty() ? cfg.str("data.prepared_dir", "") : a.prep_dir;
  const std::string genre_map_path = cfg.str("data.genre_map", "");
  const std::string default_genre = cfg.str("data.default_genre", "");
  const bool utterance_cmvn = parse_cmvn_mode(cfg.str("data.cmvn", "corpus"));
  cfg.reject_unknown();
  if (train_manifest.empty() || dev_manifest.empty() || prep_dir.empty())
    usage_fail("train needs data.train_manifest, data.dev_manifest and data.prepared_dir "
               "(config [data] section or flags)");

  PrepPaths prep{fs::path(prep_dir)};
  bpe::BpeModel tokenizer = bpe::load_bpe(prep.bpe_model().string());
  features::CmvnStats cmvn = features::load_cmvn(prep.cmvn().string());
  const data::GenreMap gmap = resolve_genre_map(genre_map_path);
  const auto fallback = resolve_default_genre(default_genre);

  mc.vocab_size = tokenizer.vocab_size;
  auto train_utts = load_encoded(data::load_manifest(train_manifest, gmap, fallback), prep,
                                 tokenizer, cmvn, utterance_cmvn);
  auto dev_utts = load_encoded(data::load_manifest(dev_manifest, gmap, fallback), prep,
                               tokenizer, cmvn, utterance_cmvn);

  model::Model m(mc, tc.seed);
  if (a.phase == "adapter") {
    model::Checkpoint base = model::load_checkpoint(a.init_from);
    model::ModelConfig expect = mc;
    expect.placement = base.config.placement;
    if (base.config.to_json() != expect.to_json())
      fail("base checkpoint configuration does not match the training config");
    train::load_base_state(m, base.params);
    train::freeze_for_adapter_tuning(m);
  }

  train::Trainer trainer(m, tc, tokenizer);
  auto history = trainer.run(train_utts, dev_utts, a.outdir);
  std::cout << "trained " << history.size() << " epochs; final dev loss "
            << history.back().dev_loss << ", dev wer " << history.back().dev_wer << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// transcribe
// ---------------------------------------------------------------------------

struct TranscribeArgs {
  std::string checkpoint;
  std::string prep_dir;
  std::string manifest;
  std::string wav;
  std::string output;
  std::string genre;           // force one genre for every utterance
  std::string genre_fallback;  // used when the manifest tag is unmapped
  std::string genre_map;
  int beam = 10;
  double penalty = 0.0;
  double ctc_weight = 0.3;
  double max_len_ratio = 1.0;
  std::string cmvn_mode = "corpus";
};

int cmd_transcribe(const TranscribeArgs& a) {
  if (a.manifest.empty() == a.wav.empty())
    usage_fail("transcribe needs exactly one of --manifest or --wav");
  if (a.output.empty()) usage_fail("transcribe needs --output");

  model::Checkpoint ckpt = model::load_checkpoint(a.checkpoint);
  model::Model m(ckpt.config, 0);
  m.load_state(ckpt.params);
  const bool needs_genre = ckpt.config.placement != model::AdapterPlacement::kNone;

  PrepPaths prep{fs::path(a.prep_dir)};
  bpe::BpeModel tokenizer = bpe::load_bpe(prep.bpe_model().string());
  features::CmvnStats cmvn = features::load_cmvn(prep.cmvn().string());
  if (tokenizer.vocab_size != ckpt.config.vocab_size)
    fail("tokenizer vocab " + std::to_string(tokenizer.vocab_size) +
         " does not match checkpoint vocab " + std::to_string(ckpt.config.vocab_size));

  const bool utterance_cmvn = parse_cmvn_mode(a.cmvn_mode);
  decode::DecodeConfig dc;
  dc.beam = a.beam;
  dc.penalty = a.penalty;
  dc.ctc_weight = a.ctc_weight;
  dc.max_len_ratio = a.max_len_ratio;
  dc.validate();

  std::optional<data::GenreClass> forced;
  if (!a.genre.empty()) forced = data::genre_from_name(a.genre);
  std::optional<data::GenreClass> fallback = resolve_default_genre(a.genre_fallback);

  std::vector<data::Utterance> utts;
  if (!a.manifest.empty()) {
    // Unmapped tags fall back only when a fallback genre was given.
    const data::GenreMap gmap = resolve_genre_map(a.genre_map);
    if (forced) {
      utts = data::load_manifest(a.manifest, gmap, *forced);
      for (auto& u : utts) u.genre = *forced;
    } else if (!needs_genre) {
      utts = data::load_manifest(a.manifest, gmap, data::GenreClass::kPop);
    } else {
      utts = data::load_manifest(a.manifest, gmap, fallback);
    }
  } else {
    data::Utterance u;
    u.id = fs::path(a.wav).stem().string();
    u.audio = a.wav;
    if (forced)
      u.genre = *forced;
    else if (fallback)
      u.genre = *fallback;
    else if (needs_genre)
      fail("this checkpoint has genre adapters; pass --genre or --genre-fallback");
    utts.push_back(std::move(u));
  }

  std::string out;
  for (const data::Utterance& u : utts) {
    numeric::Tensor raw = utterance_features(u, prep);
    if (raw.empty()) fail("utterance " + u.id + " produced no frames");
    numeric::Tensor feats = normalize_feats(raw, cmvn, utterance_cmvn);
    decode::BeamSearchResult res = decode::beam_search(m, feats, u.genre, dc);
    nlohmann::json j;
    j["id"] = u.id;
    j["text"] = bpe::decode_tokens(tokenizer, res.best.tokens);
    j["score"] = res.best.joint;
    out += j.dump();
    out += "\n";
  }
  atomic_write(a.output, out);
  std::cout << "transcribed " << utts.size() << " utterances to " << a.output << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string hyp;
  std::string ref;
  std::string json_out;
  std::string genre_map;
  std::string default_genre;
  bool strict = false;
};

int cmd_score(const ScoreArgs& a) {
  const data::GenreMap gmap = resolve_genre_map(a.genre_map);
  const auto fallback = resolve_default_genre(a.default_genre);
  const auto refs = data::load_manifest(a.ref, gmap, fallback);
  if (refs.empty()) fail("reference manifest is empty: " + a.ref);

  std::map<std::string, std::string> hyps;
  {
    std::ifstream in(a.hyp);
    if (!in) fail("cannot read hypothesis file: " + a.hyp);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        hyps[j.at("id").get<std::string>()] = j.at("text").get<std::string>();
      } catch (const std::exception& e) {
        fail(a.hyp + " line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  eval::WerTotals overall;
  std::map<data::GenreClass, eval::WerTotals> by_genre;
  for (const data::Utterance& u : refs) {
    auto it = hyps.find(u.id);
    std::string hyp_text;
    if (it == hyps.end()) {
      if (a.strict) fail("no hypothesis for reference id \"" + u.id + "\" (--strict)");
      std::cerr << "warning: no hypothesis for id " << u.id << "; scoring as all deletions\n";
    } else {
      hyp_text = it->second;
    }
    const std::string ref_norm = bpe::normalize(u.text);
    if (ref_norm.empty()) fail("reference transcript for id \"" + u.id + "\" is empty");
    eval::WerResult r = eval::wer(ref_norm, bpe::normalize(hyp_text));
    overall.add(r);
    by_genre[u.genre].add(r);
  }

  auto pct = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * x);
    return std::string(buf);
  };
  std::printf("%-8s %8s %8s %6s %6s %6s %10s\n", "genre", "lines", "words", "sub", "del",
              "ins", "wer%");
  nlohmann::json per_genre_json = nlohmann::json::object();
  for (const auto& [genre, totals] : by_genre) {
    std::printf("%-8s %8lld %8lld %6lld %6lld %6lld %10s\n", data::genre_name(genre),
                static_cast<long long>(totals.lines), static_cast<long long>(totals.ref_words),
                static_cast<long long>(totals.substitutions),
                static_cast<long long>(totals.deletions),
                static_cast<long long>(totals.insertions), pct(totals.corpus_wer()).c_str());
    nlohmann::json g;
    g["lines"] = totals.lines;
    g["ref_words"] = totals.ref_words;
    g["substitutions"] = totals.substitutions;
    g["deletions"] = totals.deletions;
    g["insertions"] = totals.insertions;
    g["wer"] = totals.corpus_wer();
    g["mean_line_wer"] = totals.mean_line_wer();
    per_genre_json[data::genre_name(genre)] = g;
  }
  std::printf("%-8s %8lld %8lld %6lld %6lld %6lld %10s\n", "overall",
              static_cast<long long>(overall.lines), static_cast<long long>(overall.ref_words),
              static_cast<long long>(overall.substitutions),
              static_cast<long long>(overall.deletions),
              static_cast<long long>(overall.insertions), pct(overall.corpus_wer()).c_str());

  nlohmann::json j;
  j["overall"] = {{"lines", overall.lines},
                  {"ref_words", overall.ref_words},
                  {"substitutions", overall.substitutions},
                  {"deletions", overall.deletions},
                  {"insertions", overall.insertions},
                  {"wer", overall.corpus_wer()},
                  {"mean_line_wer", overall.mean_line_wer()}};
  j["by_genre"] = per_genre_json;
  const std::string json_path = a.json_out.empty() ? a.hyp + ".score.json" : a.json_out;
  atomic_write(json_path, j.dump(2) + "\n");
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"genre-conditioned lyrics transcription toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "generate a synthetic tone corpus");
  s->add_option("--outdir", synth.outdir)->required();
  s->add_option("--lines", synth.lines);
  s->add_option("--seed", synth.seed);
  s->add_option("--metal", synth.pct_metal);
  s->add_option("--pop", synth.pct_pop);
  s->add_option("--hiphop", synth.pct_hiphop);
  s->add_option("--manifest-name", synth.manifest_name);

  PrepareArgs prepare;
  CLI::App* p = app.add_subcommand("prepare", "extract features, fit CMVN, train BPE");
  p->add_option("--manifest", prepare.manifest)->required();
  p->add_option("--outdir", prepare.outdir)->required();
  p->add_option("--vocab-size", prepare.vocab_size);
  p->add_option("--genre-map", prepare.genre_map);
  p->add_option("--default-genre", prepare.default_genre);
  p->add_option("--also", prepare.also);

  TrainArgs train_args;
  CLI::App* t = app.add_subcommand("train", "run base or adapter training");
  t->add_option("--config", train_args.config)->required();
  t->add_option("--phase", train_args.phase)->required();
  t->add_option("--placement", train_args.placement);
  t->add_option("--init-from", train_args.init_from);
  t->add_option("--outdir", train_args.outdir)->required();
  t->add_option("--seed", train_args.seed);
  t->add_option("--train-manifest", train_args.train_manifest);
  t->add_option("--dev-manifest", train_args.dev_manifest);
  t->add_option("--prep", train_args.prep_dir);

  TranscribeArgs tr;
  CLI::App* x = app.add_subcommand("transcribe", "beam-decode audio into lyrics");
  x->add_option("--checkpoint", tr.checkpoint)->required();
  x->add_option("--prep", tr.prep_dir)->required();
  x->add_option("--manifest", tr.manifest);
  x->add_option("--wav", tr.wav);
  x->add_option("--output", tr.output)->required();
  x->add_option("--genre", tr.genre);
  x->add_option("--genre-fallback", tr.genre_fallback);
  x->add_option("--genre-map", tr.genre_map);
  x->add_option("--beam", tr.beam);
  x->add_option("--penalty", tr.penalty);
  x->add_option("--ctc-weight", tr.ctc_weight);
  x->add_option("--max-len-ratio", tr.max_len_ratio);
  x->add_option("--cmvn", tr.cmvn_mode, "corpus|utterance");

  ScoreArgs score;
  CLI::App* sc = app.add_subcommand("score", "WER report against a reference manifest");
  sc->add_option("--hyp", score.hyp)->required();
  sc->add_option("--ref", score.ref)->required();
  sc->add_option("--json", score.json_out);
  sc->add_option("--genre-map", score.genre_map);
  sc->add_option("--default-genre", score.default_genre);
  sc->add_flag("--strict", score.strict);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return cmd_synth(synth);
    if (p->parsed()) return cmd_prepare(prepare);
    if (t->parsed()) return cmd_train(train_args);
    if (x->parsed()) return cmd_transcribe(tr);
    if (sc->parsed()) return cmd_score(score);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lyrikit::cli
