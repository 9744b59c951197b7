// Copyright 2026 lyrikit authors
// End-to-end checks of the command-line surface, driving the real binary.
//
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lyrikit/eval/wer.hpp"
#include "lyrikit/tokenizer/bpe.hpp"

namespace fs = std::filesystem;

namespace {

fs::path g_dir;

int run(const std::string& args, std::string* output = nullptr) {
  const fs::path log = g_dir / "cmd.log";
  const std::string cmd = std::string(LYRIKIT_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int ret = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    output->assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  }
  return WEXITSTATUS(ret);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

const char* kTinyConf = R"(
[model]
d_model = 16
heads = 2
ffn_dim = 32
n_enc = 1
n_dec = 1
adapter_dim = 8
dropout = 0.0

[train]
epochs = 3
warmup = 300
lr_scale = 1
max_bins = 1048576
seed = 7
keep_best = 2
)";

}  // namespace

TEST_CASE("cli pipeline end to end") {
  g_dir = fs::temp_directory_path() / "lyk_cli_test";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);
  const std::string D = g_dir.string();

  std::string out;

  SUBCASE("") {}  // anchor so setup/teardown run once

  // --- synth + prepare -------------------------------------------------
  REQUIRE(run("synth --outdir " + D + "/corpus --lines 8 --seed 5") == 0);
  REQUIRE(fs::exists(g_dir / "corpus" / "manifest.jsonl"));

  REQUIRE(run("prepare --manifest " + D + "/corpus/manifest.jsonl --outdir " + D +
                  "/prep --vocab-size 64",
              &out) == 0);
  CHECK(out.find("0 cache hits") != std::string::npos);

  // Idempotent rerun: everything comes from the cache.
  REQUIRE(run("prepare --manifest " + D + "/corpus/manifest.jsonl --outdir " + D +
                  "/prep --vocab-size 64",
              &out) == 0);
  CHECK(out.find("8 cache hits") != std::string::npos);

  // Vocab below the character inventory is a usage error (exit 2).
  CHECK(run("prepare --manifest " + D + "/corpus/manifest.jsonl --outdir " + D +
            "/prep2 --vocab-size 5") == 2);

  // Unmapped genre tags fail loudly, naming the tag.
  write_file(g_dir / "bad.jsonl",
             R"({"id":"x","audio":"nowhere.wav","text":"la","genre":"vaporwave"})" "\n");
  CHECK(run("prepare --manifest " + D + "/bad.jsonl --outdir " + D + "/prep3", &out) == 1);
  CHECK(out.find("vaporwave") != std::string::npos);

  // --- train ------------------------------------------------------------
  write_file(g_dir / "tiny.conf", std::string(kTinyConf) +
                                      "[data]\n"
                                      "train_manifest = " + D + "/corpus/manifest.jsonl\n"
                                      "dev_manifest = " + D + "/corpus/manifest.jsonl\n"
                                      "prepared_dir = " + D + "/prep\n");

  // Usage errors first.
  CHECK(run("train --config " + D + "/tiny.conf --phase adapter --placement none --outdir " +
            D + "/runs/x") == 2);
  CHECK(run("train --config " + D + "/tiny.conf --phase warp --outdir " + D + "/runs/x") == 2);

  REQUIRE(run("train --config " + D + "/tiny.conf --phase base --outdir " + D + "/runs/base",
              &out) == 0);
  REQUIRE(fs::exists(g_dir / "runs" / "base" / "averaged.ckpt"));
  REQUIRE(fs::exists(g_dir / "runs" / "base" / "metrics.jsonl"));

  // Adapter phase needs --init-from.
  CHECK(run("train --config " + D + "/tiny.conf --phase adapter --placement mha --outdir " +
            D + "/runs/a") == 2);
  REQUIRE(run("train --config " + D + "/tiny.conf --phase adapter --placement mha "
              "--init-from " + D + "/runs/base/averaged.ckpt --outdir " + D + "/runs/mha") == 0);

  // --- transcribe --------------------------------------------------------
  REQUIRE(run("transcribe --checkpoint " + D + "/runs/base/averaged.ckpt --prep " + D +
              "/prep --manifest " + D + "/corpus/manifest.jsonl --output " + D +
              "/hyp.jsonl") == 0);
  REQUIRE(fs::exists(g_dir / "hyp.jsonl"));

  // Deterministic rerun produces identical bytes.
  REQUIRE(run("transcribe --checkpoint " + D + "/runs/base/averaged.ckpt --prep " + D +
              "/prep --manifest " + D + "/corpus/manifest.jsonl --output " + D +
              "/hyp2.jsonl") == 0);
  CHECK(slurp(g_dir / "hyp.jsonl") == slurp(g_dir / "hyp2.jsonl"));

  // Degenerate decode settings are accepted.
  CHECK(run("transcribe --checkpoint " + D + "/runs/base/averaged.ckpt --prep " + D +
            "/prep --manifest " + D + "/corpus/manifest.jsonl --output " + D +
            "/hyp_greedy.jsonl --beam 1 --ctc-weight 0") == 0);

  // Adapter checkpoints require a genre for bare wav input.
  const std::string wav = (g_dir / "corpus" / "audio" / "syn000000.wav").string();
  CHECK(run("transcribe --checkpoint " + D + "/runs/mha/averaged.ckpt --prep " + D +
            "/prep --wav " + wav + " --output " + D + "/one.jsonl", &out) == 1);
  CHECK(out.find("genre") != std::string::npos);
  CHECK(run("transcribe --checkpoint " + D + "/runs/mha/averaged.ckpt --prep " + D +
            "/prep --wav " + wav + " --output " + D + "/one.jsonl --genre metal") == 0);

  // --- score --------------------------------------------------------------
  // Perfect hypotheses: copy the reference texts.
  {
    std::ifstream in(g_dir / "corpus" / "manifest.jsonl");
    std::ofstream outf(g_dir / "perfect.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      nlohmann::json h;
      h["id"] = j["id"];
      h["text"] = j["text"];
      h["score"] = 0.0;
      outf << h.dump() << "\n";
    }
  }
  REQUIRE(run("score --hyp " + D + "/perfect.jsonl --ref " + D + "/corpus/manifest.jsonl",
              &out) == 0);
  CHECK(out.find("overall") != std::string::npos);
  CHECK(out.find("0.00") != std::string::npos);
  {
    nlohmann::json j = nlohmann::json::parse(slurp(g_dir / "perfect.jsonl.score.json"));
    CHECK(j["overall"]["wer"].get<double>() == 0.0);
    // Per-genre rows appear only for genres present in the references.
    for (auto& [genre, stats] : j["by_genre"].items())
      CHECK(stats["lines"].get<int>() > 0);
  }

  // Report totals equal an independent recomputation from the files.
  REQUIRE(run("score --hyp " + D + "/hyp.jsonl --ref " + D + "/corpus/manifest.jsonl --json " +
              D + "/report.json") == 0);
  {
    std::map<std::string, std::string> hyp_texts;
    std::ifstream in(g_dir / "hyp.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      hyp_texts[j["id"]] = j["text"];
    }
    lyrikit::eval::WerTotals totals;
    std::ifstream refs(g_dir / "corpus" / "manifest.jsonl");
    while (std::getline(refs, line)) {
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line);
      totals.add(lyrikit::eval::wer(lyrikit::bpe::normalize(j["text"]),
                                    lyrikit::bpe::normalize(hyp_texts[j["id"]])));
    }
    nlohmann::json report = nlohmann::json::parse(slurp(g_dir / "report.json"));
    CHECK(report["overall"]["wer"].get<double>() == doctest::Approx(totals.corpus_wer()));
    CHECK(report["overall"]["substitutions"].get<int64_t>() == totals.substitutions);
    CHECK(report["overall"]["deletions"].get<int64_t>() == totals.deletions);
    CHECK(report["overall"]["insertions"].get<int64_t>() == totals.insertions);
  }

  // Missing hypothesis: warning by default, error under --strict.
  {
    std::ofstream partial(g_dir / "partial.jsonl");
    partial << R"({"id":"syn000000","text":"la la","score":0})" << "\n";
  }
  CHECK(run("score --hyp " + D + "/partial.jsonl --ref " + D + "/corpus/manifest.jsonl",
            &out) == 0);
  CHECK(out.find("warning") != std::string::npos);
  CHECK(run("score --hyp " + D + "/partial.jsonl --ref " + D +
            "/corpus/manifest.jsonl --strict") == 1);

  fs::remove_all(g_dir);
}

TEST_CASE("a 100-line corpus prepares well inside the minute budget") {
  g_dir = fs::temp_directory_path() / "lyk_cli_prep100";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);
  const std::string D = g_dir.string();
  REQUIRE(run("synth --outdir " + D + "/corpus --lines 100 --seed 1") == 0);
  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(run("prepare --manifest " + D + "/corpus/manifest.jsonl --outdir " + D +
              "/prep --vocab-size 128") == 0);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(elapsed < 60.0);
  fs::remove_all(g_dir);
}
