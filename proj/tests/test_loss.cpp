// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lyrikit/loss/loss.hpp"
#include "testutil.hpp"

using namespace lyrikit;
using namespace lyrikit::loss;
using numeric::Tape;
using numeric::Tensor;
using numeric::Var;
using testutil::randn;

namespace {

// Enumeration oracle: P(target) as the sum over every frame labelling whose
// collapse (dedupe repeats, drop blanks) equals the target.
std::vector<int> collapse(const std::vector<int>& path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int p : path) {
    if (p != prev && p != blank) out.push_back(p);
    prev = p;
  }
  return out;
}

double ctc_enum_logprob(const Tensor& logits, const std::vector<int>& target, int blank) {
  const int64_t t_len = logits.dim(0), v = logits.dim(1);
  // Per-frame softmax.
  std::vector<std::vector<double>> probs(static_cast<size_t>(t_len),
                                         std::vector<double>(static_cast<size_t>(v)));
  for (int64_t t = 0; t < t_len; ++t) {
    double mx = logits.at(t, 0);
    for (int64_t k = 1; k < v; ++k) mx = std::max(mx, static_cast<double>(logits.at(t, k)));
    double denom = 0;
    for (int64_t k = 0; k < v; ++k) denom += std::exp(logits.at(t, k) - mx);
    for (int64_t k = 0; k < v; ++k)
      probs[static_cast<size_t>(t)][static_cast<size_t>(k)] = std::exp(logits.at(t, k) - mx) / denom;
  }
  double total = 0;
  std::vector<int> path(static_cast<size_t>(t_len), 0);
  while (true) {
    double p = 1;
    for (int64_t t = 0; t < t_len; ++t)
      p *= probs[static_cast<size_t>(t)][static_cast<size_t>(path[static_cast<size_t>(t)])];
    if (collapse(path, blank) == target) total += p;
    // Odometer increment over V^T paths.
    int64_t pos = 0;
    while (pos < t_len && ++path[static_cast<size_t>(pos)] == v) {
      path[static_cast<size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == t_len) break;
  }
  return std::log(total);
}

}  // namespace

TEST_CASE("single-frame ctc reduces to one softmax term") {
  Rng rng(1);
  Tensor logits = Tensor::randn({1, 4}, rng);
  Tape tape;
  Var loss = ctc_loss(tape, tape.leaf(logits), {2});
  // -log softmax(logits)[0, 2]
  double mx = logits[0];
  for (int64_t k = 1; k < 4; ++k) mx = std::max(mx, static_cast<double>(logits[k]));
  double denom = 0;
  for (int64_t k = 0; k < 4; ++k) denom += std::exp(logits[k] - mx);
  const double expected = -(logits[2] - mx - std::log(denom));
  CHECK(loss->value[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("uniform logits, two frames, one label: three alignments") {
  Tape tape;
  Var logits = tape.leaf(Tensor::zeros({2, 3}));
  Var loss = ctc_loss(tape, logits, {2});
  // Alignments (2,2),(0,2),(2,0) each 1/9 -> P = 1/3.
  CHECK(loss->value[0] == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("forward-backward equals exhaustive enumeration") {
  Rng rng(77);
  int cases = 0;
  for (int t_len = 1; t_len <= 6; ++t_len)
    for (int v = 2; v <= 4; ++v)
      for (int l = 0; l <= 3; ++l) {
        // Random target without blanks; skip impossible lengths.
        std::vector<int> target;
        for (int i = 0; i < l; ++i)
          target.push_back(static_cast<int>(rng.uniform_int(1, v - 1)));
        int required = l;
        for (int i = 1; i < l; ++i)
          if (target[static_cast<size_t>(i)] == target[static_cast<size_t>(i - 1)]) ++required;
        if (t_len < required) continue;
        Tensor logits = Tensor::randn({t_len, v}, rng);
        CtcResult r = ctc_forward_backward(logits, target);
        const double oracle = -ctc_enum_logprob(logits, target, 0);
        CHECK(std::abs(r.loss - oracle) < 1e-9);
        ++cases;
      }
  CHECK(cases > 30);
}

TEST_CASE("ctc gradient matches finite differences") {
  for (uint64_t seed : {11u, 12u, 13u}) {
    std::vector<int> target = {2, 1};
    CHECK(testutil::gradcheck(
              [&target](Tape& t, const std::vector<Var>& in) {
                return ctc_loss(t, in[0], target);
              },
              {randn({5, 4}, seed)}) < 1e-4);
  }
}

TEST_CASE("ctc is covariant under consistent class relabeling") {
  Rng rng(5);
  Tensor logits = Tensor::randn({5, 4}, rng);
  std::vector<int> target = {2, 3, 1};
  // Permute non-blank classes 1,2,3 -> 3,1,2.
  const int perm[4] = {0, 3, 1, 2};
  Tensor permuted({5, 4});
  for (int64_t t = 0; t < 5; ++t)
    for (int64_t k = 0; k < 4; ++k) permuted.at(t, perm[k]) = logits.at(t, k);
  std::vector<int> relabeled;
  for (int tok : target) relabeled.push_back(perm[tok]);

  CtcResult a = ctc_forward_backward(logits, target);
  CtcResult b = ctc_forward_backward(permuted, relabeled);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
}

TEST_CASE("ctc length violation and target validation") {
  Tape tape;
  Var logits = tape.leaf(Tensor::zeros({2, 4}));
  CHECK_THROWS_WITH_AS(ctc_loss(tape, logits, {1, 2, 3}), doctest::Contains("length violation"),
                       std::runtime_error);
  // Repeats need a separating blank frame.
  CHECK_THROWS_WITH_AS(ctc_loss(tape, logits, {2, 2}), doctest::Contains("length violation"),
                       std::runtime_error);
  CHECK_THROWS(ctc_loss(tape, logits, {0}));   // blank in target
  CHECK_THROWS(ctc_loss(tape, logits, {9}));   // out of range
}

TEST_CASE("batched ctc equals the mean of singles") {
  Rng rng(3);
  Tensor batch({3, 6, 4});
  for (int64_t i = 0; i < batch.numel(); ++i) batch[i] = static_cast<real>(rng.normal());
  std::vector<int> lens = {6, 4, 5};
  std::vector<std::vector<int>> targets = {{1, 2}, {3}, {2, 2}};

  Tape tape;
  std::vector<double> per_item;
  Var loss = ctc_loss_batch(tape, tape.leaf(batch), lens, targets, &per_item);
  double mean = 0;
  for (int64_t i = 0; i < 3; ++i) {
    Tensor single({lens[static_cast<size_t>(i)], 4});
    for (int64_t t = 0; t < single.dim(0); ++t)
      for (int64_t k = 0; k < 4; ++k) single.at(t, k) = batch.at(i, t, k);
    CtcResult r = ctc_forward_backward(single, targets[static_cast<size_t>(i)]);
    CHECK(r.loss == doctest::Approx(per_item[static_cast<size_t>(i)]).epsilon(1e-12));
    mean += r.loss;
  }
  CHECK(loss->value[0] == doctest::Approx(mean / 3).epsilon(1e-9));
}

TEST_CASE("cross entropy closed forms") {
  // Uniform logits over V=5: loss is ln 5 at every position.
  Tape tape;
  Var logits = tape.leaf(Tensor::zeros({1, 3, 5}));
  Var loss = s2s_loss_batch(tape, logits, {{1, 2, 3}});
  CHECK(loss->value[0] == doctest::Approx(std::log(5.0)).epsilon(1e-12));

  // Near-one-hot logits drive the loss towards zero.
  Tensor sharp({1, 2, 5});
  for (int64_t p = 0; p < 2; ++p)
    for (int64_t k = 0; k < 5; ++k) sharp.at(0, p, k) = k == p + 1 ? real(50) : real(0);
  Var sharp_loss = s2s_loss_batch(tape, tape.leaf(sharp), {{1, 2}});
  CHECK(sharp_loss->value[0] < 1e-12);
}

TEST_CASE("ignored positions contribute nothing") {
  Rng rng(9);
  Tensor logits({1, 4, 5});
  for (int64_t i = 0; i < logits.numel(); ++i) logits[i] = static_cast<real>(rng.normal());

  Tape tape;
  Var padded = s2s_loss_batch(tape, tape.leaf(logits), {{1, 2, data::kIgnoreId, data::kIgnoreId}});
  Tensor trimmed({1, 2, 5});
  for (int64_t p = 0; p < 2; ++p)
    for (int64_t k = 0; k < 5; ++k) trimmed.at(0, p, k) = logits.at(0, p, k);
  Var bare = s2s_loss_batch(tape, tape.leaf(trimmed), {{1, 2}});
  CHECK(padded->value[0] == doctest::Approx(bare->value[0]).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(
      s2s_loss_batch(tape, tape.leaf(logits),
                     {{data::kIgnoreId, data::kIgnoreId, data::kIgnoreId, data::kIgnoreId}}),
      doctest::Contains("all-ignored"), std::runtime_error);
}

TEST_CASE("cross entropy gradient matches finite differences") {
  std::vector<std::vector<int>> targets = {{1, 3, data::kIgnoreId}};
  for (double smoothing : {0.0, 0.1}) {
    CAPTURE(smoothing);
    CHECK(testutil::gradcheck(
              [&targets, smoothing](Tape& t, const std::vector<Var>& in) {
                return s2s_loss_batch(t, in[0], targets, smoothing);
              },
              {randn({1, 3, 5}, 31)}) < 1e-4);
  }
}

TEST_CASE("joint loss arithmetic and monotonicity") {
  Tape tape;
  Var ctc = tape.leaf(Tensor::scalar(2));
  Var s2s = tape.leaf(Tensor::scalar(1));

  LossConfig zero;
  zero.alpha = 0.0;
  CHECK(joint_loss(tape, ctc, s2s, zero)->value[0] == 1.0);
  LossConfig one;
  one.alpha = 1.0;
  CHECK(joint_loss(tape, ctc, s2s, one)->value[0] == 2.0);
  LossConfig paper;  // alpha 0.3
  CHECK(joint_loss(tape, ctc, s2s, paper)->value[0] == doctest::Approx(1.3).epsilon(1e-15));

  // Monotone in each component for alpha in (0,1).
  Var bigger_ctc = tape.leaf(Tensor::scalar(3));
  CHECK(joint_loss(tape, bigger_ctc, s2s, paper)->value[0] >
        joint_loss(tape, ctc, s2s, paper)->value[0]);
  Var bigger_s2s = tape.leaf(Tensor::scalar(4));
  CHECK(joint_loss(tape, ctc, bigger_s2s, paper)->value[0] >
        joint_loss(tape, ctc, s2s, paper)->value[0]);

  Var bad = tape.leaf(Tensor::scalar(std::numeric_limits<real>::infinity()));
  CHECK_THROWS(joint_loss(tape, bad, s2s, paper));
}

TEST_CASE("decoder target construction") {
  data::Batch batch;
  batch.token_ids = {{2, 3, 4}, {5, data::kIgnoreId, data::kIgnoreId}};
  batch.token_lens = {3, 1};
  auto targets = make_decoder_targets(batch, 9);
  REQUIRE(targets.size() == 2);
  CHECK(targets[0] == std::vector<int>{2, 3, 4, 9});
  CHECK(targets[1] == std::vector<int>{5, 9, data::kIgnoreId, data::kIgnoreId});
}
