// Copyright 2026 lyrikit authors
//
// Licensed under the Apache License, Version 2.0

#include "lyrikit/decode/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lyrikit::decode {

using model::BoundParams;
using model::EncoderOut;
using model::Model;
using numeric::Tape;
using numeric::Tensor;
using numeric::Var;

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.joint != b.joint) return a.joint > b.joint;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

}  // namespace

CtcPrefixScorer::CtcPrefixScorer(Tensor logprobs, int blank, int eos)
    : logp_(std::move(logprobs)),
      t_(static_cast<int>(logp_.dim(0))),
      v_(static_cast<int>(logp_.dim(1))),
      blank_(blank),
      eos_(eos) {
  if (logp_.rank() != 2 || t_ < 1) fail("ctc prefix scorer needs a T x V log-prob matrix");
}

CtcPrefixScorer::State CtcPrefixScorer::initial() const {
  State st;
  st.r_nb.assign(static_cast<size_t>(t_), kLogZero);
  st.r_b.resize(static_cast<size_t>(t_));
  double acc = 0;
  for (int t = 0; t < t_; ++t) {
    acc += logp_.at(t, blank_);
    st.r_b[static_cast<size_t>(t)] = acc;
  }
  return st;
}

std::pair<double, CtcPrefixScorer::State> CtcPrefixScorer::score(
    const std::vector<int>& prefix, int c, const State& st) const {
  if (c == blank_) fail("ctc prefix scorer: blank is not a valid extension");
  if (c == eos_) {
    // Probability that the collapsed output is exactly the prefix.
    return {log_add(st.r_nb[static_cast<size_t>(t_ - 1)], st.r_b[static_cast<size_t>(t_ - 1)]),
            st};
  }
  if (c < 0 || c >= v_) fail("ctc prefix scorer: token out of range");

  const int out_len = static_cast<int>(prefix.size());
  const int last = out_len > 0 ? prefix.back() : -1;
  State ns;
  ns.r_nb.assign(static_cast<size_t>(t_), kLogZero);
  ns.r_b.assign(static_cast<size_t>(t_), kLogZero);

  double psi;
  if (out_len == 0) {
    ns.r_nb[0] = logp_.at(0, c);
    psi = ns.r_nb[0];
  } else {
    psi = kLogZero;
  }
  const int start = std::max(out_len, 1);
  for (int t = start; t < t_; ++t) {
    // phi: prefix complete at t-1 and ready to start a new c-run. A repeat of
    // the last token must pass through a blank frame.
    const double phi =
        c == last ? st.r_b[static_cast<size_t>(t - 1)]
                  : log_add(st.r_b[static_cast<size_t>(t - 1)], st.r_nb[static_cast<size_t>(t - 1)]);
    ns.r_nb[static_cast<size_t>(t)] =
        log_add(ns.r_nb[static_cast<size_t>(t - 1)], phi) + logp_.at(t, c);
    ns.r_b[static_cast<size_t>(t)] =
        log_add(ns.r_nb[static_cast<size_t>(t - 1)], ns.r_b[static_cast<size_t>(t - 1)]) +
        logp_.at(t, blank_);
    psi = log_add(psi, phi + logp_.at(t, c));
  }
  return {psi, ns};
}

namespace {

// One decoder step over all live hypotheses batched together. Returns the
// log-softmaxed next-token distribution per hypothesis.
Tensor next_token_logprobs(Model& m, const Tensor& h_value,
                           const std::vector<int>& enc_lens_one,
                           const std::vector<Hypothesis>& live, data::GenreClass genre) {
  const int64_t b = static_cast<int64_t>(live.size());
  const int64_t t2 = h_value.dim(1);
  const int64_t d = h_value.dim(2);

  Tape tape;
  BoundParams bp = BoundParams::bind(tape, m.params(), false);
  Tensor h_rep({b, t2, d});
  for (int64_t i = 0; i < b; ++i)
    for (int64_t t = 0; t < t2; ++t)
      for (int64_t k = 0; k < d; ++k) h_rep.at(i, t, k) = h_value.at(0, t, k);
  Var h = tape.constant(h_rep);

  std::vector<std::vector<int>> tokens_in;
  for (const Hypothesis& hyp : live) {
    std::vector<int> row;
    row.push_back(m.sos_eos_id());
    row.insert(row.end(), hyp.tokens.begin(), hyp.tokens.end());
    tokens_in.push_back(std::move(row));
  }
  std::vector<int> enc_lens(static_cast<size_t>(b), enc_lens_one[0]);
  Var dec = m.decoder_forward(tape, bp, h, enc_lens, tokens_in, genre, {});
  Var logits = tape.linear(dec, bp["s2s_head.weight"], bp["s2s_head.bias"]);
  Var logprobs = tape.log_softmax(logits);

  const int64_t l = logprobs->value.dim(1);
  const int64_t v = logprobs->value.dim(2);
  Tensor out({b, v});
  for (int64_t i = 0; i < b; ++i)
    for (int64_t k = 0; k < v; ++k) out.at(i, k) = logprobs->value.at(i, l - 1, k);
  return out;
}

}  // namespace

BeamSearchResult beam_search(Model& m, const Tensor& feats, data::GenreClass genre,
                             const DecodeConfig& cfg) {
  cfg.validate();
  if (feats.empty() || feats.rank() != 2)
    fail("beam search expects a non-empty T x feat matrix");
  const int64_t t = feats.dim(0);

  // Encode once.
  Tape tape;
  BoundParams bp = BoundParams::bind(tape, m.params(), false);
  Tensor batch_feats({1, t, feats.dim(1)});
  for (int64_t i = 0; i < feats.numel(); ++i) batch_feats[i] = feats[i];
  EncoderOut enc = m.encoder_forward(tape, bp, batch_feats, {static_cast<int>(t)}, genre, {});
  Var ctc_logits = tape.linear(enc.h, bp["ctc_head.weight"], bp["ctc_head.bias"]);
  Var ctc_logprobs3 = tape.log_softmax(ctc_logits);
  const int t2 = enc.lengths[0];
  if (t2 < 1) fail("beam search: empty acoustic encoding");
  const int v = m.config().vocab_size;
  Tensor ctc_logprobs({t2, v});
  for (int64_t i = 0; i < t2; ++i)
    for (int64_t k = 0; k < v; ++k) ctc_logprobs.at(i, k) = ctc_logprobs3->value.at(0, i, k);

  const int eos = m.sos_eos_id();
  CtcPrefixScorer scorer(std::move(ctc_logprobs), 0, eos);
  const double w = cfg.ctc_weight;
  const int max_len = std::max(1, static_cast<int>(cfg.max_len_ratio * t2));

  Hypothesis root;
  root.ctc_state = scorer.initial();
  std::vector<Hypothesis> live = {root};
  std::vector<Hypothesis> finished;

  // Zero-weight terms are dropped outright: an infeasible CTC prefix scores
  // -inf and would otherwise turn 0 * -inf into NaN.
  auto joint_score = [&](double att, double ctc, size_t len) {
    double s = cfg.penalty * static_cast<double>(len);
    if (w < 1) s += (1 - w) * att;
    if (w > 0) s += w * ctc;
    return s;
  };

  // eos competes for beam slots like every other token; a hypothesis ends
  // only when its eos expansion survives the beam cut.
  struct Candidate {
    Hypothesis hyp;
    bool ended;
  };
  auto candidate_better = [](const Candidate& a, const Candidate& b) {
    return better(a.hyp, b.hyp);
  };

  auto make_ended = [&](const Hypothesis& hyp, double att_eos) {
    Candidate cand{hyp, true};
    cand.hyp.att_logp += att_eos;
    cand.hyp.ctc_logp = scorer.score(hyp.tokens, eos, hyp.ctc_state).first;
    cand.hyp.joint = joint_score(cand.hyp.att_logp, cand.hyp.ctc_logp, cand.hyp.tokens.size());
    return cand;
  };

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    Tensor att = next_token_logprobs(m, enc.h->value, enc.lengths, live, genre);
    std::vector<Candidate> candidates;
    for (size_t bi = 0; bi < live.size(); ++bi) {
      const Hypothesis& hyp = live[bi];
      for (int c = 1; c < v; ++c) {  // blank (0) never expands
        if (c == eos) {
          candidates.push_back(make_ended(hyp, att.at(static_cast<int64_t>(bi), c)));
          continue;
        }
        auto [psi, state] = scorer.score(hyp.tokens, c, hyp.ctc_state);
        Candidate next{hyp, false};
        next.hyp.tokens.push_back(c);
        next.hyp.att_logp += att.at(static_cast<int64_t>(bi), c);
        next.hyp.ctc_logp = psi;
        next.hyp.ctc_state = std::move(state);
        next.hyp.joint = joint_score(next.hyp.att_logp, next.hyp.ctc_logp, next.hyp.tokens.size());
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), candidate_better);
    if (static_cast<int>(candidates.size()) > cfg.beam)
      candidates.resize(static_cast<size_t>(cfg.beam));
    live.clear();
    for (Candidate& cand : candidates) {
      if (cand.ended)
        finished.push_back(std::move(cand.hyp));
      else
        live.push_back(std::move(cand.hyp));
    }

    // Scores only decay along a trajectory when penalty <= 0, so a finished
    // hypothesis beating every live one is final.
    if (cfg.penalty <= 0 && !finished.empty() && !live.empty()) {
      const Hypothesis& best_fin = *std::min_element(
          finished.begin(), finished.end(),
          [](const Hypothesis& a, const Hypothesis& b) { return better(a, b); });
      if (best_fin.joint >= live.front().joint) break;
    }

    if (step + 1 == max_len && !live.empty()) {
      // Length cap: force-end the survivors.
      Tensor att_last = next_token_logprobs(m, enc.h->value, enc.lengths, live, genre);
      for (size_t bi = 0; bi < live.size(); ++bi)
        finished.push_back(make_ended(live[bi], att_last.at(static_cast<int64_t>(bi), eos)).hyp);
    }
  }
  if (finished.empty()) fail("beam search produced no finished hypothesis");
  std::sort(finished.begin(), finished.end(), better);

  BeamSearchResult result;
  result.best = finished.front();
  result.finished = std::move(finished);
  result.enc_frames = t2;
  return result;
}

std::vector<int> greedy_decode(Model& m, const Tensor& feats, data::GenreClass genre,
                               int max_len) {
  if (feats.empty() || feats.rank() != 2)
    fail("greedy decode expects a non-empty T x feat matrix");
  const int64_t t = feats.dim(0);
  Tape tape;
  BoundParams bp = BoundParams::bind(tape, m.params(), false);
  Tensor batch_feats({1, t, feats.dim(1)});
  for (int64_t i = 0; i < feats.numel(); ++i) batch_feats[i] = feats[i];
  EncoderOut enc = m.encoder_forward(tape, bp, batch_feats, {static_cast<int>(t)}, genre, {});
  const int t2 = enc.lengths[0];
  if (max_len < 0) max_len = t2;
  const int v = m.config().vocab_size;
  const int eos = m.sos_eos_id();

  std::vector<int> tokens;
  for (int step = 0; step < max_len; ++step) {
    Hypothesis hyp;
    hyp.tokens = tokens;
    Tensor att = next_token_logprobs(m, enc.h->value, enc.lengths, {hyp}, genre);
    int best = 1;
    for (int c = 2; c < v; ++c)
      if (att.at(0, c) > att.at(0, best)) best = c;
    if (best == eos) break;
    tokens.push_back(best);
  }
  return tokens;
}

}  // namespace lyrikit::decode
