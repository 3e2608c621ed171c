#include "sketchlang/prim_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sketchlang {

namespace {

// columns t of the logits predict q_{t+1}; the last column predicts nothing
std::vector<int> shift_targets(const std::vector<int>& q) {
  std::vector<int> t(q.begin() + 1, q.end());
  t.push_back(-1);
  return t;
}

}  // namespace

template <typename S>
PrimModel<S>::PrimModel(const PrimModelConfig& cfg, const VocabLayout& layout)
    : cfg_(cfg), layout_(layout),
      tok_("prim.tok", cfg.embed_dim, layout.size()),
      q3_("prim.q3", cfg.embed_dim, kQ3Size),
      q4_("prim.q4", cfg.embed_dim, kQ4Size),
      pos_("prim.pos", cfg.embed_dim, cfg.context_len),
      ln_f_("prim.lnf", cfg.embed_dim),
      head_("prim.head", layout.size(), cfg.embed_dim) {
  if (cfg.embed_dim % cfg.heads != 0) {
    throw std::invalid_argument("embed_dim must be divisible by heads");
  }
  embed_drop_.p = cfg.dropout;
  Rng rng(cfg.seed);
  tok_.init(rng, 0.02);
  q3_.init(rng, 0.02);
  q4_.init(rng, 0.02);
  pos_.init(rng, 0.02);
  blocks_.reserve(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    blocks_.emplace_back("prim.b" + std::to_string(l), cfg.embed_dim,
                         cfg.heads, cfg.dropout);
    blocks_.back().init(rng, 0.02);
  }
  // head stays zero: the untrained model is exactly uniform

  tok_.collect(params_);
  q3_.collect(params_);
  q4_.collect(params_);
  pos_.collect(params_);
  for (auto& b : blocks_) b.collect(params_);
  ln_f_.collect(params_);
  head_.collect(params_);
}

template <typename S>
nn::Mat<S> PrimModel<S>::features(const TokenSequence& seq, Rng* dropout_rng) {
  const int T = seq.size();
  if (T > cfg_.context_len) throw std::invalid_argument("sequence exceeds context");
  nn::Mat<S> x = tok_.forward(seq.q);
  if (cfg_.use_q3) x += q3_.forward(seq.q3);
  if (cfg_.use_q4) x += q4_.forward(seq.q4);
  std::vector<int> positions(T);
  std::iota(positions.begin(), positions.end(), 0);
  x += pos_.forward(positions);
  return embed_drop_.forward(x, dropout_rng);
}

template <typename S>
void PrimModel<S>::backward_features(const nn::Mat<S>& dx) {
  nn::Mat<S> d = embed_drop_.backward(dx);
  tok_.backward(d);
  if (cfg_.use_q3) q3_.backward(d);
  if (cfg_.use_q4) q4_.backward(d);
  pos_.backward(d);
}

template <typename S>
void PrimModel<S>::apply_legality_mask(nn::Mat<S>& logits,
                                       const TokenSequence& seq) const {
  GrammarCursor cur(layout_);
  for (int t = 0; t + 1 < seq.size(); ++t) {
    cur.advance(seq.q[t]);
    nn::Vec<S> masked = nn::Vec<S>::Constant(
        logits.rows(), -std::numeric_limits<S>::infinity());
    for (int tok : cur.legal_next()) masked(tok) = logits(tok, t);
    logits.col(t) = masked;
  }
}

template <typename S>
double PrimModel<S>::loss(const TokenSequence& seq, Rng* dropout_rng) {
  nn::Mat<S> x = features(seq, dropout_rng);
  for (auto& b : blocks_) x = b.forward(x, dropout_rng);
  nn::Mat<S> logits = head_.forward(ln_f_.forward(x));
  std::vector<int> targets = shift_targets(seq.q);
  if (cfg_.mask_values_at_train) apply_legality_mask(logits, seq);
  nn::Mat<S> dlogits;
  double ce = nn::CrossEntropy<S>::forward(logits, targets, dlogits);
  nn::Mat<S> dx = ln_f_.backward(head_.backward(dlogits));
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    dx = it->backward(dx);
  }
  backward_features(dx);
  return ce;
}

template <typename S>
double PrimModel<S>::loss_forward_only(const TokenSequence& seq) {
  nn::Mat<S> lg = logits(seq);
  std::vector<int> targets = shift_targets(seq.q);
  if (cfg_.mask_values_at_train) apply_legality_mask(lg, seq);
  nn::Mat<S> scratch;
  return nn::CrossEntropy<S>::forward(lg, targets, scratch);
}

template <typename S>
nn::Mat<S> PrimModel<S>::logits(const TokenSequence& seq) {
  nn::Mat<S> x = features(seq, nullptr);
  for (auto& b : blocks_) x = b.forward(x, nullptr);
  return head_.forward(ln_f_.forward(x));
}

template <typename S>
typename PrimModel<S>::NllBreakdown PrimModel<S>::sequence_bits(
    const TokenSequence& seq) {
  nn::Mat<S> lg = logits(seq);
  // a model trained under the legality mask is evaluated under it too
  if (cfg_.mask_values_at_train) apply_legality_mask(lg, seq);
  NllBreakdown out;
  for (int t = 0; t + 1 < seq.size(); ++t) {
    nn::Vec<S> col = lg.col(t);
    S mx = col.maxCoeff();
    nn::Vec<S> e = (col.array() - mx).exp();
    double p = (double)e(seq.q[t + 1]) / (double)e.sum();
    if (p < 1e-12) {
      p = 1e-12;
      ++out.clamped;
    }
    out.bits.push_back(-std::log2(p));
  }
  return out;
}

template <typename S>
typename PrimModel<S>::SampleResult PrimModel<S>::sample(double nucleus_p,
                                                         int max_len, Rng& rng,
                                                         bool masked) {
  SampleResult res;
  GrammarCursor cur(layout_);
  std::vector<nn::Mat<S>> kc(blocks_.size()), vc(blocks_.size());
  for (auto& m : kc) m.resize(cfg_.embed_dim, 0);
  for (auto& m : vc) m.resize(cfg_.embed_dim, 0);

  auto push_token = [&](int tok) {
    auto [s3, s4] = cur.side_of(tok);
    res.seq.q.push_back(tok);
    res.seq.q3.push_back(s3);
    res.seq.q4.push_back(s4);
    bool was_prim = !cur.in_constraint_section();
    cur.advance(tok);
    if (was_prim && cur.in_constraint_section()) {
      res.seq.n_p = res.seq.size();
    }
  };

  push_token(VocabLayout::kLambda);  // given, not predicted

  while (!cur.complete()) {
    if (res.seq.size() >= max_len || res.seq.size() >= cfg_.context_len) {
      res.truncated = true;
      break;
    }
    // decode the newest token through the cached stack
    int t = res.seq.size() - 1;
    nn::Vec<S> x = tok_.table.v.col(res.seq.q[t]);
    if (cfg_.use_q3) x += q3_.table.v.col(res.seq.q3[t]);
    if (cfg_.use_q4) x += q4_.table.v.col(res.seq.q4[t]);
    x += pos_.table.v.col(t);
    for (size_t l = 0; l < blocks_.size(); ++l) {
      x = blocks_[l].step(x, kc[l], vc[l]);
    }
    nn::Vec<S> logits = head_.apply(ln_f_.apply(x)).col(0);

    std::vector<double> probs(layout_.size());
    double mx = (double)logits.maxCoeff(), sum = 0;
    for (int i = 0; i < layout_.size(); ++i) {
      probs[i] = std::exp((double)logits(i) - mx);
      sum += probs[i];
    }
    for (double& pr : probs) pr /= sum;

    std::vector<int> legal = cur.legal_next();
    bool boundary = cur.at_boundary();
    if (boundary) ++res.boundary_positions;
    double u = uniform01(rng);

    auto restricted_choice = [&] {
      std::vector<double> restricted(probs.size(), 0.0);
      double m = 0;
      for (int tok : legal) m += probs[tok];
      if (m <= 0) {
        // degenerate distribution: fall back to uniform over legal
        for (int tok : legal) restricted[tok] = 1.0 / legal.size();
      } else {
        for (int tok : legal) restricted[tok] = probs[tok] / m;
      }
      return nucleus_sample(restricted, nucleus_p, u);
    };

    // an intervention is a forced lambda/omega position where the
    // unrestricted same-u sample disagrees with what gets emitted
    int raw = nucleus_sample(probs, nucleus_p, u);
    if (masked) {
      int tok = restricted_choice();
      if (boundary && raw != tok) ++res.interventions;
      push_token(tok);
    } else if (cur.accepts(raw)) {
      // unmasked run: only lambda/omega positions are corrected
      push_token(raw);
    } else if (boundary) {
      ++res.interventions;
      push_token(restricted_choice());
    } else {
      // derailed mid-body: record the offending token and stop
      res.seq.q.push_back(raw);
      res.seq.q3.push_back(q3_filler());
      res.seq.q4.push_back(q4_filler());
      res.derailed = true;
      break;
    }
  }
  return res;
}

template class PrimModel<float>;
template class PrimModel<double>;

}  // namespace sketchlang
