#include "sketchlang/constraint_model.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace sketchlang {

namespace {

// value-slot targets inside the ten-field array
// (0 tau, 1 kappa, 2 x, 3 y, 4 u, 5 v, 6 r, 7 c, 8 a, 9 b)
const std::vector<int>& value_fields(PrimKind k) {
  static const std::vector<int> tables[kPrimKindCount] = {
      {2, 3},                    // point
      {2, 3, 4, 5, 8, 9},        // line
      {2, 3, 4, 5, 6, 7},        // circle
      {2, 3, 4, 5, 6, 7, 8, 9},  // arc
  };
  return tables[(int)k];
}

bool same_constraint(const Constraint& a, const Constraint& b) {
  if (a.kind != b.kind || a.targets.size() != b.targets.size()) return false;
  for (size_t i = 0; i < a.targets.size(); ++i) {
    if (a.targets[i].prim != b.targets[i].prim ||
        a.targets[i].sub != b.targets[i].sub) {
      return false;
    }
  }
  return true;
}

}  // namespace

template <typename S>
ConstraintModel<S>::ConstraintModel(const ConstraintModelConfig& cfg,
                                    const VocabLayout& layout)
    : cfg_(cfg), layout_(layout),
      enc_pos_("cm.enc_pos", cfg.embed_dim, layout.max_refs),
      lambda_slot_("cm.slot.lambda", cfg.embed_dim, 1),
      omega_slot_("cm.slot.omega", cfg.embed_dim, 1),
      nu_slots_("cm.slot.nu", cfg.embed_dim, kConstrKindCount),
      mu_slots_("cm.slot.mu", cfg.embed_dim, 4),
      q4c_("cm.q4", cfg.embed_dim, kQ4Size),
      pos_c_("cm.pos", cfg.embed_dim, cfg.context_len),
      ln_f_("cm.lnf", cfg.embed_dim),
      proj_("cm.proj", cfg.embed_dim, cfg.embed_dim) {
  if (cfg.embed_dim % cfg.heads != 0) {
    throw std::invalid_argument("embed_dim must be divisible by heads");
  }
  const int d = cfg.embed_dim;
  using PT = ParamType;
  const auto& sizes = layout.codebook_sizes;
  const int dict_cols[10] = {kPrimKindCount + 1,
                             3,
                             sizes[(int)PT::Location] + 1,
                             sizes[(int)PT::Location] + 1,
                             sizes[(int)PT::Direction] + 1,
                             sizes[(int)PT::Direction] + 1,
                             sizes[(int)PT::Radius] + 1,
                             sizes[(int)PT::Rotation] + 1,
                             sizes[(int)PT::Range] + 1,
                             sizes[(int)PT::Range] + 1};
  static const char* dict_names[10] = {"tau", "kappa", "x", "y", "u",
                                       "v",   "r",     "c", "a", "b"};
  for (int f = 0; f < 10; ++f) {
    dicts_[f] = nn::Tensor<S>(std::string("cm.dict.") + dict_names[f], d,
                              dict_cols[f]);
  }
  shared_ = nn::Tensor<S>("cm.dict.shared", d, layout.size());

  Rng rng(cfg.seed);
  if (cfg.shared_param_embeddings) {
    for (auto& t : dicts_) t.init_normal(rng, 0.02);
  } else {
    shared_.init_normal(rng, 0.02);
  }
  // enc_pos_ stays zero so the identity-initialized encoder maps h'' to h'
  enc_blocks_.reserve(cfg.encoder_layers);
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    enc_blocks_.emplace_back("cm.enc" + std::to_string(l), d, cfg.heads,
                             cfg.dropout);
    enc_blocks_.back().init(rng, 0.02);
  }
  lambda_slot_.init_normal(rng, 0.02);
  omega_slot_.init_normal(rng, 0.02);
  nu_slots_.init_normal(rng, 0.02);
  mu_slots_.init_normal(rng, 0.02);
  q4c_.init_normal(rng, 0.02);
  pos_c_.init_normal(rng, 0.02);
  dec_blocks_.reserve(cfg.pointer_layers);
  for (int l = 0; l < cfg.pointer_layers; ++l) {
    dec_blocks_.emplace_back("cm.dec" + std::to_string(l), d, cfg.heads,
                             cfg.dropout);
    dec_blocks_.back().init(rng, 0.02);
  }
  // proj_ stays zero: the untrained pointer distribution is uniform
  enc_drop_.p = cfg.dropout;
  dec_drop_.p = cfg.dropout;

  if (cfg.shared_param_embeddings) {
    for (auto& t : dicts_) params_.push_back(&t);
  } else {
    params_.push_back(&shared_);
  }
  params_.push_back(&enc_pos_);
  for (auto& b : enc_blocks_) b.collect(params_);
  params_.push_back(&lambda_slot_);
  params_.push_back(&omega_slot_);
  params_.push_back(&nu_slots_);
  params_.push_back(&mu_slots_);
  params_.push_back(&q4c_);
  params_.push_back(&pos_c_);
  for (auto& b : dec_blocks_) b.collect(params_);
  ln_f_.collect(params_);
  proj_.collect(params_);
}

template <typename S>
int ConstraintModel<S>::slot_of(int token, int prim_count) const {
  switch (layout_.role(token)) {
    case TokenRole::Pointer: {
      int p = layout_.pointer_of(token);
      if (p < 0 || p >= prim_count) {
        throw std::invalid_argument("pointer token past primitive count");
      }
      return p;
    }
    case TokenRole::Lambda:
      return prim_count;
    case TokenRole::Omega:
      return prim_count + 1;
    case TokenRole::ConstrType:
      return prim_count + 2 + (token - VocabLayout::kConstrTypeBase);
    case TokenRole::SubRefVal:
      return prim_count + 10 + (token - VocabLayout::kSubRefBase);
    default:
      throw std::invalid_argument("token has no pointer slot");
  }
}

template <typename S>
int ConstraintModel<S>::token_of_slot(int slot, int prim_count) const {
  if (slot < 0 || slot >= prim_count + kVirtualSlots) {
    throw std::invalid_argument("slot out of range");
  }
  if (slot < prim_count) return layout_.pointer_token(slot);
  int v = slot - prim_count;
  if (v == 0) return VocabLayout::kLambda;
  if (v == 1) return VocabLayout::kOmega;
  if (v < 10) return VocabLayout::kConstrTypeBase + (v - 2);
  return VocabLayout::kSubRefBase + (v - 10);
}

template <typename S>
auto ConstraintModel<S>::parse_primitives(const std::vector<int>& q,
                                          int n_p) const
    -> std::vector<PrimFields> {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  need(n_p >= 2 && n_p <= (int)q.size(), "primitive section out of range");
  std::vector<PrimFields> out;
  int i = 0;
  while (i < n_p - 1) {
    need(q[i] == VocabLayout::kLambda, "expected lambda before a primitive");
    ++i;
    need(i < n_p && layout_.role(q[i]) == TokenRole::PrimType, "expected tau");
    PrimKind kind = layout_.prim_of(q[i]);
    PrimFields f;
    f.idx.fill(0);
    f.idx[0] = 1 + (int)kind;
    f.body_tokens.push_back(q[i]);
    ++i;
    need(i < n_p && layout_.role(q[i]) == TokenRole::Construction,
         "expected kappa");
    f.idx[1] = 1 + (layout_.construction_of(q[i]) ? 1 : 0);
    f.body_tokens.push_back(q[i]);
    ++i;
    const std::vector<int>& fields = value_fields(kind);
    std::vector<ParamType> types = param_types_of(kind);
    for (size_t s = 0; s < types.size(); ++s) {
      need(i < n_p && layout_.role(q[i]) == TokenRole::Value,
           "expected value token");
      int bin = layout_.bin_of(q[i], types[s]);
      need(bin >= 0 && bin < layout_.codebook_sizes[(int)types[s]],
           "value token in the wrong parameter block");
      f.idx[fields[s]] = 1 + bin;
      f.body_tokens.push_back(q[i]);
      ++i;
    }
    out.push_back(std::move(f));
  }
  need(i == n_p - 1 && q[i] == VocabLayout::kOmega,
       "primitive section must close with omega");
  need(!out.empty(), "no primitives");
  need((int)out.size() <= layout_.max_refs, "too many primitives");
  return out;
}

template <typename S>
nn::Mat<S> ConstraintModel<S>::sums_from_fields(
    const std::vector<PrimFields>& prims) const {
  const int d = cfg_.embed_dim;
  nn::Mat<S> h = nn::Mat<S>::Zero(d, (Eigen::Index)prims.size());
  for (size_t j = 0; j < prims.size(); ++j) {
    if (cfg_.shared_param_embeddings) {
      for (int f = 0; f < 10; ++f) {
        h.col((Eigen::Index)j) += dicts_[f].v.col(prims[j].idx[f]);
      }
    } else {
      for (int tok : prims[j].body_tokens) {
        h.col((Eigen::Index)j) += shared_.v.col(tok);
      }
    }
  }
  return h;
}

template <typename S>
void ConstraintModel<S>::backward_sums(const std::vector<PrimFields>& prims,
                                       const nn::Mat<S>& dsums) {
  for (size_t j = 0; j < prims.size(); ++j) {
    if (cfg_.shared_param_embeddings) {
      for (int f = 0; f < 10; ++f) {
        dicts_[f].g.col(prims[j].idx[f]) += dsums.col((Eigen::Index)j);
      }
    } else {
      for (int tok : prims[j].body_tokens) {
        shared_.g.col(tok) += dsums.col((Eigen::Index)j);
      }
    }
  }
}

template <typename S>
nn::Mat<S> ConstraintModel<S>::slot_matrix(const nn::Mat<S>& hprime) const {
  const Eigen::Index n = hprime.cols();
  nn::Mat<S> slots(cfg_.embed_dim, n + kVirtualSlots);
  slots.leftCols(n) = hprime;
  slots.col(n) = lambda_slot_.v.col(0);
  slots.col(n + 1) = omega_slot_.v.col(0);
  slots.middleCols(n + 2, kConstrKindCount) = nu_slots_.v;
  slots.middleCols(n + 10, 4) = mu_slots_.v;
  return slots;
}

template <typename S>
nn::Mat<S> ConstraintModel<S>::primitive_sums(const std::vector<int>& q,
                                              int n_p) {
  return sums_from_fields(parse_primitives(q, n_p));
}

template <typename S>
nn::Mat<S> ConstraintModel<S>::encoded_primitives(const std::vector<int>& q,
                                                  int n_p) {
  nn::Mat<S> x = sums_from_fields(parse_primitives(q, n_p));
  for (Eigen::Index j = 0; j < x.cols(); ++j) x.col(j) += enc_pos_.v.col(j);
  for (auto& b : enc_blocks_) x = b.forward(x, nullptr, false);
  return x;
}

template <typename S>
nn::Mat<S> ConstraintModel<S>::forward_logits(const TokenSequence& seq,
                                              Rng* dropout_rng) {
  prims_ = parse_primitives(seq.q, seq.n_p);
  const int n = (int)prims_.size();
  nn::Mat<S> enc_in = sums_from_fields(prims_);
  for (Eigen::Index j = 0; j < enc_in.cols(); ++j) {
    enc_in.col(j) += enc_pos_.v.col(j);
  }
  enc_in = enc_drop_.forward(enc_in, dropout_rng);
  nn::Mat<S> x = enc_in;
  for (auto& b : enc_blocks_) x = b.forward(x, dropout_rng, false);
  hprime_ = x;
  slots_ = slot_matrix(hprime_);

  const int K = seq.size() - seq.n_p;
  if (K < 1) throw std::invalid_argument("empty constraint section");
  if (K > cfg_.context_len) {
    throw std::invalid_argument("constraint section exceeds context");
  }
  if (seq.q[seq.n_p] != VocabLayout::kLambda) {
    throw std::invalid_argument("constraint section must open with lambda");
  }
  ctokens_.assign(seq.q.begin() + seq.n_p, seq.q.end());
  cq4_.assign(seq.q4.begin() + seq.n_p, seq.q4.end());

  nn::Mat<S> dec_in(cfg_.embed_dim, K);
  for (int i = 0; i < K; ++i) {
    dec_in.col(i) = slots_.col(slot_of(ctokens_[i], n));
    if (cfg_.use_q4) dec_in.col(i) += q4c_.v.col(cq4_[(size_t)i]);
    dec_in.col(i) += pos_c_.v.col(i);
  }
  dec_in = dec_drop_.forward(dec_in, dropout_rng);
  nn::Mat<S> y = dec_in;
  for (auto& b : dec_blocks_) y = b.forward(y, dropout_rng, true);
  gout_ = proj_.forward(ln_f_.forward(y));
  return slots_.transpose() * gout_;
}

template <typename S>
double ConstraintModel<S>::loss(const TokenSequence& seq, Rng* dropout_rng) {
  nn::Mat<S> logits = forward_logits(seq, dropout_rng);
  const int n = (int)prims_.size();
  const int K = (int)ctokens_.size();
  std::vector<int> targets((size_t)K);
  for (int i = 0; i + 1 < K; ++i) targets[(size_t)i] = slot_of(ctokens_[i + 1], n);
  targets[(size_t)K - 1] = -1;

  nn::Mat<S> dlogits;
  double ce = nn::CrossEntropy<S>::forward(logits, targets, dlogits);

  // logits = slots^T g: gradient reaches the slot matrix through the dot
  // products and again through the decoder's input features
  nn::Mat<S> dg = slots_ * dlogits;
  nn::Mat<S> dslots = gout_ * dlogits.transpose();

  nn::Mat<S> dy = ln_f_.backward(proj_.backward(dg));
  for (auto it = dec_blocks_.rbegin(); it != dec_blocks_.rend(); ++it) {
    dy = it->backward(dy);
  }
  nn::Mat<S> dd = dec_drop_.backward(dy);
  for (int i = 0; i < K; ++i) {
    dslots.col(slot_of(ctokens_[i], n)) += dd.col(i);
    if (cfg_.use_q4) q4c_.g.col(cq4_[(size_t)i]) += dd.col(i);
    pos_c_.g.col(i) += dd.col(i);
  }

  lambda_slot_.g.col(0) += dslots.col(n);
  omega_slot_.g.col(0) += dslots.col(n + 1);
  nu_slots_.g += dslots.middleCols(n + 2, kConstrKindCount);
  mu_slots_.g += dslots.middleCols(n + 10, 4);

  nn::Mat<S> dx = dslots.leftCols(n);
  for (auto it = enc_blocks_.rbegin(); it != enc_blocks_.rend(); ++it) {
    dx = it->backward(dx);
  }
  nn::Mat<S> de = enc_drop_.backward(dx);
  for (Eigen::Index j = 0; j < de.cols(); ++j) enc_pos_.g.col(j) += de.col(j);
  backward_sums(prims_, de);
  return ce;
}

template <typename S>
double ConstraintModel<S>::loss_forward_only(const TokenSequence& seq) {
  nn::Mat<S> logits = forward_logits(seq, nullptr);
  const int n = (int)prims_.size();
  const int K = (int)ctokens_.size();
  std::vector<int> targets((size_t)K);
  for (int i = 0; i + 1 < K; ++i) targets[(size_t)i] = slot_of(ctokens_[i + 1], n);
  targets[(size_t)K - 1] = -1;
  nn::Mat<S> scratch;
  return nn::CrossEntropy<S>::forward(logits, targets, scratch);
}

template <typename S>
auto ConstraintModel<S>::teacher_forced_accuracy(const TokenSequence& seq)
    -> TfAccuracy {
  nn::Mat<S> logits = forward_logits(seq, nullptr);
  const int n = (int)prims_.size();
  const int K = (int)ctokens_.size();
  GrammarCursor cur(layout_);
  for (int t = 0; t <= seq.n_p; ++t) {
    if (!cur.advance(seq.q[(size_t)t])) {
      throw std::invalid_argument("ungrammatical sequence");
    }
  }
  TfAccuracy acc;
  for (int i = 0; i + 1 < K; ++i) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int tok : cur.legal_next()) {
      int s = slot_of(tok, n);
      double v = (double)logits(s, i);
      if (v > best_score) {
        best_score = v;
        best = s;
      }
    }
    ++acc.total;
    if (best == slot_of(ctokens_[(size_t)i + 1], n)) ++acc.correct;
    if (!cur.advance(ctokens_[(size_t)i + 1])) {
      throw std::invalid_argument("ungrammatical sequence");
    }
  }
  return acc;
}

template <typename S>
auto ConstraintModel<S>::autoconstrain(const std::vector<int>& prim_tokens,
                                       const CodebookSet& books,
                                       double nucleus_p, int max_len, Rng& rng)
    -> AutoconstrainResult {
  AutoconstrainResult res;
  if (prim_tokens.empty()) return res;

  GrammarCursor cur(layout_);
  for (int t : prim_tokens) {
    if (!cur.advance(t)) {
      throw std::invalid_argument("invalid primitive section");
    }
  }
  if (cur.complete() || !cur.in_constraint_section() ||
      cur.slot_kind() != SlotKind::Lambda) {
    throw std::invalid_argument("tokens must end at the primitive omega");
  }
  const int n = cur.primitive_count();
  const int d = cfg_.embed_dim;
  nn::Mat<S> hp = encoded_primitives(prim_tokens, (int)prim_tokens.size());
  nn::Mat<S> slots = slot_matrix(hp);
  const int n_slots = n + kVirtualSlots;

  std::vector<nn::Mat<S>> kc(dec_blocks_.size()), vc(dec_blocks_.size());
  for (auto& m : kc) m.resize(d, 0);
  for (auto& m : vc) m.resize(d, 0);

  std::vector<int> c;
  auto push = [&](int tok) {
    int q4 = cur.side_of(tok).second;
    cur.advance(tok);
    c.push_back(tok);
    nn::Vec<S> x = slots.col(slot_of(tok, n));
    if (cfg_.use_q4) x += q4c_.v.col(q4);
    x += pos_c_.v.col((Eigen::Index)c.size() - 1);
    for (size_t l = 0; l < dec_blocks_.size(); ++l) {
      x = dec_blocks_[l].step(x, kc[l], vc[l]);
    }
    nn::Vec<S> g = proj_.apply(ln_f_.apply(x)).col(0);
    return nn::Vec<S>(slots.transpose() * g);
  };

  nn::Vec<S> logits = push(VocabLayout::kLambda);
  while (!cur.complete()) {
    if ((int)c.size() >= max_len || (int)c.size() >= cfg_.context_len) {
      res.truncated = true;
      break;
    }
    std::vector<double> probs(n_slots, 0.0);
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<int> legal_slots;
    for (int tok : cur.legal_next()) {
      int s = slot_of(tok, n);
      legal_slots.push_back(s);
      mx = std::max(mx, (double)logits(s));
    }
    double sum = 0;
    for (int s : legal_slots) {
      probs[(size_t)s] = std::exp((double)logits(s) - mx);
      sum += probs[(size_t)s];
    }
    for (int s : legal_slots) probs[(size_t)s] /= sum;
    int slot = nucleus_sample(probs, nucleus_p, uniform01(rng));
    logits = push(token_of_slot(slot, n));
  }

  res.q = prim_tokens;
  res.q.insert(res.q.end(), c.begin(), c.end());
  if (!res.truncated) {
    Sketch sk = interpret(res.q, books, layout_);
    for (const Constraint& con : sk.constraints) {
      bool dup = false;
      for (const Constraint& seen : res.constraints) {
        if (same_constraint(con, seen)) {
          dup = true;
          break;
        }
      }
      if (!dup) res.constraints.push_back(con);
    }
  }
  return res;
}

template class ConstraintModel<float>;
template class ConstraintModel<double>;

}  // namespace sketchlang
