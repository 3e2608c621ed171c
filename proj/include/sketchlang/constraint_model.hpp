#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sketchlang/codebook.hpp"
#include "sketchlang/grammar.hpp"
#include "sketchlang/nn.hpp"
#include "sketchlang/types.hpp"
#include "sketchlang/util.hpp"
#include "sketchlang/vocab.hpp"

namespace sketchlang {

struct ConstraintModelConfig {
  int encoder_layers = 3;
  int pointer_layers = 3;
  int heads = 4;
  int embed_dim = 128;
  int context_len = 256;  // longest constraint section
  double dropout = 0.2;
  double learning_rate = 1e-4;
  int batch_size = 32;
  double grad_clip_norm = 1.0;
  uint64_t seed = 0;
  bool use_q4 = true;
  // per-parameter dictionaries; false falls back to one dictionary indexed
  // by raw token id
  bool shared_param_embeddings = true;
};

// lambda, omega, the 8 constraint types and the 4 sub-reference values get
// learned slot vectors appended after the encoded primitives
constexpr int kVirtualSlots = 14;

// Pointer-network constraint generator. Each primitive is embedded as the
// sum of per-parameter dictionary rows (absent parameters hit a learned
// filler row), contextualized by a bidirectional encoder; a causal decoder
// over the constraint prefix emits a distribution over pointable slots via
// dot products. The zero-initialized output projection makes the untrained
// distribution exactly uniform over slots.
template <typename S>
class ConstraintModel {
 public:
  ConstraintModel(const ConstraintModelConfig& cfg, const VocabLayout& layout);
  // params_ aliases member tensors
  ConstraintModel(const ConstraintModel&) = delete;
  ConstraintModel& operator=(const ConstraintModel&) = delete;

  // slot index of a constraint-section token: primitive pointers map to
  // their primitive, structural tokens to the virtual block
  int slot_of(int token, int prim_count) const;
  int token_of_slot(int slot, int prim_count) const;

  // teacher-forced mean cross-entropy over the constraint section (softmax
  // over all slots); accumulates gradients. A null rng disables dropout.
  double loss(const TokenSequence& seq, Rng* dropout_rng);
  double loss_forward_only(const TokenSequence& seq);

  // per-primitive embedding sums h'' and their contextualized form h'
  // (eval mode); columns follow sketch order
  nn::Mat<S> primitive_sums(const std::vector<int>& q, int n_p);
  nn::Mat<S> encoded_primitives(const std::vector<int>& q, int n_p);

  struct TfAccuracy {
    int correct = 0;
    int total = 0;
    double percent() const { return total ? 100.0 * correct / total : 0.0; }
  };
  // argmax of the legality-masked distribution vs ground truth
  TfAccuracy teacher_forced_accuracy(const TokenSequence& seq);

  struct AutoconstrainResult {
    std::vector<int> q;  // prim section + sampled constraint section
    std::vector<Constraint> constraints;  // deduplicated
    bool truncated = false;
  };
  // prim_tokens: a complete primitive section (lambda ... omega); empty
  // means zero primitives and yields an empty constraint list
  AutoconstrainResult autoconstrain(const std::vector<int>& prim_tokens,
                                    const CodebookSet& books, double nucleus_p,
                                    int max_len, Rng& rng);

  nn::ParamList<S>& params() { return params_; }
  const ConstraintModelConfig& config() const { return cfg_; }
  const VocabLayout& vocab() const { return layout_; }

 private:
  // dictionary row per parameter field (tau, kappa, x, y, u, v, r, c, a, b);
  // 0 is the filler row
  struct PrimFields {
    std::array<int, 10> idx{};
    std::vector<int> body_tokens;  // tau, kappa, values (raw ids)
  };
  std::vector<PrimFields> parse_primitives(const std::vector<int>& q,
                                           int n_p) const;
  nn::Mat<S> sums_from_fields(const std::vector<PrimFields>& prims) const;
  void backward_sums(const std::vector<PrimFields>& prims,
                     const nn::Mat<S>& dsums);
  nn::Mat<S> slot_matrix(const nn::Mat<S>& hprime) const;
  // shared forward path; caches activations for loss()'s backward
  nn::Mat<S> forward_logits(const TokenSequence& seq, Rng* dropout_rng);

  ConstraintModelConfig cfg_;
  VocabLayout layout_;
  // Eq. 3 dictionaries (filler row at 0); shared_ replaces them when the
  // ablation is on
  std::array<nn::Tensor<S>, 10> dicts_;
  nn::Tensor<S> shared_;
  nn::Tensor<S> enc_pos_;
  std::vector<nn::Block<S>> enc_blocks_;
  nn::Tensor<S> lambda_slot_, omega_slot_, nu_slots_, mu_slots_;
  nn::Tensor<S> q4c_, pos_c_;
  std::vector<nn::Block<S>> dec_blocks_;
  nn::LayerNorm<S> ln_f_;
  nn::Linear<S> proj_;
  nn::Dropout<S> enc_drop_, dec_drop_;
  nn::ParamList<S> params_;

  // caches between forward_logits and loss backward
  std::vector<PrimFields> prims_;
  nn::Mat<S> hprime_, slots_, gout_;
  std::vector<int> ctokens_, cq4_;
};

using ConstraintModelF = ConstraintModel<float>;
using ConstraintModelD = ConstraintModel<double>;

}  // namespace sketchlang
