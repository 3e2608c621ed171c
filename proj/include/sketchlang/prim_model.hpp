#pragma once

#include <cstdint>
#include <vector>

#include "sketchlang/grammar.hpp"
#include "sketchlang/nn.hpp"
#include "sketchlang/util.hpp"
#include "sketchlang/vocab.hpp"

namespace sketchlang {

struct PrimModelConfig {
  int layers = 4;
  int heads = 4;
  int embed_dim = 128;
  int context_len = 256;
  double dropout = 0.2;
  double learning_rate = 1e-4;
  int batch_size = 32;
  double grad_clip_norm = 1.0;
  uint64_t seed = 0;
  bool use_q3 = true;   // syntax-role side channel
  bool use_q4 = true;   // parameter-role side channel
  bool mask_values_at_train = false;
};

// Decoder-only autoregressive model over full token sequences (primitive and
// constraint sections share one vocabulary). Inputs sum token, syntax-role,
// parameter-role and position embeddings; the output head starts at zero so
// the untrained model is exactly uniform.
template <typename S>
class PrimModel {
 public:
  PrimModel(const PrimModelConfig& cfg, const VocabLayout& layout);
  // params_ aliases member tensors
  PrimModel(const PrimModel&) = delete;
  PrimModel& operator=(const PrimModel&) = delete;

  // teacher-forced mean cross-entropy (nats) with gradient accumulation;
  // a null rng disables dropout
  double loss(const TokenSequence& seq, Rng* dropout_rng);
  double loss_forward_only(const TokenSequence& seq);

  // column t scores q_{t+1}; eval mode, no gradients
  nn::Mat<S> logits(const TokenSequence& seq);

  // per-token -log2 p of the ground-truth continuation (first token given)
  struct NllBreakdown {
    std::vector<double> bits;
    int clamped = 0;  // probabilities floored at 1e-12
  };
  NllBreakdown sequence_bits(const TokenSequence& seq);

  struct SampleResult {
    TokenSequence seq;
    int boundary_positions = 0;  // positions where the grammar expects lambda/omega
    // boundary positions where the unrestricted same-u sample differs from
    // the emitted token
    int interventions = 0;
    bool truncated = false;
    bool derailed = false;  // unmasked run emitted an illegal mid-body token
  };
  // masked: every step restricted to the legal-token set. unmasked: raw
  // nucleus samples, corrected only at lambda/omega positions; an illegal
  // token elsewhere is emitted as-is and terminates the sample.
  SampleResult sample(double nucleus_p, int max_len, Rng& rng,
                      bool masked = true);

  nn::ParamList<S>& params() { return params_; }
  const PrimModelConfig& config() const { return cfg_; }
  const VocabLayout& vocab() const { return layout_; }

 private:
  nn::Mat<S> features(const TokenSequence& seq, Rng* dropout_rng);
  void backward_features(const nn::Mat<S>& dx);
  void apply_legality_mask(nn::Mat<S>& logits, const TokenSequence& seq) const;

  PrimModelConfig cfg_;
  VocabLayout layout_;
  nn::Embedding<S> tok_, q3_, q4_, pos_;
  nn::Dropout<S> embed_drop_;
  std::vector<nn::Block<S>> blocks_;
  nn::LayerNorm<S> ln_f_;
  nn::Linear<S> head_;
  nn::ParamList<S> params_;
};

using PrimModelF = PrimModel<float>;
using PrimModelD = PrimModel<double>;

}  // namespace sketchlang
