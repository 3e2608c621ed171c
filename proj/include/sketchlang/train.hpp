#pragma once

#include <ostream>
#include <vector>

#include "sketchlang/constraint_model.hpp"
#include "sketchlang/prim_model.hpp"
#include "sketchlang/vocab.hpp"

namespace sketchlang {

struct TrainOptions {
  int max_epochs = 40;
  int patience = 4;               // epochs without validation improvement
  double min_improvement = 1e-4;  // nats, on the mean validation loss
  double time_budget_sec = 0;     // 0 = unlimited; checked between batches
  uint64_t seed = 1;              // epoch shuffling and dropout
  std::ostream* log = nullptr;
};

struct TrainResult {
  int epochs = 0;
  double best_val = 0;  // mean validation loss in nats (train loss if no val)
  std::vector<double> train_curve, val_curve;
  bool out_of_time = false;
};

// Mini-batch Adam on the model's own config (batch size, learning rate,
// clipping, dropout), early-stopped on the validation loss; the weights that
// scored best_val are restored before returning. A non-finite batch loss
// aborts with diagnostics. Validation always runs without dropout.
template <typename S>
TrainResult fit(PrimModel<S>& m, const std::vector<TokenSequence>& train,
                const std::vector<TokenSequence>& val,
                const TrainOptions& opt = {});
template <typename S>
TrainResult fit(ConstraintModel<S>& m, const std::vector<TokenSequence>& train,
                const std::vector<TokenSequence>& val,
                const TrainOptions& opt = {});

}  // namespace sketchlang
