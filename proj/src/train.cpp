#include "sketchlang/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sketchlang {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

template <typename S, typename Model>
TrainResult fit_impl(Model& m, const std::vector<TokenSequence>& train,
                     const std::vector<TokenSequence>& val,
                     const TrainOptions& opt) {
  if (train.empty()) throw std::invalid_argument("fit: empty training set");
  const auto& cfg = m.config();
  nn::ParamList<S>& ps = m.params();
  nn::Adam<S> adam;
  adam.lr = cfg.learning_rate;
  adam.clip = cfg.grad_clip_norm;
  Rng rng(opt.seed);
  auto t0 = std::chrono::steady_clock::now();

  auto mean_eval = [&](const std::vector<TokenSequence>& set) {
    double sum = 0;
    for (const TokenSequence& seq : set) sum += m.loss_forward_only(seq);
    return sum / (double)set.size();
  };

  TrainResult res;
  std::vector<nn::Mat<S>> best;
  double best_score = 0;
  int bad_epochs = 0;
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= opt.max_epochs && !res.out_of_time; ++epoch) {
    shuffle_vec(order, rng);
    double epoch_sum = 0;
    long seen = 0;
    for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
      size_t hi = std::min(order.size(), at + cfg.batch_size);
      nn::zero_grads(ps);
      double batch_sum = 0;
      for (size_t i = at; i < hi; ++i)
        batch_sum += m.loss(train[order[i]], &rng);
      if (!std::isfinite(batch_sum))
        throw std::runtime_error(
            "fit: non-finite loss at epoch " + std::to_string(epoch) +
            ", batch " + std::to_string(at / cfg.batch_size));
      S inv = S(1.0 / double(hi - at));
      for (nn::Tensor<S>* p : ps) p->g *= inv;
      adam.step(ps);
      epoch_sum += batch_sum;
      seen += (long)(hi - at);
      if (opt.time_budget_sec > 0 && seconds_since(t0) > opt.time_budget_sec) {
        res.out_of_time = true;
        break;
      }
    }
    double train_mean = epoch_sum / (double)seen;
    double score = val.empty() ? train_mean : mean_eval(val);
    res.train_curve.push_back(train_mean);
    res.val_curve.push_back(score);
    res.epochs = epoch;
    if (opt.log)
      (*opt.log) << "epoch " << epoch << "  train " << train_mean << "  val "
                 << score << "  (" << seconds_since(t0) << " s)" << std::endl;

    if (best.empty() || score < best_score - opt.min_improvement) {
      best_score = score;
      best.clear();
      for (nn::Tensor<S>* p : ps) best.push_back(p->v);
      bad_epochs = 0;
    } else if (++bad_epochs >= opt.patience) {
      break;
    }
  }

  if (!best.empty())
    for (size_t i = 0; i < ps.size(); ++i) ps[i]->v = best[i];
  res.best_val = best_score;
  return res;
}

}  // namespace

template <typename S>
TrainResult fit(PrimModel<S>& m, const std::vector<TokenSequence>& train,
                const std::vector<TokenSequence>& val,
                const TrainOptions& opt) {
  return fit_impl<S>(m, train, val, opt);
}

template <typename S>
TrainResult fit(ConstraintModel<S>& m, const std::vector<TokenSequence>& train,
                const std::vector<TokenSequence>& val,
                const TrainOptions& opt) {
  return fit_impl<S>(m, train, val, opt);
}

template TrainResult fit(PrimModel<float>&, const std::vector<TokenSequence>&,
                         const std::vector<TokenSequence>&,
                         const TrainOptions&);
template TrainResult fit(PrimModel<double>&, const std::vector<TokenSequence>&,
                         const std::vector<TokenSequence>&,
                         const TrainOptions&);
template TrainResult fit(ConstraintModel<float>&,
                         const std::vector<TokenSequence>&,
                         const std::vector<TokenSequence>&,
                         const TrainOptions&);
template TrainResult fit(ConstraintModel<double>&,
                         const std::vector<TokenSequence>&,
                         const std::vector<TokenSequence>&,
                         const TrainOptions&);

}  // namespace sketchlang
