#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sketchlang/util.hpp"

// Minimal transformer toolkit: dense layers with explicit forward/backward,
// activations stored column-per-token (d x T, column-major so token vectors
// are contiguous). Everything is templated on the scalar so the same code
// trains in float and gradient-checks in double.
namespace sketchlang::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct Tensor {
  Mat<S> v;  // value
  Mat<S> g;  // gradient accumulator
  std::string name;

  Tensor() = default;
  Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
      : v(Mat<S>::Zero(rows, cols)), g(Mat<S>::Zero(rows, cols)),
        name(std::move(n)) {}

  void init_normal(Rng& rng, double std) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        v(i, j) = static_cast<S>(normal(rng) * std);
      }
    }
  }
};

template <typename S>
using ParamList = std::vector<Tensor<S>*>;

template <typename S>
inline void zero_grads(const ParamList<S>& ps) {
  for (Tensor<S>* p : ps) p->g.setZero();
}

// y = W x + b, applied column-wise
template <typename S>
struct Linear {
  Tensor<S> W, b;
  Mat<S> x_;  // cached input

  Linear() = default;
  Linear(const std::string& name, int out, int in)
      : W(name + ".W", out, in), b(name + ".b", out, 1) {}

  void init(Rng& rng, double std) { W.init_normal(rng, std); }

  void collect(ParamList<S>& out) {
    out.push_back(&W);
    out.push_back(&b);
  }

  Mat<S> forward(const Mat<S>& x) {
    x_ = x;
    return (W.v * x).colwise() + Vec<S>(b.v.col(0));
  }
  Mat<S> backward(const Mat<S>& dy) {
    W.g.noalias() += dy * x_.transpose();
    b.g.col(0) += dy.rowwise().sum();
    return W.v.transpose() * dy;
  }
  // stateless apply for incremental decoding
  Mat<S> apply(const Mat<S>& x) const {
    return (W.v * x).colwise() + Vec<S>(b.v.col(0));
  }
};

// per-column normalization over the feature axis
template <typename S>
struct LayerNorm {
  Tensor<S> gamma, beta;
  Mat<S> xhat_;
  Vec<S> inv_std_;
  static constexpr S kEps = S(1e-5);

  LayerNorm() = default;
  explicit LayerNorm(const std::string& name, int d)
      : gamma(name + ".gamma", d, 1), beta(name + ".beta", d, 1) {
    gamma.v.setOnes();
  }

  void collect(ParamList<S>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }

  Mat<S> forward(const Mat<S>& x) {
    const Eigen::Index d = x.rows(), T = x.cols();
    xhat_.resize(d, T);
    inv_std_.resize(T);
    Mat<S> y(d, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      S mean = x.col(t).mean();
      Vec<S> c = x.col(t).array() - mean;
      S var = c.squaredNorm() / S(d);
      S inv = S(1) / std::sqrt(var + kEps);
      inv_std_(t) = inv;
      xhat_.col(t) = c * inv;
      y.col(t) = gamma.v.col(0).cwiseProduct(xhat_.col(t)) + beta.v.col(0);
    }
    return y;
  }
  Mat<S> backward(const Mat<S>& dy) {
    const Eigen::Index d = xhat_.rows(), T = xhat_.cols();
    Mat<S> dx(d, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      Vec<S> dxhat = dy.col(t).cwiseProduct(gamma.v.col(0));
      gamma.g.col(0) += dy.col(t).cwiseProduct(xhat_.col(t));
      beta.g.col(0) += dy.col(t);
      S m1 = dxhat.mean();
      S m2 = dxhat.cwiseProduct(xhat_.col(t)).mean();
      dx.col(t) =
          (dxhat.array() - m1 - xhat_.col(t).array() * m2) * inv_std_(t);
    }
    return dx;
  }
  Mat<S> apply(const Mat<S>& x) const {
    Mat<S> y(x.rows(), x.cols());
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
      S mean = x.col(t).mean();
      Vec<S> c = x.col(t).array() - mean;
      S inv = S(1) / std::sqrt(c.squaredNorm() / S(x.rows()) + kEps);
      y.col(t) = gamma.v.col(0).cwiseProduct(c * inv) + beta.v.col(0);
    }
    return y;
  }
};

// tanh-approximation GELU
template <typename S>
struct Gelu {
  Mat<S> x_;
  static S value(S x) {
    const S k = S(0.7978845608028654);  // sqrt(2/pi)
    return S(0.5) * x * (S(1) + std::tanh(k * (x + S(0.044715) * x * x * x)));
  }
  static S grad(S x) {
    const S k = S(0.7978845608028654);
    S u = k * (x + S(0.044715) * x * x * x);
    S t = std::tanh(u);
    S du = k * (S(1) + S(0.134145) * x * x);
    return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * du;
  }
  Mat<S> forward(const Mat<S>& x) {
    x_ = x;
    return x.unaryExpr(&Gelu::value);
  }
  Mat<S> backward(const Mat<S>& dy) {
    return dy.cwiseProduct(x_.unaryExpr(&Gelu::grad));
  }
  static Mat<S> apply(const Mat<S>& x) { return x.unaryExpr(&Gelu::value); }
};

// inverted dropout; a null rng means eval mode (identity)
template <typename S>
struct Dropout {
  double p = 0;
  Mat<S> mask_;
  bool active_ = false;

  Mat<S> forward(const Mat<S>& x, Rng* rng) {
    active_ = rng != nullptr && p > 0;
    if (!active_) return x;
    S keep = S(1) - S(p);
    mask_.resize(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        mask_(i, j) = uniform01(*rng) < p ? S(0) : S(1) / keep;
      }
    }
    return x.cwiseProduct(mask_);
  }
  Mat<S> backward(const Mat<S>& dy) {
    return active_ ? Mat<S>(dy.cwiseProduct(mask_)) : dy;
  }
};

// softmax over each column, in place
template <typename S>
inline void softmax_cols(Mat<S>& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    S mx = m.col(j).maxCoeff();
    m.col(j) = (m.col(j).array() - mx).exp();
    m.col(j) /= m.col(j).sum();
  }
}

// incremental-decode state: cached keys/values per layer (d x t)
template <typename S>
struct KvCache {
  std::vector<Mat<S>> k, v;
  int len = 0;
};

// multi-head causal self-attention
template <typename S>
struct CausalSelfAttention {
  int d = 0, heads = 0, hd = 0;
  Linear<S> qkv, out;
  Mat<S> q_, k_, v_;               // cached projections (3 x d x T)
  std::vector<Mat<S>> probs_;      // per-head attention (T x T)

  CausalSelfAttention() = default;
  CausalSelfAttention(const std::string& name, int dim, int n_heads)
      : d(dim), heads(n_heads), hd(dim / n_heads),
        qkv(name + ".qkv", 3 * dim, dim), out(name + ".out", dim, dim) {
    if (dim % n_heads != 0) throw std::invalid_argument("heads must divide d");
  }

  void init(Rng& rng, double std) {
    qkv.init(rng, std);
    // residual out-projection starts at zero: the block is the identity
  }
  void collect(ParamList<S>& out_list) {
    qkv.collect(out_list);
    out.collect(out_list);
  }

  Mat<S> forward(const Mat<S>& x) {
    const Eigen::Index T = x.cols();
    Mat<S> proj = qkv.forward(x);
    q_ = proj.topRows(d);
    k_ = proj.middleRows(d, d);
    v_ = proj.bottomRows(d);
    const S scale = S(1) / std::sqrt(S(hd));
    probs_.assign(heads, Mat<S>());
    Mat<S> o(d, T);
    for (int h = 0; h < heads; ++h) {
      auto Q = q_.middleRows(h * hd, hd);
      auto K = k_.middleRows(h * hd, hd);
      auto V = v_.middleRows(h * hd, hd);
      Mat<S> scores = K.transpose() * Q * scale;  // (key, query)
      for (Eigen::Index qi = 0; qi < T; ++qi) {
        for (Eigen::Index ki = qi + 1; ki < T; ++ki) {
          scores(ki, qi) = -std::numeric_limits<S>::infinity();
        }
      }
      softmax_cols(scores);
      probs_[h] = scores;
      o.middleRows(h * hd, hd) = V * scores;
    }
    return out.forward(o);
  }

  Mat<S> backward(const Mat<S>& dy) {
    const Eigen::Index T = dy.cols();
    Mat<S> do_ = out.backward(dy);
    Mat<S> dproj(3 * d, T);
    const S scale = S(1) / std::sqrt(S(hd));
    for (int h = 0; h < heads; ++h) {
      auto Q = q_.middleRows(h * hd, hd);
      auto K = k_.middleRows(h * hd, hd);
      auto V = v_.middleRows(h * hd, hd);
      const Mat<S>& P = probs_[h];
      auto dOh = do_.middleRows(h * hd, hd);
      Mat<S> dP = V.transpose() * dOh;
      Mat<S> dV = dOh * P.transpose();
      // softmax backward per column
      Mat<S> dS(T, T);
      for (Eigen::Index j = 0; j < T; ++j) {
        Vec<S> pj = P.col(j);
        Vec<S> dpj = dP.col(j);
        S dot = pj.dot(dpj);
        dS.col(j) = pj.cwiseProduct((dpj.array() - dot).matrix());
      }
      Mat<S> dQ = K * dS * scale;
      Mat<S> dK = Q * dS.transpose() * scale;
      dproj.middleRows(h * hd, hd) = dQ;
      dproj.middleRows(d + h * hd, hd) = dK;
      dproj.middleRows(2 * d + h * hd, hd) = dV;
    }
    return qkv.backward(dproj);
  }

  // bidirectional variant (no mask); shares caches with backward
  Mat<S> forward_unmasked(const Mat<S>& x) {
    const Eigen::Index T = x.cols();
    Mat<S> proj = qkv.forward(x);
    q_ = proj.topRows(d);
    k_ = proj.middleRows(d, d);
    v_ = proj.bottomRows(d);
    const S scale = S(1) / std::sqrt(S(hd));
    probs_.assign(heads, Mat<S>());
    Mat<S> o(d, T);
    for (int h = 0; h < heads; ++h) {
      auto Q = q_.middleRows(h * hd, hd);
      auto K = k_.middleRows(h * hd, hd);
      auto V = v_.middleRows(h * hd, hd);
      Mat<S> scores = K.transpose() * Q * scale;
      softmax_cols(scores);
      probs_[h] = scores;
      o.middleRows(h * hd, hd) = V * scores;
    }
    return out.forward(o);
  }

  // one-token decode against the cache; appends this token's k/v
  Vec<S> step(const Vec<S>& x, Mat<S>& kcache, Mat<S>& vcache) const {
    Mat<S> proj = qkv.apply(x);
    Vec<S> q = proj.col(0).head(d);
    Vec<S> k = proj.col(0).segment(d, d);
    Vec<S> v = proj.col(0).tail(d);
    Eigen::Index t = kcache.cols();
    kcache.conservativeResize(d, t + 1);
    vcache.conservativeResize(d, t + 1);
    kcache.col(t) = k;
    vcache.col(t) = v;
    const S scale = S(1) / std::sqrt(S(hd));
    Vec<S> o(d);
    for (int h = 0; h < heads; ++h) {
      Vec<S> scores =
          kcache.middleRows(h * hd, hd).transpose() * q.segment(h * hd, hd);
      scores *= scale;
      S mx = scores.maxCoeff();
      scores = (scores.array() - mx).exp();
      scores /= scores.sum();
      o.segment(h * hd, hd) = vcache.middleRows(h * hd, hd) * scores;
    }
    return out.apply(o).col(0);
  }
};

// pre-LN transformer block: x += attn(ln1 x); x += mlp(ln2 x)
template <typename S>
struct Block {
  LayerNorm<S> ln1, ln2;
  CausalSelfAttention<S> attn;
  Linear<S> fc1, fc2;
  Gelu<S> gelu;
  Dropout<S> drop_attn, drop_mlp;

  Block() = default;
  Block(const std::string& name, int d, int heads, double dropout)
      : ln1(name + ".ln1", d), ln2(name + ".ln2", d),
        attn(name + ".attn", d, heads), fc1(name + ".fc1", 4 * d, d),
        fc2(name + ".fc2", d, 4 * d) {
    drop_attn.p = dropout;
    drop_mlp.p = dropout;
  }

  void init(Rng& rng, double std) {
    attn.init(rng, std);
    fc1.init(rng, std);
    // fc2 stays zero for the identity-at-init residual path
  }
  void collect(ParamList<S>& out) {
    ln1.collect(out);
    attn.collect(out);
    ln2.collect(out);
    fc1.collect(out);
    fc2.collect(out);
  }

  Mat<S> forward(const Mat<S>& x, Rng* rng, bool masked = true) {
    Mat<S> a = masked ? attn.forward(ln1.forward(x))
                      : attn.forward_unmasked(ln1.forward(x));
    Mat<S> h = x + drop_attn.forward(a, rng);
    Mat<S> m = fc2.forward(gelu.forward(fc1.forward(ln2.forward(h))));
    return h + drop_mlp.forward(m, rng);
  }
  Mat<S> backward(const Mat<S>& dy) {
    Mat<S> dm = drop_mlp.backward(dy);
    Mat<S> dh =
        dy + ln2.backward(fc1.backward(gelu.backward(fc2.backward(dm))));
    Mat<S> da = drop_attn.backward(dh);
    return dh + ln1.backward(attn.backward(da));
  }

  Vec<S> step(const Vec<S>& x, Mat<S>& kcache, Mat<S>& vcache) const {
    Vec<S> h = x + attn.step(ln1.apply(x), kcache, vcache);
    Mat<S> m = fc2.apply(Gelu<S>::apply(fc1.apply(ln2.apply(h))));
    return h + m.col(0);
  }
};

// id -> column lookup with scatter-add backward
template <typename S>
struct Embedding {
  Tensor<S> table;  // d x vocab
  std::vector<int> ids_;

  Embedding() = default;
  Embedding(const std::string& name, int d, int vocab)
      : table(name, d, vocab) {}

  void init(Rng& rng, double std) { table.init_normal(rng, std); }
  void collect(ParamList<S>& out) { out.push_back(&table); }

  Mat<S> forward(const std::vector<int>& ids) {
    ids_ = ids;
    Mat<S> y(table.v.rows(), (Eigen::Index)ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= table.v.cols()) {
        throw std::out_of_range("embedding id out of range");
      }
      y.col((Eigen::Index)i) = table.v.col(ids[i]);
    }
    return y;
  }
  void backward(const Mat<S>& dy) {
    for (size_t i = 0; i < ids_.size(); ++i) {
      table.g.col(ids_[i]) += dy.col((Eigen::Index)i);
    }
  }
};

// mean cross-entropy over selected columns; returns loss and writes dlogits
template <typename S>
struct CrossEntropy {
  // targets < 0 mark columns excluded from the loss
  static double forward(const Mat<S>& logits, const std::vector<int>& targets,
                        Mat<S>& dlogits) {
    dlogits.setZero(logits.rows(), logits.cols());
    double loss = 0;
    int n = 0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (targets[(size_t)j] < 0) continue;
      ++n;
    }
    if (n == 0) return 0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      int t = targets[(size_t)j];
      if (t < 0) continue;
      Vec<S> col = logits.col(j);
      S mx = col.maxCoeff();
      Vec<S> e = (col.array() - mx).exp();
      S sum = e.sum();
      loss += -std::log(std::max((double)(e(t) / sum), 1e-300));
      dlogits.col(j) = e / sum / S(n);
      dlogits(t, j) -= S(1) / S(n);
    }
    return loss / n;
  }
};

// Adam with global-norm gradient clipping
template <typename S>
class Adam {
 public:
  double lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, clip = 1.0;

  void step(const ParamList<S>& ps) {
    if (slots_.empty()) {
      for (Tensor<S>* p : ps) {
        slots_.push_back({Mat<S>::Zero(p->v.rows(), p->v.cols()),
                          Mat<S>::Zero(p->v.rows(), p->v.cols())});
      }
    }
    double norm2 = 0;
    for (Tensor<S>* p : ps) norm2 += (double)p->g.squaredNorm();
    double scale = 1.0;
    double norm = std::sqrt(norm2);
    if (clip > 0 && norm > clip) scale = clip / norm;
    ++t_;
    double bc1 = 1 - std::pow(beta1, t_);
    double bc2 = 1 - std::pow(beta2, t_);
    for (size_t i = 0; i < ps.size(); ++i) {
      Mat<S> g = ps[i]->g * S(scale);
      Mat<S>& m = slots_[i].m;
      Mat<S>& v = slots_[i].v;
      m = S(beta1) * m + S(1 - beta1) * g;
      v = S(beta2) * v + S(1 - beta2) * g.cwiseProduct(g);
      ps[i]->v -= (S(lr) / S(bc1)) * m.cwiseQuotient(
              ((v / S(bc2)).cwiseSqrt().array() + S(eps)).matrix());
    }
  }

 private:
  struct Slot {
    Mat<S> m, v;
  };
  std::vector<Slot> slots_;
  long t_ = 0;
};

// central-difference check of d loss / d theta on sampled coordinates
template <typename S>
struct GradCheckResult {
  double max_rel_error = 0;
  int checked = 0;
};

template <typename S>
GradCheckResult<S> gradient_check(const ParamList<S>& params,
                                  const std::function<double()>& loss_fn,
                                  const std::function<void()>& backward_fn,
                                  Rng& rng, int coords, double h = 1e-5) {
  zero_grads(params);
  backward_fn();
  GradCheckResult<S> res;
  std::vector<std::pair<int, Eigen::Index>> flat;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    for (Eigen::Index k = 0; k < params[pi]->v.size(); ++k) {
      flat.push_back({(int)pi, k});
    }
  }
  for (int c = 0; c < coords; ++c) {
    auto [pi, k] = flat[uniform_index(rng, flat.size())];
    Tensor<S>* p = params[(size_t)pi];
    S saved = p->v.data()[k];
    double analytic = (double)p->g.data()[k];
    p->v.data()[k] = saved + S(h);
    double lp = loss_fn();
    p->v.data()[k] = saved - S(h);
    double lm = loss_fn();
    p->v.data()[k] = saved;
    double fd = (lp - lm) / (2 * h);
    double rel = std::abs(analytic - fd) /
                 std::max(1e-8, std::abs(analytic) + std::abs(fd));
    res.max_rel_error = std::max(res.max_rel_error, rel);
    ++res.checked;
  }
  return res;
}

}  // namespace sketchlang::nn
