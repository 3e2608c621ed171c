#include "sketchlang/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "sketchlang/util.hpp"

namespace sketchlang {

const char* to_string(ParamType t) {
  switch (t) {
    case ParamType::Location: return "location";
    case ParamType::Direction: return "direction";
    case ParamType::Range: return "range";
    case ParamType::Radius: return "radius";
    case ParamType::Rotation: return "rotation";
  }
  return "?";
}

int Codebook::encode(double v) const {
  if (centers.empty()) throw std::logic_error("encode on empty codebook");
  // bin boundaries are center midpoints; lower_bound puts exact midpoints
  // into the lower bin
  int lo = 0, hi = (int)centers.size() - 1;
  while (lo < hi) {
    int mid = (lo + hi) / 2;
    double boundary = 0.5 * (centers[mid] + centers[mid + 1]);
    if (v <= boundary) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

double Codebook::decode(int bin) const {
  if (bin < 0 || bin >= (int)centers.size()) {
    throw std::out_of_range("codebook bin " + std::to_string(bin));
  }
  return centers[bin];
}

double Codebook::sse(const std::vector<double>& values) const {
  double total = 0;
  for (double v : values) {
    double d = v - centers[encode(v)];
    total += d * d;
  }
  return total;
}

namespace {

struct WeightedPoints {
  std::vector<double> x;  // sorted distinct values
  std::vector<double> w;  // multiplicities
};

WeightedPoints dedupe(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  WeightedPoints p;
  for (double v : values) {
    if (!p.x.empty() && v == p.x.back()) {
      p.w.back() += 1;
    } else {
      p.x.push_back(v);
      p.w.push_back(1);
    }
  }
  return p;
}

// contiguous assignment of sorted points to sorted centers
void assign(const WeightedPoints& p, const std::vector<double>& c,
            std::vector<int>& bin) {
  bin.resize(p.x.size());
  size_t j = 0;
  for (size_t i = 0; i < p.x.size(); ++i) {
    while (j + 1 < c.size() && p.x[i] > 0.5 * (c[j] + c[j + 1])) ++j;
    bin[i] = (int)j;
  }
}

double potential(const WeightedPoints& p, const std::vector<double>& c,
                 const std::vector<int>& bin) {
  double s = 0;
  for (size_t i = 0; i < p.x.size(); ++i) {
    double d = p.x[i] - c[bin[i]];
    s += p.w[i] * d * d;
  }
  return s;
}

// greedy k-means++: several candidates per step, keep the one that lowers
// the potential most
std::vector<double> seed_centers(const WeightedPoints& p, int k, Rng& rng) {
  size_t m = p.x.size();
  std::vector<double> centers;
  centers.reserve(k);
  std::vector<double> d2(m);  // weighted squared distance to nearest center
  int trials = 2 + (int)std::log((double)k);

  size_t first = uniform_index(rng, m);
  centers.push_back(p.x[first]);
  for (size_t i = 0; i < m; ++i) {
    double d = p.x[i] - centers[0];
    d2[i] = p.w[i] * d * d;
  }
  while ((int)centers.size() < k) {
    double best_pot = -1;
    double best_center = 0;
    for (int t = 0; t < trials; ++t) {
      size_t cand = (size_t)sample_weighted(rng, d2);
      double pot = 0;
      for (size_t i = 0; i < m; ++i) {
        double d = p.x[i] - p.x[cand];
        pot += std::min(d2[i], p.w[i] * d * d);
      }
      if (best_pot < 0 || pot < best_pot) {
        best_pot = pot;
        best_center = p.x[cand];
      }
    }
    centers.push_back(best_center);
    for (size_t i = 0; i < m; ++i) {
      double d = p.x[i] - best_center;
      d2[i] = std::min(d2[i], p.w[i] * d * d);
    }
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

double lloyd(const WeightedPoints& p, std::vector<double>& c,
             const KMeansOptions& opts) {
  std::vector<int> bin;
  std::vector<double> sum(c.size()), wsum(c.size());
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    assign(p, c, bin);
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(wsum.begin(), wsum.end(), 0.0);
    for (size_t i = 0; i < p.x.size(); ++i) {
      sum[bin[i]] += p.w[i] * p.x[i];
      wsum[bin[i]] += p.w[i];
    }
    double shift = 0;
    for (size_t j = 0; j < c.size(); ++j) {
      if (wsum[j] == 0) {
        // re-seed an empty cluster at the worst-served point
        size_t worst = 0;
        double worst_d = -1;
        for (size_t i = 0; i < p.x.size(); ++i) {
          double d = p.x[i] - c[bin[i]];
          double wd = p.w[i] * d * d;
          if (wd > worst_d) {
            worst_d = wd;
            worst = i;
          }
        }
        shift = std::max(shift, std::abs(c[j] - p.x[worst]));
        c[j] = p.x[worst];
        continue;
      }
      double next = sum[j] / wsum[j];
      shift = std::max(shift, std::abs(c[j] - next));
      c[j] = next;
    }
    std::sort(c.begin(), c.end());
    if (shift < opts.tol) break;
  }
  assign(p, c, bin);
  return potential(p, c, bin);
}

}  // namespace

Codebook fit_codebook(ParamType type, const std::vector<double>& values,
                      const KMeansOptions& opts) {
  Codebook cb;
  cb.type = type;
  cb.seed = opts.seed;
  cb.requested_k = opts.k;
  if (values.empty()) {
    cb.centers = {0.0};
    return cb;
  }
  WeightedPoints p = dedupe(values);
  if ((int)p.x.size() <= opts.k) {
    cb.centers = p.x;  // every distinct value its own bin, SSE 0
    return cb;
  }
  double best_sse = -1;
  std::vector<double> best;
  for (int restart = 0; restart < opts.n_init; ++restart) {
    uint64_t mix[2] = {opts.seed, (uint64_t)restart};
    Rng rng(fnv1a64(mix, sizeof mix));
    std::vector<double> c = seed_centers(p, opts.k, rng);
    double sse = lloyd(p, c, opts);
    if (best_sse < 0 || sse < best_sse) {
      best_sse = sse;
      best = c;
    }
  }
  best.erase(std::unique(best.begin(), best.end()), best.end());
  cb.centers = best;
  return cb;
}

std::vector<double> collect_values(const std::vector<Sketch>& corpus,
                                   ParamType type) {
  std::vector<double> out;
  for (const Sketch& s : corpus) {
    for (const Primitive& p : s.primitives) {
      switch (type) {
        case ParamType::Location:
          out.push_back(p.params[0]);
          out.push_back(p.params[1]);
          break;
        case ParamType::Direction:
          if (p.kind != PrimKind::Point) {
            out.push_back(p.params[2]);
            out.push_back(p.params[3]);
          }
          break;
        case ParamType::Range:
          if (p.kind == PrimKind::Line || p.kind == PrimKind::Arc) {
            out.push_back(range_a(p));
            out.push_back(range_b(p));
          }
          break;
        case ParamType::Radius:
          if (p.kind == PrimKind::Circle || p.kind == PrimKind::Arc) {
            out.push_back(radius(p));
          }
          break;
        case ParamType::Rotation:
          if (p.kind == PrimKind::Circle || p.kind == PrimKind::Arc) {
            out.push_back(winding(p));
          }
          break;
      }
    }
  }
  return out;
}

CodebookSet fit_codebooks(const std::vector<Sketch>& corpus,
                          const KMeansOptions& opts) {
  CodebookSet set;
  for (int t = 0; t < kParamTypeCount; ++t) {
    ParamType type = (ParamType)t;
    if (type == ParamType::Rotation) {
      Codebook cb;
      cb.type = type;
      cb.seed = opts.seed;
      cb.requested_k = 2;
      cb.centers = {-1.0, 1.0};  // winding flag is categorical by construction
      set.books[t] = cb;
      continue;
    }
    set.books[t] = fit_codebook(type, collect_values(corpus, type), opts);
  }
  set.corpus_digest = corpus_digest(corpus);
  return set;
}

uint64_t CodebookSet::digest() const {
  uint64_t h = kFnvOffset;
  for (const Codebook& cb : books) {
    h = digest_doubles(cb.centers.data(), cb.centers.size(), h);
  }
  return h;
}

std::vector<ParamType> param_types_of(PrimKind k) {
  using PT = ParamType;
  switch (k) {
    case PrimKind::Point: return {PT::Location, PT::Location};
    case PrimKind::Line:
      return {PT::Location, PT::Location, PT::Direction, PT::Direction,
              PT::Range, PT::Range};
    case PrimKind::Circle:
      return {PT::Location, PT::Location, PT::Direction, PT::Direction,
              PT::Radius, PT::Rotation};
    case PrimKind::Arc:
      return {PT::Location, PT::Location, PT::Direction, PT::Direction,
              PT::Radius, PT::Rotation, PT::Range, PT::Range};
  }
  return {};
}

Sketch quantize_sketch(const Sketch& s, const CodebookSet& cb) {
  Sketch out = s;
  for (Primitive& p : out.primitives) {
    std::vector<ParamType> types = param_types_of(p.kind);
    for (size_t i = 0; i < types.size(); ++i) {
      const Codebook& book = cb.of(types[i]);
      p.params[i] = book.decode(book.encode(p.params[i]));
    }
  }
  return out;
}

}  // namespace sketchlang
