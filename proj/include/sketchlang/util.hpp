#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sketchlang {

using Rng = std::mt19937_64;

// All sampling is hand-rolled on top of the raw engine: std:: distributions
// are not bit-stable across standard libraries.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline uint64_t uniform_index(Rng& rng, uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n == 0");
  uint64_t max = std::numeric_limits<uint64_t>::max();
  uint64_t limit = max - max % n;
  uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double normal(Rng& rng) {
  // Box-Muller; one value per draw keeps call sites order-deterministic.
  double u1 = 1.0 - uniform01(rng);  // (0, 1]
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Index draw proportional to non-negative weights.
inline int sample_weighted(Rng& rng, const std::vector<double>& w) {
  double total = 0;
  for (double x : w) total += x;
  if (!(total > 0)) throw std::invalid_argument("sample_weighted: zero mass");
  double u = uniform01(rng) * total;
  double cum = 0;
  int last_positive = -1;
  for (size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0) last_positive = (int)i;
    cum += w[i];
    if (u < cum && w[i] > 0) return (int)i;
  }
  return last_positive;
}

// Smallest-prefix nucleus sampling: keep the fewest highest-probability
// entries whose mass reaches p, renormalize, then walk by u in [0,1).
// probs must sum to 1.
inline int nucleus_sample(const std::vector<double>& probs, double p,
                          double u) {
  std::vector<int> order(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) order[i] = (int)i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs[a] > probs[b]; });
  double mass = 0;
  size_t cut = 0;
  for (; cut < order.size(); ++cut) {
    mass += probs[order[cut]];
    if (mass >= p - 1e-12) {
      ++cut;
      break;
    }
  }
  if (cut == 0) cut = 1;
  double acc = 0;
  for (size_t i = 0; i < cut; ++i) {
    acc += probs[order[i]] / mass;
    if (u < acc) return order[i];
  }
  return order[cut - 1];
}

template <class T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

constexpr uint64_t kFnvOffset = 14695981039346656037ull;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = kFnvOffset) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), h);
}

inline uint64_t digest_doubles(const double* v, size_t n,
                               uint64_t h = kFnvOffset) {
  for (size_t i = 0; i < n; ++i) {
    uint64_t bits;
    std::memcpy(&bits, &v[i], sizeof bits);
    h = fnv1a64(&bits, sizeof bits, h);
  }
  return h;
}

// Bit-exact textual round-trip for doubles.
inline std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hexfloat(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin) throw std::invalid_argument("parse_hexfloat: '" + s + "'");
  return v;
}

inline std::string hex_u64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

}  // namespace sketchlang
