#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sketchlang/types.hpp"

namespace sketchlang {

// Parameter families that share one quantization codebook each.
enum class ParamType { Location, Direction, Range, Radius, Rotation };
constexpr int kParamTypeCount = 5;
const char* to_string(ParamType t);

struct Codebook {
  ParamType type = ParamType::Location;
  std::vector<double> centers;  // sorted ascending, pairwise distinct
  uint64_t seed = 0;
  int requested_k = 0;

  int k() const { return (int)centers.size(); }
  // Nearest center; exact midpoint ties resolve to the lower bin.
  int encode(double v) const;
  double decode(int bin) const;
  double sse(const std::vector<double>& values) const;
};

struct KMeansOptions {
  int k = 256;
  uint64_t seed = 0;
  int n_init = 10;     // independent restarts, best SSE wins
  int max_iters = 200;
  double tol = 1e-9;   // max center movement considered converged
};

// 1-D Lloyd's algorithm with greedy k-means++ seeding. Fewer distinct values
// than k collapses to the distinct values themselves (SSE 0).
Codebook fit_codebook(ParamType type, const std::vector<double>& values,
                      const KMeansOptions& opts);

struct CodebookSet {
  std::array<Codebook, kParamTypeCount> books;
  uint64_t corpus_digest = 0;

  const Codebook& of(ParamType t) const { return books[(int)t]; }
  Codebook& of(ParamType t) { return books[(int)t]; }
  uint64_t digest() const;  // over all centers, for checkpoint compatibility
};

// Values a parameter family draws from a corpus:
//   location: x,y of every primitive     direction: u,v of curves
//   range: a,b of lines and arcs         radius: r of circles and arcs
//   rotation: winding flags (codebook is pinned to {-1,+1} regardless)
std::vector<double> collect_values(const std::vector<Sketch>& corpus,
                                   ParamType type);

CodebookSet fit_codebooks(const std::vector<Sketch>& corpus,
                          const KMeansOptions& opts);

// Parameter family of each parameter slot of a primitive kind, in layout order.
std::vector<ParamType> param_types_of(PrimKind k);

// encode-then-decode every parameter (the winding flag snaps to +/-1).
Sketch quantize_sketch(const Sketch& s, const CodebookSet& cb);

}  // namespace sketchlang
