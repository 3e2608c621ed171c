#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sketchlang/prim_model.hpp"
#include "sketchlang/types.hpp"
#include "sketchlang/util.hpp"
#include "sketchlang/vocab.hpp"

namespace sketchlang {

// Normalized histogram over a min-max rescaled domain. `n` is the number of
// raw values binned; mass sums to 1 whenever n > 0.
struct Histogram {
  std::vector<double> mass;
  double lo = 0.0, hi = 1.0;  // raw-domain bounds used for rescaling
  long n = 0;
};

// Values outside [lo, hi] clamp to the edge bins; a degenerate domain
// (hi <= lo) puts everything in bin 0.
Histogram make_histogram(const std::vector<double>& values, double lo,
                         double hi, int bins);

// 1-D Wasserstein-1 on the rescaled [0,1] domain: sum |CDF1 - CDF2| / bins.
// Throws std::invalid_argument unless both histograms share bin count and
// raw-domain bounds.
double emd(const Histogram& a, const Histogram& b);

struct Statistic {
  std::string name;
  Histogram hist;
};

struct StatisticGroup {
  std::string name;
  std::vector<Statistic> stats;
};

struct SketchStats {
  std::vector<StatisticGroup> prim_groups;    // cardinality, position, size
  std::vector<StatisticGroup> constr_groups;  // cardinality + pair diffs
  int bins = 64;
};

// Histograms of `corpus`, with every domain min-max normalized using bounds
// taken from `reference` so outliers in the measured corpus cannot rescale
// the comparison. Pass the same corpus twice for reference statistics.
// Throws std::invalid_argument on an empty corpus.
SketchStats collect_stats(const std::vector<Sketch>& corpus,
                          const std::vector<Sketch>& reference, int bins = 64);

struct EStatResult {
  double p = 0.0;
  double c = 0.0;
  double total = 0.0;  // p + c
};

// Mean EMD within each group, then mean across groups, per section.
// Statistics empty on either side are skipped (their absence already shows up
// in the cardinality group); a fully empty group drops out of the cross-group
// mean. Throws std::invalid_argument when group structure disagrees.
EStatResult e_stat(const SketchStats& generated, const SketchStats& reference);

struct SyntaxReport {
  double e_syntax = 0.0;      // percent: interventions over forced positions
  double e_syntax_seq = 0.0;  // percent of samples invalid without forcing
  int samples = 0;
  int skipped = 0;  // samples that derailed before any forced position
};

// Draws unmasked samples: body tokens are kept raw (an illegal one derails
// the sample), lambda/omega are forced with intervention accounting.
template <typename S>
SyntaxReport measure_syntax(PrimModel<S>& model, int samples, double nucleus_p,
                            int max_len, Rng& rng);

struct NllReport {
  double bits_per_sketch = 0.0;
  double bits_per_primitive = 0.0;
  double bits_per_constraint = 0.0;
  double bits_per_token = 0.0;
  long clamped = 0;  // ground-truth tokens floored at probability 1e-12
  int sketches = 0;
  int with_constraints = 0;  // sketches entering the per-constraint mean
};

// Per-sketch bits from the model, averaged over the dataset. The leading
// lambda is given, not predicted, so it contributes no bits.
template <typename S>
NllReport nll_report(PrimModel<S>& model,
                     const std::vector<TokenSequence>& data);

// Remaining degrees of freedom per sketch, binned over the corpus min-max.
Histogram dof_histogram(const std::vector<Sketch>& corpus, int bins = 64);

// Coincident constraints for every anchor pair on distinct primitives within
// eps (closed threshold). Anchors: points, line endpoints, arc endpoints.
std::vector<Constraint> snapping_baseline(
    const std::vector<Primitive>& primitives, double eps);

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int matched = 0;
};

// Set overlap under semantic equality: symmetric kinds compare with unordered
// targets, midpoint keeps its orientation. Empty-vs-empty scores 1.
F1Result constraint_set_f1(const std::vector<Constraint>& predicted,
                           const std::vector<Constraint>& truth);

struct MetricReport {
  std::optional<NllReport> nll;
  std::optional<SyntaxReport> syntax;
  std::optional<EStatResult> estat;
  std::optional<double> accuracy;  // teacher-forced pointer accuracy, percent
  std::optional<Histogram> dof;
  int samples = 0;
  double nucleus_p = 0.0;
  int bins = 64;
};

}  // namespace sketchlang
