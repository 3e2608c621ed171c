#include "sketchlang/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "sketchlang/grammar.hpp"
#include "sketchlang/solver.hpp"

namespace sketchlang {

Histogram make_histogram(const std::vector<double>& values, double lo,
                         double hi, int bins) {
  if (bins <= 0) throw std::invalid_argument("make_histogram: bins <= 0");
  Histogram h;
  h.mass.assign((size_t)bins, 0.0);
  h.lo = lo;
  h.hi = hi;
  h.n = (long)values.size();
  if (values.empty()) return h;
  double span = hi - lo;
  for (double v : values) {
    int b = span > 0 ? (int)std::floor((v - lo) / span * bins) : 0;
    h.mass[(size_t)std::clamp(b, 0, bins - 1)] += 1.0;
  }
  for (double& m : h.mass) m /= (double)values.size();
  return h;
}

double emd(const Histogram& a, const Histogram& b) {
  if (a.mass.size() != b.mass.size() || a.mass.empty())
    throw std::invalid_argument("emd: binning mismatch");
  if (a.lo != b.lo || a.hi != b.hi)
    throw std::invalid_argument("emd: domain bounds mismatch");
  double cdf_a = 0, cdf_b = 0, d = 0;
  for (size_t i = 0; i < a.mass.size(); ++i) {
    cdf_a += a.mass[i];
    cdf_b += b.mass[i];
    d += std::abs(cdf_a - cdf_b);
  }
  return d / (double)a.mass.size();
}

namespace {

constexpr int kPairStats = 5;  // tangent, perpendicular, horizontal,
                               // vertical, coincident

// Flat value lists in a fixed order shared by bound computation and binning.
struct RawStats {
  std::array<std::vector<double>, kPrimKindCount> card;
  std::array<std::vector<double>, 2 * kPrimKindCount> pos;  // x then y
  std::array<std::vector<double>, 3> size;  // line len, arc len, circle r
  std::array<std::vector<double>, kConstrKindCount> ccard;
  std::array<std::vector<double>, kPairStats> pair;
};

int pair_slot(ConstrKind k) {
  switch (k) {
    case ConstrKind::Tangent: return 0;
    case ConstrKind::Perpendicular: return 1;
    case ConstrKind::Horizontal: return 2;
    case ConstrKind::Vertical: return 3;
    case ConstrKind::Coincident: return 4;
    default: return -1;
  }
}

bool circular(PrimKind k) {
  return k == PrimKind::Circle || k == PrimKind::Arc;
}

RawStats gather(const std::vector<Sketch>& corpus) {
  RawStats r;
  for (const Sketch& s : corpus) {
    std::array<int, kPrimKindCount> np{};
    for (const Primitive& p : s.primitives) {
      int k = (int)p.kind;
      ++np[(size_t)k];
      r.pos[(size_t)k].push_back(p.params[0]);
      r.pos[(size_t)(k + kPrimKindCount)].push_back(p.params[1]);
      if (p.kind == PrimKind::Line) r.size[0].push_back(line_length(p));
      if (p.kind == PrimKind::Arc) r.size[1].push_back(curve_length(p));
      if (p.kind == PrimKind::Circle) r.size[2].push_back(radius(p));
    }
    for (int k = 0; k < kPrimKindCount; ++k)
      r.card[(size_t)k].push_back((double)np[(size_t)k]);

    std::array<int, kConstrKindCount> nc{};
    for (const Constraint& c : s.constraints) {
      ++nc[(size_t)c.kind];
      int slot = pair_slot(c.kind);
      if (slot < 0 || c.targets[0].prim == c.targets[1].prim) continue;
      const Primitive& a = s.primitives[(size_t)c.targets[0].prim];
      const Primitive& b = s.primitives[(size_t)c.targets[1].prim];
      if (c.kind == ConstrKind::Tangent) {
        if (circular(a.kind) && circular(b.kind))
          r.pair[(size_t)slot].push_back(std::abs(radius(a) - radius(b)));
      } else if (a.kind == PrimKind::Line && b.kind == PrimKind::Line) {
        r.pair[(size_t)slot].push_back(
            std::abs(line_length(a) - line_length(b)));
      }
    }
    for (int k = 0; k < kConstrKindCount; ++k)
      r.ccard[(size_t)k].push_back((double)nc[(size_t)k]);
  }
  return r;
}

std::pair<double, double> bounds_of(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 1.0};
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

Statistic stat_of(const std::string& name, const std::vector<double>& values,
                  const std::vector<double>& reference, int bins) {
  auto [lo, hi] = bounds_of(reference);
  return {name, make_histogram(values, lo, hi, bins)};
}

}  // namespace

SketchStats collect_stats(const std::vector<Sketch>& corpus,
                          const std::vector<Sketch>& reference, int bins) {
  if (corpus.empty() || reference.empty())
    throw std::invalid_argument("collect_stats: empty corpus");
  RawStats c = gather(corpus);
  RawStats ref = gather(reference);
  SketchStats out;
  out.bins = bins;

  StatisticGroup card{"cardinality", {}};
  for (int k = 0; k < kPrimKindCount; ++k)
    card.stats.push_back(stat_of(to_string((PrimKind)k), c.card[(size_t)k],
                                 ref.card[(size_t)k], bins));
  StatisticGroup pos{"position", {}};
  for (int k = 0; k < kPrimKindCount; ++k) {
    std::string base = to_string((PrimKind)k);
    pos.stats.push_back(
        stat_of(base + "_x", c.pos[(size_t)k], ref.pos[(size_t)k], bins));
    pos.stats.push_back(stat_of(base + "_y", c.pos[(size_t)(k + kPrimKindCount)],
                                ref.pos[(size_t)(k + kPrimKindCount)], bins));
  }
  StatisticGroup size{"size", {}};
  const char* size_names[3] = {"line_length", "arc_length", "circle_radius"};
  for (int i = 0; i < 3; ++i)
    size.stats.push_back(
        stat_of(size_names[i], c.size[(size_t)i], ref.size[(size_t)i], bins));
  out.prim_groups = {std::move(card), std::move(pos), std::move(size)};

  StatisticGroup ccard{"cardinality", {}};
  for (int k = 0; k < kConstrKindCount; ++k)
    ccard.stats.push_back(stat_of(to_string((ConstrKind)k), c.ccard[(size_t)k],
                                  ref.ccard[(size_t)k], bins));
  out.constr_groups.push_back(std::move(ccard));
  const char* pair_names[kPairStats] = {"tangent", "perpendicular",
                                        "horizontal", "vertical", "coincident"};
  for (int i = 0; i < kPairStats; ++i) {
    StatisticGroup g{pair_names[i], {}};
    g.stats.push_back(stat_of("abs_diff", c.pair[(size_t)i],
                              ref.pair[(size_t)i], bins));
    out.constr_groups.push_back(std::move(g));
  }
  return out;
}

namespace {

double section_error(const std::vector<StatisticGroup>& gen,
                     const std::vector<StatisticGroup>& ref) {
  if (gen.size() != ref.size())
    throw std::invalid_argument("e_stat: group structure mismatch");
  double total = 0;
  int groups = 0;
  for (size_t g = 0; g < gen.size(); ++g) {
    if (gen[g].name != ref[g].name ||
        gen[g].stats.size() != ref[g].stats.size())
      throw std::invalid_argument("e_stat: group structure mismatch");
    double sum = 0;
    int used = 0;
    for (size_t i = 0; i < gen[g].stats.size(); ++i) {
      const Statistic& a = gen[g].stats[i];
      const Statistic& b = ref[g].stats[i];
      if (a.name != b.name)
        throw std::invalid_argument("e_stat: statistic mismatch");
      if (a.hist.n == 0 || b.hist.n == 0) continue;
      sum += emd(a.hist, b.hist);
      ++used;
    }
    if (used == 0) continue;
    total += sum / used;
    ++groups;
  }
  return groups ? total / groups : 0.0;
}

}  // namespace

EStatResult e_stat(const SketchStats& generated, const SketchStats& reference) {
  if (generated.bins != reference.bins)
    throw std::invalid_argument("e_stat: bin count mismatch");
  EStatResult r;
  r.p = section_error(generated.prim_groups, reference.prim_groups);
  r.c = section_error(generated.constr_groups, reference.constr_groups);
  r.total = r.p + r.c;
  return r;
}

template <typename S>
SyntaxReport measure_syntax(PrimModel<S>& model, int samples, double nucleus_p,
                            int max_len, Rng& rng) {
  SyntaxReport rep;
  rep.samples = samples;
  double ratio_sum = 0;
  int ratio_n = 0, invalid = 0;
  for (int i = 0; i < samples; ++i) {
    auto res = model.sample(nucleus_p, max_len, rng, /*masked=*/false);
    if (res.boundary_positions > 0) {
      ratio_sum += 100.0 * res.interventions / res.boundary_positions;
      ++ratio_n;
    } else {
      ++rep.skipped;
    }
    // the unforced sequence would fail validation if anything was corrected,
    // it derailed, or it never terminated
    if (res.interventions > 0 || res.derailed || res.truncated) ++invalid;
  }
  rep.e_syntax = ratio_n ? ratio_sum / ratio_n : 0.0;
  rep.e_syntax_seq = samples ? 100.0 * invalid / samples : 0.0;
  return rep;
}

template <typename S>
NllReport nll_report(PrimModel<S>& model,
                     const std::vector<TokenSequence>& data) {
  if (data.empty()) throw std::invalid_argument("nll_report: empty dataset");
  const VocabLayout& v = model.vocab();
  NllReport rep;
  double per_sketch = 0, per_prim = 0, per_constr = 0, per_tok = 0;
  for (const TokenSequence& seq : data) {
    auto bd = model.sequence_bits(seq);
    rep.clamped += bd.clamped;
    // bits[t] prices token q[t+1]; the primitive section is q[0, n_p)
    double prim_bits = 0, total = 0;
    for (size_t t = 0; t < bd.bits.size(); ++t) {
      total += bd.bits[t];
      if ((int)t + 1 < seq.n_p) prim_bits += bd.bits[t];
    }
    int prims = 0, constrs = 0;
    for (int i = 0; i < seq.n_p; ++i)
      prims += v.role(seq.q[(size_t)i]) == TokenRole::PrimType;
    for (int i = seq.n_p; i < seq.size(); ++i)
      constrs += v.role(seq.q[(size_t)i]) == TokenRole::ConstrType;
    per_sketch += total;
    per_prim += prim_bits / prims;
    per_tok += total / (double)bd.bits.size();
    if (constrs > 0) {
      per_constr += (total - prim_bits) / constrs;
      ++rep.with_constraints;
    }
    ++rep.sketches;
  }
  rep.bits_per_sketch = per_sketch / rep.sketches;
  rep.bits_per_primitive = per_prim / rep.sketches;
  rep.bits_per_token = per_tok / rep.sketches;
  rep.bits_per_constraint =
      rep.with_constraints ? per_constr / rep.with_constraints : 0.0;
  return rep;
}

Histogram dof_histogram(const std::vector<Sketch>& corpus, int bins) {
  if (corpus.empty()) throw std::invalid_argument("dof_histogram: empty corpus");
  std::vector<double> dof;
  dof.reserve(corpus.size());
  for (const Sketch& s : corpus) dof.push_back((double)degrees_of_freedom(s));
  auto [lo, hi] = std::minmax_element(dof.begin(), dof.end());
  return make_histogram(dof, *lo, *hi, bins);
}

std::vector<Constraint> snapping_baseline(
    const std::vector<Primitive>& primitives, double eps) {
  struct Anchor {
    int prim;
    SubRef sub;
    Vec2 at;
  };
  std::vector<Anchor> anchors;
  for (int i = 0; i < (int)primitives.size(); ++i) {
    const Primitive& p = primitives[(size_t)i];
    switch (p.kind) {
      case PrimKind::Point:
        anchors.push_back({i, SubRef::Whole, location(p)});
        break;
      case PrimKind::Line:
      case PrimKind::Arc:
        anchors.push_back({i, SubRef::Start, start_point(p)});
        anchors.push_back({i, SubRef::End, end_point(p)});
        break;
      case PrimKind::Circle:
        break;  // no point-like anchor
    }
  }
  std::vector<Constraint> out;
  for (size_t a = 0; a < anchors.size(); ++a)
    for (size_t b = a + 1; b < anchors.size(); ++b) {
      if (anchors[a].prim == anchors[b].prim) continue;
      if ((anchors[a].at - anchors[b].at).norm() <= eps)
        out.push_back(make_coincident(anchors[a].prim, anchors[a].sub,
                                      anchors[b].prim, anchors[b].sub));
    }
  return out;
}

namespace {

// Orientation-free key for symmetric kinds; midpoint keeps target order.
std::tuple<int, int, int, int, int> constraint_key(const Constraint& c) {
  int p0 = c.targets[0].prim, s0 = (int)c.targets[0].sub;
  int p1 = c.targets[1].prim, s1 = (int)c.targets[1].sub;
  if (c.kind != ConstrKind::Midpoint &&
      std::tie(p0, s0) > std::tie(p1, s1)) {
    std::swap(p0, p1);
    std::swap(s0, s1);
  }
  return {(int)c.kind, p0, s0, p1, s1};
}

}  // namespace

F1Result constraint_set_f1(const std::vector<Constraint>& predicted,
                           const std::vector<Constraint>& truth) {
  F1Result r;
  if (predicted.empty() && truth.empty()) {
    r.precision = r.recall = r.f1 = 1.0;
    return r;
  }
  std::map<std::tuple<int, int, int, int, int>, int> want;
  for (const Constraint& c : truth) ++want[constraint_key(c)];
  for (const Constraint& c : predicted) {
    auto it = want.find(constraint_key(c));
    if (it != want.end() && it->second > 0) {
      --it->second;
      ++r.matched;
    }
  }
  r.precision = predicted.empty() ? 0.0 : (double)r.matched / predicted.size();
  r.recall = truth.empty() ? 0.0 : (double)r.matched / truth.size();
  r.f1 = (r.precision + r.recall) > 0
             ? 2 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

template SyntaxReport measure_syntax<float>(PrimModel<float>&, int, double,
                                            int, Rng&);
template SyntaxReport measure_syntax<double>(PrimModel<double>&, int, double,
                                             int, Rng&);
template NllReport nll_report<float>(PrimModel<float>&,
                                     const std::vector<TokenSequence>&);
template NllReport nll_report<double>(PrimModel<double>&,
                                      const std::vector<TokenSequence>&);

}  // namespace sketchlang
