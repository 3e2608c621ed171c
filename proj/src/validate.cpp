#include <cmath>

#include "sketchlang/types.hpp"

namespace sketchlang {

namespace {

bool is_curve(PrimKind k) { return k != PrimKind::Point; }
bool is_round(PrimKind k) {
  return k == PrimKind::Circle || k == PrimKind::Arc;
}

void check_primitive(const Primitive& p, int idx, std::vector<Violation>& out) {
  if ((int)p.params.size() != param_count(p.kind)) {
    out.push_back({Violation::Code::BadParamCount,
                   std::string(to_string(p.kind)) + " primitive has " +
                       std::to_string(p.params.size()) + " params",
                   idx, -1});
    return;  // later checks index into params
  }
  for (double v : p.params) {
    if (!std::isfinite(v)) {
      out.push_back({Violation::Code::NonFiniteParam, "non-finite parameter",
                     idx, -1});
      return;
    }
  }
  if (is_curve(p.kind)) {
    // quantizing u,v separately perturbs the norm; only flag real corruption
    double n = direction(p).norm();
    if (std::abs(n - 1.0) > 0.25) {
      out.push_back({Violation::Code::NonUnitDirection,
                     "direction norm " + std::to_string(n), idx, -1});
    }
  }
  if (is_round(p.kind)) {
    if (!(radius(p) > 0)) {
      out.push_back({Violation::Code::NonPositiveRadius,
                     "radius " + std::to_string(radius(p)), idx, -1});
    }
    double w = winding(p);
    if (std::abs(std::abs(w) - 1.0) > 1e-9) {
      out.push_back({Violation::Code::BadWinding,
                     "winding flag " + std::to_string(w), idx, -1});
    }
  }
  if (p.kind == PrimKind::Line || p.kind == PrimKind::Arc) {
    if (!(range_a(p) < range_b(p))) {
      out.push_back({Violation::Code::EmptyRange,
                     "interval [" + std::to_string(range_a(p)) + ", " +
                         std::to_string(range_b(p)) + "]",
                     idx, -1});
    }
  }
}

void check_constraint(const Constraint& c, int idx, const Sketch& s,
                      std::vector<Violation>& out) {
  if (c.targets.size() != 2) {
    out.push_back({Violation::Code::BadTargetCount,
                   std::to_string(c.targets.size()) + " targets", -1, idx});
    return;
  }
  for (const ConstraintTarget& t : c.targets) {
    if (t.prim < 0 || t.prim >= (int)s.primitives.size()) {
      out.push_back({Violation::Code::DanglingRef,
                     "target index " + std::to_string(t.prim), -1, idx});
      return;
    }
  }
  int subs = subref_slots(c.kind);
  for (int i = 0; i < subs; ++i) {
    const ConstraintTarget& t = c.targets[i];
    if (!subref_legal(s.primitives[t.prim].kind, t.sub)) {
      out.push_back({Violation::Code::IllegalSubRef,
                     std::string(to_string(t.sub)) + " of a " +
                         to_string(s.primitives[t.prim].kind),
                     -1, idx});
    }
  }
  PrimKind k0 = s.primitives[c.targets[0].prim].kind;
  PrimKind k1 = s.primitives[c.targets[1].prim].kind;
  bool ok = true;
  switch (c.kind) {
    case ConstrKind::Coincident:
    case ConstrKind::Horizontal:
    case ConstrKind::Vertical:
      break;  // any sub-referencable pair
    case ConstrKind::Parallel:
    case ConstrKind::Perpendicular:
      ok = k0 == PrimKind::Line && k1 == PrimKind::Line;
      break;
    case ConstrKind::Midpoint:
      ok = k1 == PrimKind::Line;
      break;
    case ConstrKind::Equal:
      ok = (k0 == PrimKind::Line && k1 == PrimKind::Line) ||
           (is_round(k0) && is_round(k1));
      break;
    case ConstrKind::Tangent:
      ok = (is_round(k0) || is_round(k1)) && k0 != PrimKind::Point &&
           k1 != PrimKind::Point;
      break;
  }
  if (!ok) {
    out.push_back({Violation::Code::KindMismatch,
                   std::string(to_string(c.kind)) + " between " +
                       to_string(k0) + " and " + to_string(k1),
                   -1, idx});
  }
}

}  // namespace

std::vector<Violation> validate(const Sketch& s) {
  std::vector<Violation> out;
  for (size_t i = 0; i < s.primitives.size(); ++i) {
    check_primitive(s.primitives[i], (int)i, out);
  }
  for (size_t i = 0; i < s.constraints.size(); ++i) {
    check_constraint(s.constraints[i], (int)i, s, out);
  }
  return out;
}

}  // namespace sketchlang
