#include "sketchlang/types.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "sketchlang/util.hpp"

namespace sketchlang {

const char* to_string(PrimKind k) {
  switch (k) {
    case PrimKind::Point: return "point";
    case PrimKind::Line: return "line";
    case PrimKind::Circle: return "circle";
    case PrimKind::Arc: return "arc";
  }
  return "?";
}

const char* to_string(SubRef s) {
  switch (s) {
    case SubRef::Start: return "start";
    case SubRef::End: return "end";
    case SubRef::Center: return "center";
    case SubRef::Whole: return "whole";
  }
  return "?";
}

const char* to_string(ConstrKind k) {
  switch (k) {
    case ConstrKind::Coincident: return "coincident";
    case ConstrKind::Horizontal: return "horizontal";
    case ConstrKind::Vertical: return "vertical";
    case ConstrKind::Parallel: return "parallel";
    case ConstrKind::Perpendicular: return "perpendicular";
    case ConstrKind::Midpoint: return "midpoint";
    case ConstrKind::Equal: return "equal";
    case ConstrKind::Tangent: return "tangent";
  }
  return "?";
}

int param_count(PrimKind k) {
  switch (k) {
    case PrimKind::Point: return 2;
    case PrimKind::Line: return 6;
    case PrimKind::Circle: return 6;
    case PrimKind::Arc: return 8;
  }
  return 0;
}

Vec2 location(const Primitive& p) { return {p.params[0], p.params[1]}; }

Vec2 direction(const Primitive& p) {
  assert(p.kind != PrimKind::Point);
  return {p.params[2], p.params[3]};
}

Vec2 unit_direction(const Primitive& p) {
  Vec2 d = direction(p);
  double n = d.norm();
  if (n < 1e-6) return {1.0, 0.0};
  return d / n;
}

double radius(const Primitive& p) {
  assert(p.kind == PrimKind::Circle || p.kind == PrimKind::Arc);
  return p.params[4];
}

double winding(const Primitive& p) {
  assert(p.kind == PrimKind::Circle || p.kind == PrimKind::Arc);
  return p.params[5];
}

double range_a(const Primitive& p) {
  assert(p.kind == PrimKind::Line || p.kind == PrimKind::Arc);
  return p.kind == PrimKind::Line ? p.params[4] : p.params[6];
}

double range_b(const Primitive& p) {
  assert(p.kind == PrimKind::Line || p.kind == PrimKind::Arc);
  return p.kind == PrimKind::Line ? p.params[5] : p.params[7];
}

static double arc_angle(const Primitive& p, double t) {
  // absolute angle of the parameter value t in the arc's interval
  double theta0 = std::atan2(p.params[3], p.params[2]);
  return theta0 + winding(p) * t;
}

Vec2 start_point(const Primitive& p) {
  if (p.kind == PrimKind::Line) {
    return location(p) + range_a(p) * unit_direction(p);
  }
  assert(p.kind == PrimKind::Arc);
  double t = arc_angle(p, range_a(p));
  return center_point(p) + radius(p) * Vec2{std::cos(t), std::sin(t)};
}

Vec2 end_point(const Primitive& p) {
  if (p.kind == PrimKind::Line) {
    return location(p) + range_b(p) * unit_direction(p);
  }
  assert(p.kind == PrimKind::Arc);
  double t = arc_angle(p, range_b(p));
  return center_point(p) + radius(p) * Vec2{std::cos(t), std::sin(t)};
}

Vec2 center_point(const Primitive& p) {
  assert(p.kind == PrimKind::Circle || p.kind == PrimKind::Arc);
  return location(p);
}

double line_length(const Primitive& p) {
  assert(p.kind == PrimKind::Line);
  return range_b(p) - range_a(p);
}

double arc_sweep(const Primitive& p) {
  assert(p.kind == PrimKind::Arc);
  return winding(p) * (range_b(p) - range_a(p));
}

double curve_length(const Primitive& p) {
  switch (p.kind) {
    case PrimKind::Line: return line_length(p);
    case PrimKind::Arc: return radius(p) * (range_b(p) - range_a(p));
    default: throw std::logic_error("curve_length: not a curve");
  }
}

Vec2 resolve_anchor(const Primitive& p, SubRef s) {
  switch (s) {
    case SubRef::Start: return start_point(p);
    case SubRef::End: return end_point(p);
    case SubRef::Center: return center_point(p);
    case SubRef::Whole:
      switch (p.kind) {
        case PrimKind::Point: return location(p);
        case PrimKind::Line: return 0.5 * (start_point(p) + end_point(p));
        case PrimKind::Circle:
        case PrimKind::Arc: return center_point(p);
      }
  }
  return location(p);
}

bool subref_legal(PrimKind k, SubRef s) {
  switch (k) {
    case PrimKind::Point: return s == SubRef::Whole;
    case PrimKind::Line:
      return s == SubRef::Start || s == SubRef::End || s == SubRef::Whole;
    case PrimKind::Circle: return s == SubRef::Center || s == SubRef::Whole;
    case PrimKind::Arc: return true;
  }
  return false;
}

Primitive make_point(const Vec2& p, bool construction) {
  return {PrimKind::Point, construction, {p.x(), p.y()}};
}

Primitive make_line(const Vec2& s, const Vec2& e, bool construction) {
  Vec2 d = e - s;
  double len = d.norm();
  if (len <= 0) throw std::invalid_argument("make_line: zero length");
  d /= len;
  Vec2 mid = 0.5 * (s + e);
  return make_line_carrier(mid, d, -0.5 * len, 0.5 * len, construction);
}

Primitive make_line_carrier(const Vec2& p, const Vec2& d, double a, double b,
                            bool construction) {
  return {PrimKind::Line, construction, {p.x(), p.y(), d.x(), d.y(), a, b}};
}

Primitive make_circle(const Vec2& c, double r, bool construction) {
  return {PrimKind::Circle, construction, {c.x(), c.y(), 1.0, 0.0, r, 1.0}};
}

Primitive make_arc(const Vec2& c, double r, double start_angle, double sweep,
                   bool construction) {
  double w = sweep >= 0 ? 1.0 : -1.0;
  return {PrimKind::Arc,
          construction,
          {c.x(), c.y(), std::cos(start_angle), std::sin(start_angle), r, w,
           0.0, std::abs(sweep)}};
}

int subref_slots(ConstrKind k) {
  switch (k) {
    case ConstrKind::Coincident:
    case ConstrKind::Horizontal:
    case ConstrKind::Vertical: return 2;
    case ConstrKind::Midpoint: return 1;
    default: return 0;
  }
}

static Constraint make2(ConstrKind k, ConstraintTarget a, ConstraintTarget b) {
  return {k, {a, b}};
}

Constraint make_coincident(int i, SubRef si, int j, SubRef sj) {
  return make2(ConstrKind::Coincident, {i, si}, {j, sj});
}
Constraint make_horizontal(int i, SubRef si, int j, SubRef sj) {
  return make2(ConstrKind::Horizontal, {i, si}, {j, sj});
}
Constraint make_horizontal(int line) {
  return make_horizontal(line, SubRef::Whole, line, SubRef::Whole);
}
Constraint make_vertical(int i, SubRef si, int j, SubRef sj) {
  return make2(ConstrKind::Vertical, {i, si}, {j, sj});
}
Constraint make_vertical(int line) {
  return make_vertical(line, SubRef::Whole, line, SubRef::Whole);
}
Constraint make_parallel(int i, int j) {
  return make2(ConstrKind::Parallel, {i, SubRef::Whole}, {j, SubRef::Whole});
}
Constraint make_perpendicular(int i, int j) {
  return make2(ConstrKind::Perpendicular, {i, SubRef::Whole}, {j, SubRef::Whole});
}
Constraint make_midpoint(int i, SubRef si, int line) {
  return make2(ConstrKind::Midpoint, {i, si}, {line, SubRef::Whole});
}
Constraint make_equal(int i, int j) {
  return make2(ConstrKind::Equal, {i, SubRef::Whole}, {j, SubRef::Whole});
}
Constraint make_tangent(int i, int j) {
  return make2(ConstrKind::Tangent, {i, SubRef::Whole}, {j, SubRef::Whole});
}

int intrinsic_dof(PrimKind k) {
  switch (k) {
    case PrimKind::Point: return 2;
    case PrimKind::Line: return 4;
    case PrimKind::Circle: return 3;
    case PrimKind::Arc: return 5;
  }
  return 0;
}

void renormalize_direction(Primitive& p) {
  if (p.kind == PrimKind::Point) return;
  double n = std::hypot(p.params[2], p.params[3]);
  if (n < 1e-6) {
    p.params[2] = 1.0;
    p.params[3] = 0.0;
    return;
  }
  p.params[2] /= n;
  p.params[3] /= n;
}

uint64_t sketch_digest(const Sketch& s, uint64_t h) {
  for (const Primitive& p : s.primitives) {
    unsigned char head[2] = {(unsigned char)p.kind,
                             (unsigned char)(p.construction ? 1 : 0)};
    h = fnv1a64(head, sizeof head, h);
    h = digest_doubles(p.params.data(), p.params.size(), h);
  }
  for (const Constraint& c : s.constraints) {
    unsigned char kind = (unsigned char)c.kind;
    h = fnv1a64(&kind, 1, h);
    for (const ConstraintTarget& t : c.targets) {
      int32_t prim = t.prim;
      unsigned char sub = (unsigned char)t.sub;
      h = fnv1a64(&prim, sizeof prim, h);
      h = fnv1a64(&sub, 1, h);
    }
  }
  return h;
}

uint64_t corpus_digest(const std::vector<Sketch>& corpus) {
  uint64_t h = 14695981039346656037ull;
  for (const Sketch& s : corpus) {
    h = sketch_digest(s, h);
  }
  return h;
}

}  // namespace sketchlang
