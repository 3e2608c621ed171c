#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace sketchlang {

using Vec2 = Eigen::Vector2d;

enum class PrimKind : uint8_t { Point, Line, Circle, Arc };

// Sub-reference into a primitive. Legality depends on the primitive kind,
// see subref_legal().
enum class SubRef : uint8_t { Start, End, Center, Whole };

// Declaration order doubles as the canonical sort rank when constraint
// sections are linearized.
enum class ConstrKind : uint8_t {
  Coincident,
  Horizontal,
  Vertical,
  Parallel,
  Perpendicular,
  Midpoint,
  Equal,
  Tangent,
};

constexpr int kPrimKindCount = 4;
constexpr int kConstrKindCount = 8;
constexpr int kSubRefCount = 4;

const char* to_string(PrimKind k);
const char* to_string(SubRef s);
const char* to_string(ConstrKind k);

// Parameter layout (angles in radians, c is a +/-1 winding flag):
//   point:  x y
//   line:   x y u v a b    carrier point, unit direction, interval along it
//   circle: x y u v r c    center, reference direction, radius, winding
//   arc:    x y u v r c a b  center, reference direction, radius, winding,
//                            angular interval; start angle = atan2(v,u) + c*a
struct Primitive {
  PrimKind kind = PrimKind::Point;
  bool construction = false;
  std::vector<double> params;
};

int param_count(PrimKind k);

// Accessors assume the layout above; they do not range-check beyond asserts.
Vec2 location(const Primitive& p);
Vec2 direction(const Primitive& p);  // line/circle/arc only, raw (u, v)
// Quantization perturbs (u, v) off the unit circle; geometry treats the
// direction as defined up to scale. Near-degenerate vectors fall back to +x.
Vec2 unit_direction(const Primitive& p);
double radius(const Primitive& p);   // circle/arc only
double winding(const Primitive& p);  // circle/arc only
double range_a(const Primitive& p);  // line/arc only
double range_b(const Primitive& p);

Vec2 start_point(const Primitive& p);   // line/arc
Vec2 end_point(const Primitive& p);     // line/arc
Vec2 center_point(const Primitive& p);  // circle/arc
double line_length(const Primitive& p);
double arc_sweep(const Primitive& p);  // signed angle from start to end
double curve_length(const Primitive& p);  // line length or arc length

// Anchor point of a sub-reference. Whole resolves to a representative
// location: the point itself, a line's midpoint, a circle/arc center.
Vec2 resolve_anchor(const Primitive& p, SubRef s);
bool subref_legal(PrimKind k, SubRef s);

Primitive make_point(const Vec2& p, bool construction = false);
Primitive make_line(const Vec2& s, const Vec2& e, bool construction = false);
Primitive make_line_carrier(const Vec2& p, const Vec2& d, double a, double b,
                            bool construction = false);
Primitive make_circle(const Vec2& c, double r, bool construction = false);
// Start angle is absolute; sweep is signed (sign picks the winding flag).
Primitive make_arc(const Vec2& c, double r, double start_angle, double sweep,
                   bool construction = false);

struct ConstraintTarget {
  int prim = 0;
  SubRef sub = SubRef::Whole;
};

struct Constraint {
  ConstrKind kind = ConstrKind::Coincident;
  std::vector<ConstraintTarget> targets;
};

// All kinds reference exactly two targets; subref_slots() says how many of
// them carry a meaningful sub-reference (leading ones; the rest are Whole).
int subref_slots(ConstrKind k);

Constraint make_coincident(int i, SubRef si, int j, SubRef sj);
Constraint make_horizontal(int i, SubRef si, int j, SubRef sj);
Constraint make_horizontal(int line);  // whole-line form
Constraint make_vertical(int i, SubRef si, int j, SubRef sj);
Constraint make_vertical(int line);
Constraint make_parallel(int i, int j);
Constraint make_perpendicular(int i, int j);
Constraint make_midpoint(int i, SubRef si, int line);
Constraint make_equal(int i, int j);
Constraint make_tangent(int i, int j);

struct Sketch {
  std::vector<Primitive> primitives;
  std::vector<Constraint> constraints;
};

struct Violation {
  enum class Code {
    BadParamCount,
    NonFiniteParam,
    NonUnitDirection,
    NonPositiveRadius,
    BadWinding,
    EmptyRange,
    BadTargetCount,
    DanglingRef,
    IllegalSubRef,
    KindMismatch,  // constraint kind not applicable to the referenced primitives
  };
  Code code;
  std::string message;
  int prim = -1;        // index of the offending primitive, if any
  int constraint = -1;  // index of the offending constraint, if any
};

// Structural + semantic well-formedness. Empty result means valid.
std::vector<Violation> validate(const Sketch& s);

// Intrinsic degrees of freedom of one primitive under the solver's
// parameterization: point 2, line 4 (two endpoints), circle 3, arc 5.
int intrinsic_dof(PrimKind k);

// Snap a curve's direction back onto the unit circle in place.
void renormalize_direction(Primitive& p);

// Content digests (FNV-1a over kinds, flags and raw parameter bits).
uint64_t sketch_digest(const Sketch& s, uint64_t h = 14695981039346656037ull);
uint64_t corpus_digest(const std::vector<Sketch>& corpus);

}  // namespace sketchlang
