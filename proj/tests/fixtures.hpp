#pragma once

// Hand-built sketches with known ground truth, kept independent of the
// library's corpus generator on purpose.

#include "sketchlang/types.hpp"

namespace fixtures {

using namespace sketchlang;

// Axis-aligned rectangle: four lines in drawing order bottom, right, top,
// left, chained start->end, with the usual constraint set.
inline Sketch rectangle(double x0 = -0.4, double y0 = -0.25, double w = 0.9,
                        double h = 0.6) {
  Vec2 a{x0, y0}, b{x0 + w, y0}, c{x0 + w, y0 + h}, d{x0, y0 + h};
  Sketch s;
  s.primitives.push_back(make_line(a, b));
  s.primitives.push_back(make_line(b, c));
  s.primitives.push_back(make_line(c, d));
  s.primitives.push_back(make_line(d, a));
  for (int i = 0; i < 4; ++i) {
    s.constraints.push_back(
        make_coincident(i, SubRef::End, (i + 1) % 4, SubRef::Start));
  }
  s.constraints.push_back(make_horizontal(0));
  s.constraints.push_back(make_horizontal(2));
  s.constraints.push_back(make_vertical(1));
  s.constraints.push_back(make_vertical(3));
  s.constraints.push_back(make_perpendicular(0, 1));
  return s;
}

// Rounded slot: two parallel lines capped by two half-circle arcs.
inline Sketch slot(double cx = 0.0, double cy = 0.0, double half = 0.35,
                   double r = 0.12) {
  Vec2 a1{cx - half, cy + r}, b1{cx + half, cy + r};
  Vec2 a2{cx - half, cy - r}, b2{cx + half, cy - r};
  Sketch s;
  s.primitives.push_back(make_line(a1, b1));                    // top
  s.primitives.push_back(make_line(b2, a2));                    // bottom
  s.primitives.push_back(make_arc({cx + half, cy}, r, M_PI / 2, -M_PI));  // right cap
  s.primitives.push_back(make_arc({cx - half, cy}, r, -M_PI / 2, -M_PI)); // left cap
  s.constraints.push_back(make_coincident(0, SubRef::End, 2, SubRef::Start));
  s.constraints.push_back(make_coincident(2, SubRef::End, 1, SubRef::Start));
  s.constraints.push_back(make_coincident(1, SubRef::End, 3, SubRef::Start));
  s.constraints.push_back(make_coincident(3, SubRef::End, 0, SubRef::Start));
  s.constraints.push_back(make_tangent(0, 2));
  s.constraints.push_back(make_tangent(1, 2));
  s.constraints.push_back(make_tangent(0, 3));
  s.constraints.push_back(make_tangent(1, 3));
  s.constraints.push_back(make_parallel(0, 1));
  s.constraints.push_back(make_equal(2, 3));
  return s;
}

}  // namespace fixtures
