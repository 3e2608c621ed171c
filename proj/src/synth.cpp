#include "sketchlang/synth.hpp"

#include <cmath>
#include <stdexcept>

namespace sketchlang {

namespace {

Vec2 polar(double ang) { return {std::cos(ang), std::sin(ang)}; }

Vec2 jitter_near(const Vec2& at, double lo, double hi, Rng& rng) {
  return at + uniform(rng, lo, hi) * polar(uniform(rng, 0.0, 2 * M_PI));
}

// The first helper point lands within snapping range of `anchor`, the second
// within snapping range of the first.
void add_helper_pair(Sketch& s, const Vec2& anchor, Rng& rng) {
  Vec2 p = jitter_near(anchor, 0.02, 0.09, rng);
  s.primitives.push_back(make_point(p));
  s.primitives.push_back(make_point(jitter_near(p, 0.01, 0.08, rng)));
}

void rect_core(Sketch& s, const Vec2& a, const Vec2& b, const Vec2& c,
               const Vec2& d) {
  s.primitives.push_back(make_line(a, b));
  s.primitives.push_back(make_line(b, c));
  s.primitives.push_back(make_line(c, d));
  s.primitives.push_back(make_line(d, a));
  for (int i = 0; i < 4; ++i)
    s.constraints.push_back(
        make_coincident(i, SubRef::End, (i + 1) % 4, SubRef::Start));
  s.constraints.push_back(make_horizontal(0));
  s.constraints.push_back(make_horizontal(2));
  s.constraints.push_back(make_vertical(1));
  s.constraints.push_back(make_vertical(3));
  s.constraints.push_back(make_perpendicular(0, 1));
}

Sketch rectangle(Rng& rng) {
  double w = uniform(rng, 0.3, 1.0);
  double h = uniform(rng, 0.3, 1.0);
  double x0 = uniform(rng, -1.0, 1.0 - w);
  double y0 = uniform(rng, -1.0, 1.0 - h);
  Vec2 a{x0, y0}, b{x0 + w, y0}, c{x0 + w, y0 + h}, d{x0, y0 + h};
  Sketch s;
  rect_core(s, a, b, c, d);
  // Two pinned helper points: one held at the bottom edge's midpoint, one
  // held level with corner b a small horizontal offset away. Pinning them
  // keeps the sketch at exactly five degrees of freedom for every seed
  // (position 2 + width + height + one residual shear the horizontal /
  // vertical pair on opposite edges does not remove).
  double dx = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.02, 0.09);
  s.primitives.push_back(make_point(0.5 * (a + b)));
  s.primitives.push_back(make_point(b + Vec2{dx, 0.0}));
  s.constraints.push_back(make_midpoint(4, SubRef::Whole, 0));
  s.constraints.push_back(
      make_horizontal(5, SubRef::Whole, 0, SubRef::End));
  return s;
}

Sketch slot(Rng& rng) {
  double half = uniform(rng, 0.3, 0.65);
  double r = uniform(rng, 0.11, 0.3);
  double cx = uniform(rng, -0.3, 0.3);
  double cy = uniform(rng, -0.3, 0.3);
  Vec2 a1{cx - half, cy + r}, b1{cx + half, cy + r};
  Vec2 a2{cx - half, cy - r}, b2{cx + half, cy - r};
  Sketch s;
  s.primitives.push_back(make_line(a1, b1));                               // top
  s.primitives.push_back(make_line(b2, a2));                               // bottom
  s.primitives.push_back(make_arc({cx + half, cy}, r, M_PI / 2, -M_PI));   // right cap
  s.primitives.push_back(make_arc({cx - half, cy}, r, -M_PI / 2, -M_PI));  // left cap
  add_helper_pair(s, b1, rng);
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

Sketch polyline(Rng& rng) {
  int segs = 4 + (int)uniform_index(rng, 5);  // 4..8 segments
  std::vector<Vec2> pts;
  pts.push_back({uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7)});
  double heading = uniform(rng, 0.0, 2 * M_PI);
  while ((int)pts.size() <= segs) {
    const Vec2& prev = pts.back();
    if (std::max(std::abs(prev.x()), std::abs(prev.y())) > 0.6) {
      // Steer back toward the middle; with steps <= 0.45 and at most 0.4 rad
      // of error this keeps the walk inside [-1.05, 1.05]^2.
      heading = std::atan2(-prev.y(), -prev.x()) + uniform(rng, -0.4, 0.4);
    } else {
      heading += uniform(rng, -1.2, 1.2);
    }
    pts.push_back(prev + uniform(rng, 0.15, 0.45) * polar(heading));
  }
  Sketch s;
  for (int i = 0; i < segs; ++i)
    s.primitives.push_back(make_line(pts[i], pts[i + 1]));
  add_helper_pair(s, pts[1], rng);
  for (int i = 0; i + 1 < segs; ++i)
    s.constraints.push_back(
        make_coincident(i, SubRef::End, i + 1, SubRef::Start));
  return s;
}

Sketch circle_in_box(Rng& rng) {
  double w = uniform(rng, 0.4, 1.0);
  double h = uniform(rng, 0.4, 1.0);
  double x0 = uniform(rng, -1.0, 1.0 - w);
  double y0 = uniform(rng, -1.0, 1.0 - h);
  Vec2 a{x0, y0}, b{x0 + w, y0}, c{x0 + w, y0 + h}, d{x0, y0 + h};
  Sketch s;
  rect_core(s, a, b, c, d);
  s.primitives.push_back(make_line(a, c, /*construction=*/true));  // diagonal
  s.primitives.push_back(
      make_circle(0.5 * (a + c), uniform(rng, 0.08, 0.45 * std::min(w, h))));
  add_helper_pair(s, b, rng);
  s.constraints.push_back(make_coincident(4, SubRef::Start, 0, SubRef::Start));
  s.constraints.push_back(make_coincident(4, SubRef::End, 2, SubRef::Start));
  // The circle rides the construction diagonal's midpoint: box center.
  s.constraints.push_back(make_midpoint(5, SubRef::Center, 4));
  return s;
}

Sketch hub(Rng& rng) {
  Vec2 c{uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2)};
  double r1 = uniform(rng, 0.45, 0.8);
  double r2 = uniform(rng, 0.15, r1 - 0.25);
  double ring = 0.5 * (r1 + r2);
  double rb = uniform(rng, 0.04, std::min(0.12, 0.4 * (r1 - r2)));
  double phase = uniform(rng, 0.0, 2 * M_PI);
  Sketch s;
  s.primitives.push_back(make_circle(c, r1));
  s.primitives.push_back(make_circle(c, r2));
  for (int k = 0; k < 4; ++k)
    s.primitives.push_back(
        make_circle(c + ring * polar(phase + k * M_PI / 2), rb));
  // Circles expose no snappable anchors, so the helper cluster is three
  // mutually close points (pairwise under 0.1 apart).
  Vec2 p = jitter_near(c, 0.0, 0.1, rng);
  s.primitives.push_back(make_point(p));
  s.primitives.push_back(make_point(jitter_near(p, 0.01, 0.045, rng)));
  s.primitives.push_back(make_point(jitter_near(p, 0.01, 0.045, rng)));
  s.constraints.push_back(
      make_coincident(0, SubRef::Center, 1, SubRef::Center));
  for (int k = 2; k < 5; ++k) s.constraints.push_back(make_equal(k, k + 1));
  return s;
}

}  // namespace

std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::Rectangle: return "rectangle";
    case Recipe::Slot: return "slot";
    case Recipe::Polyline: return "polyline";
    case Recipe::CircleInBox: return "circle-in-box";
    case Recipe::Hub: return "hub";
  }
  throw std::invalid_argument("to_string: bad recipe");
}

Sketch synth_sketch(Recipe r, Rng& rng) {
  switch (r) {
    case Recipe::Rectangle: return rectangle(rng);
    case Recipe::Slot: return slot(rng);
    case Recipe::Polyline: return polyline(rng);
    case Recipe::CircleInBox: return circle_in_box(rng);
    case Recipe::Hub: return hub(rng);
  }
  throw std::invalid_argument("synth_sketch: bad recipe");
}

std::vector<Sketch> synth_corpus(int n, uint64_t seed, const SynthMix& mix) {
  if (n < 1) throw std::invalid_argument("synth_corpus: n must be positive");
  std::vector<double> w(mix.weights.begin(), mix.weights.end());
  Rng rng(seed);
  std::vector<Sketch> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i)
    out.push_back(synth_sketch((Recipe)sample_weighted(rng, w), rng));
  return out;
}

}  // namespace sketchlang
