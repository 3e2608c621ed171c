#include "sketchlang/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace sketchlang {

namespace {

struct Box {
  double lox = 0, loy = 0, hix = 0, hiy = 0;
  bool empty = true;
  void add(const Vec2& p) {
    if (empty) {
      lox = hix = p.x();
      loy = hiy = p.y();
      empty = false;
      return;
    }
    lox = std::min(lox, p.x());
    hix = std::max(hix, p.x());
    loy = std::min(loy, p.y());
    hiy = std::max(hiy, p.y());
  }
};

Box bounds(const Sketch& s, Box box = {}) {
  for (const Primitive& p : s.primitives) {
    switch (p.kind) {
      case PrimKind::Point: box.add(location(p)); break;
      case PrimKind::Line:
        box.add(start_point(p));
        box.add(end_point(p));
        break;
      case PrimKind::Circle:
      case PrimKind::Arc: {
        Vec2 c = center_point(p);
        double r = radius(p);
        box.add({c.x() - r, c.y() - r});
        box.add({c.x() + r, c.y() + r});
        break;
      }
    }
  }
  return box;
}

// Sketch y points up; SVG y points down.
struct Mapper {
  double lox, loy, scale, ox, oy;
  double x(double v) const { return ox + (v - lox) * scale; }
  double y(double v) const { return oy - (v - loy) * scale; }
};

Mapper fit(const Box& b, const RenderOptions& opt, double panel_x) {
  double w = b.empty ? 1 : b.hix - b.lox;
  double h = b.empty ? 1 : b.hiy - b.loy;
  double extent = std::max({w, h, 1e-6});
  double inner = opt.size - 2 * opt.margin;
  double scale = inner / extent;
  // center the content in the panel
  double ox = panel_x + opt.margin + 0.5 * (inner - w * scale);
  double oy = opt.size - opt.margin - 0.5 * (inner - h * scale);
  return {b.empty ? 0 : b.lox, b.empty ? 0 : b.loy, scale, ox, oy};
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string style(const Primitive& p, const RenderOptions& opt) {
  std::string s = " fill=\"none\" stroke=\"";
  s += p.construction ? "#8892a6" : "#1f2430";
  s += "\" stroke-width=\"" + num(opt.stroke) + "\"";
  if (p.construction) s += " stroke-dasharray=\"6 4\"";
  s += " stroke-linecap=\"round\"";
  return s;
}

void point_marker(std::string& out, const Mapper& m, const Vec2& at,
                  bool construction, const RenderOptions& opt) {
  out += "  <circle cx=\"" + num(m.x(at.x())) + "\" cy=\"" + num(m.y(at.y())) +
         "\" r=\"" + num(1.6 * opt.stroke) + "\" fill=\"" +
         (construction ? "#8892a6" : "#c0392b") + "\"/>\n";
}

void panel(std::string& out, const Sketch& s, const Mapper& m,
           const RenderOptions& opt) {
  for (const Primitive& p : s.primitives) {
    switch (p.kind) {
      case PrimKind::Point:
        point_marker(out, m, location(p), p.construction, opt);
        break;
      case PrimKind::Line: {
        Vec2 a = start_point(p), b = end_point(p);
        if ((b - a).norm() < 1e-9) {
          out += "  <!-- warning: zero-length line drawn as point -->\n";
          point_marker(out, m, a, p.construction, opt);
          break;
        }
        out += "  <line x1=\"" + num(m.x(a.x())) + "\" y1=\"" +
               num(m.y(a.y())) + "\" x2=\"" + num(m.x(b.x())) + "\" y2=\"" +
               num(m.y(b.y())) + "\"" + style(p, opt) + "/>\n";
        break;
      }
      case PrimKind::Circle: {
        Vec2 c = center_point(p);
        double r = radius(p);
        if (r < 1e-9) {
          out += "  <!-- warning: zero-radius circle drawn as point -->\n";
          point_marker(out, m, c, p.construction, opt);
          break;
        }
        out += "  <circle cx=\"" + num(m.x(c.x())) + "\" cy=\"" +
               num(m.y(c.y())) + "\" r=\"" + num(r * m.scale) + "\"" +
               style(p, opt) + "/>\n";
        break;
      }
      case PrimKind::Arc: {
        Vec2 c = center_point(p);
        double r = radius(p);
        if (r < 1e-9) {
          out += "  <!-- warning: zero-radius arc drawn as point -->\n";
          point_marker(out, m, c, p.construction, opt);
          break;
        }
        double sweep = arc_sweep(p);
        if (std::abs(sweep) >= 2 * M_PI - 1e-9) {
          out += "  <circle cx=\"" + num(m.x(c.x())) + "\" cy=\"" +
                 num(m.y(c.y())) + "\" r=\"" + num(r * m.scale) + "\"" +
                 style(p, opt) + "/>\n";
          break;
        }
        Vec2 a = start_point(p), b = end_point(p);
        // After the y flip a positive (counter-clockwise) sweep runs against
        // SVG's positive-angle direction.
        int svg_sweep = sweep > 0 ? 0 : 1;
        int large = std::abs(sweep) > M_PI + 1e-12 ? 1 : 0;
        out += "  <path d=\"M " + num(m.x(a.x())) + " " + num(m.y(a.y())) +
               " A " + num(r * m.scale) + " " + num(r * m.scale) + " 0 " +
               std::to_string(large) + " " + std::to_string(svg_sweep) + " " +
               num(m.x(b.x())) + " " + num(m.y(b.y())) + "\"" +
               style(p, opt) + "/>\n";
        break;
      }
    }
  }
}

std::string document(double width, double height, const std::string& body) {
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
         "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) +
         " " + num(height) + "\">\n";
  out += body;
  out += "</svg>\n";
  return out;
}

}  // namespace

std::string render_svg(const Sketch& s, const RenderOptions& opt) {
  std::string body;
  panel(body, s, fit(bounds(s), opt, 0), opt);
  return document(opt.size, opt.size, body);
}

std::string render_svg_pair(const Sketch& before, const Sketch& after,
                            const RenderOptions& opt) {
  Box shared = bounds(after, bounds(before));
  std::string body;
  body += "  <rect x=\"0\" y=\"0\" width=\"" + num(opt.size) + "\" height=\"" +
          num(opt.size) + "\" fill=\"#ececec\"/>\n";
  panel(body, before, fit(shared, opt, 0), opt);
  panel(body, after, fit(shared, opt, opt.size), opt);
  return document(2 * opt.size, opt.size, body);
}

}  // namespace sketchlang
