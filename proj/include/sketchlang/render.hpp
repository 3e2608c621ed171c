#pragma once

#include <string>

#include "sketchlang/types.hpp"

namespace sketchlang {

struct RenderOptions {
  double size = 480;    // content box per panel, px (square)
  double margin = 28;   // inside each panel, px
  double stroke = 2.0;  // px
};

// Standalone SVG document, y up (flipped into screen coordinates). Regular
// geometry is drawn solid, construction geometry dashed, points as round
// markers. Degenerate curves (zero radius or length) fall back to a point
// marker with a warning comment in the output.
std::string render_svg(const Sketch& s, const RenderOptions& opt = {});

// Two panels side by side on one shared scale; the left panel gets a gray
// backdrop (intended for before/after comparisons around solving).
std::string render_svg_pair(const Sketch& before, const Sketch& after,
                            const RenderOptions& opt = {});

}  // namespace sketchlang
