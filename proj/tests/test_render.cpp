#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "sketchlang/render.hpp"

using namespace sketchlang;

namespace {

int count(const std::string& hay, const std::string& needle) {
  int n = 0;
  for (size_t at = hay.find(needle); at != std::string::npos;
       at = hay.find(needle, at + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("a rectangle renders four solid lines") {
  std::string svg = render_svg(fixtures::rectangle());
  CHECK(count(svg, "<line ") == 4);
  CHECK(count(svg, "stroke-dasharray") == 0);
  CHECK(svg.find("<svg xmlns=") != std::string::npos);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
}

TEST_CASE("construction geometry is dashed") {
  Sketch s;
  s.primitives.push_back(make_line({0, 0}, {1, 1}, /*construction=*/true));
  s.primitives.push_back(make_line({0, 1}, {1, 0}));
  std::string svg = render_svg(s);
  CHECK(count(svg, "<line ") == 2);
  CHECK(count(svg, "stroke-dasharray") == 1);
}

TEST_CASE("points become filled markers") {
  Sketch s;
  s.primitives.push_back(make_point({0.25, 0.75}));
  std::string svg = render_svg(s);
  CHECK(count(svg, "<circle ") == 1);
  CHECK(svg.find("fill=\"#c0392b\"") != std::string::npos);
}

TEST_CASE("the slot's caps come out as arc paths") {
  std::string svg = render_svg(fixtures::slot());
  CHECK(count(svg, "<path ") == 2);
  CHECK(count(svg, "<line ") == 2);
  // both caps sweep clockwise in sketch space, so the svg flag is 1
  CHECK(count(svg, " 0 0 1 ") == 2);
}

TEST_CASE("the y axis is flipped into screen space") {
  Sketch s;
  s.primitives.push_back(make_point({0.0, 0.0}));
  s.primitives.push_back(make_point({0.0, 1.0}));  // higher in sketch space
  RenderOptions opt;
  std::string svg = render_svg(s, opt);
  // the y=1 point must appear with the smaller svg y coordinate
  size_t first = svg.find("cy=\"");
  size_t second = svg.find("cy=\"", first + 1);
  double y0 = std::stod(svg.substr(first + 4));
  double y1 = std::stod(svg.substr(second + 4));
  CHECK(y1 < y0);
}

TEST_CASE("degenerate curves fall back to point markers with a warning") {
  Sketch s;
  s.primitives.push_back({PrimKind::Arc, false, {0, 0, 1, 0, 0, 1, 0, 1}});
  s.primitives.push_back({PrimKind::Circle, false, {0.5, 0.5, 1, 0, 0, 1}});
  std::string svg = render_svg(s);
  CHECK(svg.find("warning: zero-radius arc") != std::string::npos);
  CHECK(svg.find("warning: zero-radius circle") != std::string::npos);
  CHECK(count(svg, "<path ") == 0);
}

TEST_CASE("a full-turn arc renders as a circle") {
  Sketch s;
  s.primitives.push_back(make_arc({0, 0}, 0.5, 0.0, 2 * M_PI));
  std::string svg = render_svg(s);
  CHECK(count(svg, "<circle ") == 1);
  CHECK(count(svg, "<path ") == 0);
}

TEST_CASE("the pair layout shares one scale and doubles the width") {
  Sketch small;
  small.primitives.push_back(make_line({0, 0}, {0.5, 0}));
  Sketch big;
  big.primitives.push_back(make_line({0, 0}, {2.0, 0}));
  RenderOptions opt;
  std::string svg = render_svg_pair(small, big, opt);
  CHECK(svg.find("width=\"960.00\"") != std::string::npos);
  CHECK(svg.find("fill=\"#ececec\"") != std::string::npos);  // left backdrop
  CHECK(count(svg, "<line ") == 2);
  // shared scale: the small line occupies a quarter of the big one's span
  // (coarse check: both panels rendered, no exception)
}

TEST_CASE("the slot drawing matches the checked-in golden file") {
  std::string svg = render_svg_pair(fixtures::slot(), fixtures::rectangle());
  std::ifstream in(std::string(SKETCHLANG_TEST_DIR) + "/golden/slot_pair.svg");
  REQUIRE(in.good());
  std::stringstream want;
  want << in.rdbuf();
  CHECK(svg == want.str());
}
