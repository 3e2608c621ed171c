#include <doctest.h>

#include <set>

#include "sketchlang/codebook.hpp"
#include "sketchlang/data.hpp"
#include "sketchlang/grammar.hpp"
#include "sketchlang/metrics.hpp"
#include "sketchlang/solver.hpp"
#include "sketchlang/synth.hpp"

using namespace sketchlang;

namespace {

std::vector<Recipe> all_recipes() {
  return {Recipe::Rectangle, Recipe::Slot, Recipe::Polyline,
          Recipe::CircleInBox, Recipe::Hub};
}

int coincident_count(const Sketch& s) {
  int n = 0;
  for (const Constraint& c : s.constraints)
    if (c.kind == ConstrKind::Coincident) ++n;
  return n;
}

}  // namespace

TEST_CASE("every recipe validates at many seeds") {
  Rng rng(31);
  for (Recipe r : all_recipes()) {
    for (int i = 0; i < 100; ++i) {
      Sketch s = synth_sketch(r, rng);
      CAPTURE(to_string(r));
      CHECK(validate(s).empty());
      CHECK(s.primitives.size() >= 6);
      CHECK(!s.constraints.empty());
    }
  }
}

TEST_CASE("geometry stays inside the unit-ish box") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Sketch s = synth_sketch((Recipe)(i % kNumRecipes), rng);
    for (const Primitive& p : s.primitives) {
      switch (p.kind) {
        case PrimKind::Point:
          CHECK(std::abs(location(p).x()) < 1.25);
          CHECK(std::abs(location(p).y()) < 1.25);
          break;
        case PrimKind::Line:
          CHECK(start_point(p).cwiseAbs().maxCoeff() < 1.25);
          CHECK(end_point(p).cwiseAbs().maxCoeff() < 1.25);
          break;
        default:
          CHECK(center_point(p).cwiseAbs().maxCoeff() + radius(p) < 1.35);
      }
    }
  }
}

TEST_CASE("rectangle recipe keeps five degrees of freedom at any seed") {
  Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    Sketch s = synth_sketch(Recipe::Rectangle, rng);
    CHECK(degrees_of_freedom(s) == 5);
  }
}

TEST_CASE("recipe constraints are exactly satisfied as generated") {
  Rng rng(55);
  for (int i = 0; i < 60; ++i) {
    Sketch s = synth_sketch((Recipe)(i % kNumRecipes), rng);
    for (const Constraint& c : s.constraints) {
      Eigen::VectorXd r = constraint_residual(s, c);
      CHECK(r.cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("snapping over-reports coincidence on every recipe") {
  Rng rng(123);
  for (int i = 0; i < 300; ++i) {
    Sketch s = synth_sketch((Recipe)(i % kNumRecipes), rng);
    auto snapped = snapping_baseline(s.primitives, 0.1);
    CAPTURE(i % kNumRecipes);
    CHECK((int)snapped.size() > coincident_count(s));
  }
}

TEST_CASE("fixed seed reproduces the corpus bit for bit") {
  auto a = synth_corpus(60, 42);
  auto b = synth_corpus(60, 42);
  REQUIRE(a.size() == b.size());
  CHECK(corpus_digest(a) == corpus_digest(b));
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(sketch_digest(a[i]) == sketch_digest(b[i]));
  CHECK(corpus_digest(synth_corpus(60, 43)) != corpus_digest(a));
}

TEST_CASE("the recipe mix steers which families appear") {
  SynthMix only_hubs;
  only_hubs.weights = {0, 0, 0, 0, 1};
  for (const Sketch& s : synth_corpus(20, 5, only_hubs)) {
    int circles = 0;
    for (const Primitive& p : s.primitives)
      circles += p.kind == PrimKind::Circle;
    CHECK(circles == 6);
  }
}

TEST_CASE("a mixed corpus passes the ingest filter wholesale") {
  auto corpus = synth_corpus(1000, 2024);
  IngestFilters f;
  f.min_primitives = 4;
  SplitCorpus split = ingest_filter(corpus, f);
  CHECK(split.manifest.kept == 1000);
  CHECK(split.manifest.dropped_small == 0);
  CHECK(split.manifest.dropped_long == 0);
  CHECK(split.manifest.dropped_invalid == 0);
  // the default minimum of six would keep them all as well
  CHECK(ingest_filter(corpus, IngestFilters{}).manifest.kept == 1000);
}

TEST_CASE("synthetic sketches tokenize and round-trip the grammar") {
  auto corpus = synth_corpus(40, 9);
  CodebookSet books = fit_codebooks(corpus, {.k = 64, .seed = 3, .n_init = 2});
  VocabLayout layout = VocabLayout::from(books);
  for (const Sketch& s : corpus) {
    TokenSequence seq = parse_sketch(s, books, layout);
    CHECK(validate_syntax(seq.q, layout).ok);
    Sketch back = interpret(seq.q, books, layout);
    REQUIRE(back.primitives.size() == s.primitives.size());
    REQUIRE(back.constraints.size() == s.constraints.size());
    // structure is preserved exactly; parameters move to bin centers
    for (size_t i = 0; i < s.constraints.size(); ++i) {
      CHECK(back.constraints[i].kind == s.constraints[i].kind);
      for (int t = 0; t < 2; ++t) {
        CHECK(back.constraints[i].targets[t].prim ==
              s.constraints[i].targets[t].prim);
        CHECK(back.constraints[i].targets[t].sub ==
              s.constraints[i].targets[t].sub);
      }
    }
  }
}
