#pragma once

#include <array>
#include <string>
#include <vector>

#include "sketchlang/types.hpp"
#include "sketchlang/util.hpp"

namespace sketchlang {

// Sketch families for the synthetic corpus. Every recipe emits geometry that
// satisfies its own constraint list exactly, stays within roughly
// [-1.1, 1.1]^2, and reaches at least six primitives by parking auxiliary
// points near (but never on) existing anchors — so a proximity heuristic at
// snapping range always reports strictly more coincidences than the ground
// truth contains.
enum class Recipe { Rectangle, Slot, Polyline, CircleInBox, Hub };

inline constexpr int kNumRecipes = 5;

std::string to_string(Recipe r);

Sketch synth_sketch(Recipe r, Rng& rng);

// Relative recipe weights; normalized internally.
struct SynthMix {
  std::array<double, kNumRecipes> weights{0.30, 0.20, 0.20, 0.15, 0.15};
};

// Same (n, seed, mix) -> bit-identical corpus.
std::vector<Sketch> synth_corpus(int n, uint64_t seed, const SynthMix& mix = {});

}  // namespace sketchlang
