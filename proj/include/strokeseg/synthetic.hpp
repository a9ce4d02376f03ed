#pragma once

// Procedural labelled sketches for desk-scale experiments. Each category
// draws its components as separate strokes with random proportions, pose,
// stroke order and hand jitter. Coordinates are raw pixels; run them
// through preprocess_sketch before use.

#include <string>
#include <vector>

#include "strokeseg/sketch.hpp"

namespace strokeseg {

Sketch synth_chair(Rng& rng);
Sketch synth_flower(Rng& rng);

/// Categories with a generator.
std::vector<std::string> synthetic_categories();

std::vector<Sketch> synth_sketches(const std::string& category, std::size_t count, Rng& rng);

}  // namespace strokeseg
