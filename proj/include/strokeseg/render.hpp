#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "strokeseg/sketch.hpp"

namespace strokeseg {

/// Colour of class i of a category is kPalette[i % size]; unlabeled strokes are black.
inline constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                        "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

struct RenderOptions {
  double panel = 256.0;  // side of one square panel in user units
  double margin = 12.0;
  double stroke_width = 2.0;
  bool legend = true;
};

/// One sketch; strokes coloured by label with a legend of the labels used.
/// Throws on a label outside the category's set.
std::string render_svg(const Sketch& sketch, const RenderOptions& options = {});

/// Panels laid out left to right, one row per inner vector. Each panel is
/// fitted to its own box.
std::string render_grid(const std::vector<std::vector<Sketch>>& rows, const RenderOptions& options = {},
                        std::span<const std::string> column_titles = {});

}  // namespace strokeseg
