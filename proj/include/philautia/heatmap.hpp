#pragma once

#include "philautia/matrix.hpp"

#include <string>

namespace philautia {

// Heatmap of a raw mean matrix: blue-white-red over the min-max value range.
// Cells print their value at 2 decimals; output bytes depend only on input.
std::string heatmap_svg(const ScoreMatrix& m);

// Heatmap of a standardized matrix: the same palette centered at zero, so
// negative values are blue and positive red regardless of range.
std::string heatmap_svg(const StandardizedMatrix& m);

// Renders either matrix kind to a file, returning the bytes written.
std::size_t render_heatmap_svg(const ScoreMatrix& m, const std::string& path);
std::size_t render_heatmap_svg(const StandardizedMatrix& m, const std::string& path);

} // namespace philautia
