#pragma once

// Static SVG figures: segmentation bands and similarity heatmaps.

#include "taec/types.hpp"

#include <string>
#include <vector>

namespace taec {

// Ten well-separated colours; label l uses palette[l % size]. Negative
// labels (ignored frames, unmatched clusters) are drawn grey.
const std::vector<std::string>& default_palette();

inline constexpr const char* kUnlabeledColor = "#bdbdbd";

// One horizontal band per sequence, ground truth on top, with a legend of
// the labels that occur. Bands are drawn in frame units and stretched to
// the figure width, so the rectangles of a row tile [0, T] exactly.
// `row_names` defaults to "ground truth", "prediction 1", ...
std::string render_segmentation_svg(const Labels& gt, const std::vector<Labels>& predictions,
                                    const std::vector<std::string>& palette = default_palette(),
                                    const std::vector<std::string>& row_names = {});

// Grayscale heatmap, 1 -> black and 0 -> white. Matrices larger than
// `max_cells` per side are block-averaged down first.
std::string render_similarity_svg(const Matrix& similarity, int max_cells = 200);

}  // namespace taec
