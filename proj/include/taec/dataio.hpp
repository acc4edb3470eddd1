#pragma once

#include "taec/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace taec {

// One video: T x D frame features and optional ground-truth labels
// (kIgnoreLabel marks background frames).
struct FeatureSequence {
  std::string video_id;
  Matrix features;
  std::optional<Labels> gt_labels;

  [[nodiscard]] Eigen::Index frames() const { return features.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return features.cols(); }
};

using Dataset = std::vector<FeatureSequence>;

// Throws DataError if T < 1, a feature is non-finite, or the label count
// differs from T.
void validate(const FeatureSequence& video);

struct SynthConfig {
  int num_videos = 10;
  int num_actions = 4;
  int feature_dim = 16;
  double separation = 4.0;   // minimum pairwise prototype distance
  double noise_sigma = 0.5;
  int min_segment_length = 20;
  int max_segment_length = 40;
  double order_permutation_prob = 0.5;
  std::uint64_t seed = 0;
};

// Planted-ground-truth activity. Each video contains every action exactly
// once; with probability order_permutation_prob its order deviates from the
// canonical 0..K-1 by 1..K-1 random adjacent swaps. Features are
// prototype + N(0, noise_sigma^2), smoothed with a 3-frame moving average,
// and rounded to the 9 significant digits of the text format so that
// save/load round-trips exactly.
//
// Throws std::invalid_argument on an invalid config and DataError when no
// prototype set with the requested separation is found in 100 draws.
Dataset generate_synthetic(const SynthConfig& cfg);

// The action order actually planted in a generated video (sequence of
// distinct labels in order of appearance).
std::vector<int> segment_order(const Labels& labels);

// Text formats: features one frame per line with D space-separated numbers
// (9 significant digits); labels one integer per line; manifest lines
// `video_id feature_path [label_path]`, relative paths resolved against the
// manifest's directory.
Matrix read_feature_file(const std::filesystem::path& path);
Labels read_label_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const Matrix& features);
void write_label_file(const std::filesystem::path& path, const Labels& labels);

Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes <dir>/<video_id>.feat (+ .labels) and <dir>/<manifest_name>.
// Returns the manifest path.
std::filesystem::path save_dataset(const Dataset& data, const std::filesystem::path& dir,
                                   const std::string& manifest_name = "manifest.txt");

// Formats a double with 9 significant digits, the precision used by every
// text file this library writes.
std::string format_number(double value);

}  // namespace taec
