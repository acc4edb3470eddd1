#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace taec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Per-frame integer labels. Cluster ids are 0-based; -1 marks ignored frames
// in ground truth.
using Labels = std::vector<int>;

inline constexpr int kIgnoreLabel = -1;

}  // namespace taec

namespace taec {

// SplitMix64 finalizer over (seed, index): independent, reproducible
// sub-seeds for restarts, videos and stages.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace taec
