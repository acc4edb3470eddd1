#pragma once

#include "taec/embednet.hpp"
#include "taec/types.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace taec {

struct SimilarityConfig {
  int nearest_neighbor = 9;    // m: local scale is the distance to the m-th neighbour
  double sigma_prime = 1.0 / 6.0;  // temporal kernel uses sigma_tmp^2 = 2 sigma'^2
  std::optional<double> fixed_sigma_spat;  // replaces sigma_i * sigma_j by sigma_spat^2
  bool temporal_kernel = true;

  void validate() const;
};

// g(i,j) = exp(-|e_i - e_j|^2 / (sigma_i sigma_j)) * exp(-(s_i - s_j)^2 / sigma_tmp^2).
// Requires T >= 2 and, with local scaling, m < T. Local scales are clamped
// below at 1e-12 so duplicate frames do not divide by zero.
Matrix similarity_matrix(const EmbeddedSequence& emb, const SimilarityConfig& cfg);

// Distance from every row to its m-th nearest other row.
Vector local_scales(const Matrix& points, int m);

struct KMeansResult {
  Labels labels;
  Matrix centroids;
  double objective = 0.0;  // sum of squared distances to assigned centroids
};

// k-means++ seeding followed by Lloyd iterations (at most 300, stopping at an
// assignment fixpoint). Empty clusters take the point farthest from its
// centroid; nearest-centroid ties go to the lower index. `restarts` seeds are
// derived from `seed`; the lowest objective wins (earliest on ties).
KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 1);

// Normalized-cut relaxation: eigenvectors of the k smallest eigenvalues of
// I - D^-1/2 G D^-1/2, rows scaled to unit length.
Matrix spectral_embedding(const Matrix& affinity, int k);

// spectral_embedding followed by kmeans with 10 restarts.
Labels spectral_cluster(const Matrix& affinity, int k, std::uint64_t seed);

struct WithinVideoClusters {
  std::string video_id;
  Labels labels;                // T values in [0, K)
  Matrix centroids;             // K x E mean embedding per cluster
  Vector mean_timestamps;       // K mean relative timestamps
  int k = 0;

  [[nodiscard]] std::vector<Eigen::Index> cluster_sizes() const;
};

inline constexpr Eigen::Index kMaxClusteredFrames = 2000;

// Videos longer than kMaxClusteredFrames are clustered on every
// ceil(T / cap)-th frame; skipped frames copy the label of the nearest
// retained frame (earlier frame on ties).
WithinVideoClusters within_video_clustering(const EmbeddedSequence& emb, int k, const SimilarityConfig& cfg,
                                            std::uint64_t seed);

// Centroids and mean timestamps for a given labelling; throws
// std::invalid_argument if some cluster is empty.
WithinVideoClusters summarize_clusters(const EmbeddedSequence& emb, const Labels& labels, int k);

}  // namespace taec
