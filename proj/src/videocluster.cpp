#include "taec/videocluster.hpp"

#include "taec/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace taec {

void SimilarityConfig::validate() const {
  if (nearest_neighbor < 1) throw std::invalid_argument("SimilarityConfig: m must be >= 1");
  if (!(sigma_prime > 0.0)) throw std::invalid_argument("SimilarityConfig: sigma' must be > 0");
  if (fixed_sigma_spat && !(*fixed_sigma_spat > 0.0)) {
    throw std::invalid_argument("SimilarityConfig: fixed sigma_spat must be > 0");
  }
}

Vector local_scales(const Matrix& points, int m) {
  const Eigen::Index n = points.rows();
  if (m < 1 || m >= n) {
    throw std::invalid_argument("local scaling needs 1 <= m < T (m=" + std::to_string(m) + ", T=" + std::to_string(n) +
                                ")");
  }
  Vector scales(n);
  std::vector<double> dist(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dist[c++] = (points.row(i) - points.row(j)).squaredNorm();
    }
    auto nth = dist.begin() + (m - 1);
    std::nth_element(dist.begin(), nth, dist.end());
    scales(i) = std::sqrt(*nth);
  }
  return scales;
}

Matrix similarity_matrix(const EmbeddedSequence& emb, const SimilarityConfig& cfg) {
  cfg.validate();
  const Matrix& e = emb.embedding;
  const Eigen::Index n = e.rows();
  if (n < 2) throw std::invalid_argument("similarity_matrix: need at least 2 frames");
  if (emb.true_timestamps.size() != n) throw std::invalid_argument("similarity_matrix: timestamp count mismatch");

  Vector sigma;
  if (!cfg.fixed_sigma_spat) sigma = local_scales(e, cfg.nearest_neighbor).cwiseMax(1e-12);
  const double spat2 = cfg.fixed_sigma_spat ? *cfg.fixed_sigma_spat * *cfg.fixed_sigma_spat : 0.0;
  const double tmp2 = 2.0 * cfg.sigma_prime * cfg.sigma_prime;

  Matrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double denom = cfg.fixed_sigma_spat ? spat2 : sigma(i) * sigma(j);
      double v = std::exp(-(e.row(i) - e.row(j)).squaredNorm() / denom);
      if (cfg.temporal_kernel) {
        const double ds = emb.true_timestamps(i) - emb.true_timestamps(j);
        v *= std::exp(-ds * ds / tmp2);
      }
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

namespace {

double squared_distance(const Matrix& points, Eigen::Index i, const Matrix& centroids, Eigen::Index c) {
  return (points.row(i) - centroids.row(c)).squaredNorm();
}

void assign(const Matrix& points, const Matrix& centroids, Labels& labels) {
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = squared_distance(points, i, centroids, 0);
    for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
      const double d = squared_distance(points, i, centroids, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
  }
}

// Moves the farthest point of a non-singleton cluster into each empty one.
void repair_empty(const Matrix& points, Matrix& centroids, Labels& labels) {
  const auto k = centroids.rows();
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  for (Eigen::Index c = 0; c < k; ++c) {
    if (sizes[static_cast<std::size_t>(c)] > 0) continue;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const int l = labels[static_cast<std::size_t>(i)];
      if (sizes[static_cast<std::size_t>(l)] < 2) continue;
      const double d = squared_distance(points, i, centroids, l);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    const int from = labels[static_cast<std::size_t>(far)];
    --sizes[static_cast<std::size_t>(from)];
    ++sizes[static_cast<std::size_t>(c)];
    labels[static_cast<std::size_t>(far)] = static_cast<int>(c);
    centroids.row(c) = points.row(far);
  }
}

Matrix cluster_means(const Matrix& points, const Labels& labels, Eigen::Index k) {
  Matrix sums = Matrix::Zero(k, points.cols());
  Vector counts = Vector::Zero(k);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    sums.row(l) += points.row(i);
    counts(l) += 1.0;
  }
  for (Eigen::Index c = 0; c < k; ++c) sums.row(c) /= counts(c);
  return sums;
}

KMeansResult kmeans_once(const Matrix& points, int k, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  std::mt19937_64 rng(seed);

  // k-means++ seeding
  Matrix centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> uniform(0, n - 1);
  centroids.row(0) = points.row(uniform(rng));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, squared_distance(points, i, centroids, c - 1));
      total += d;
    }
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> dist(0.0, total);
      const double target = dist(rng);
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc > target && d2[static_cast<std::size_t>(i)] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform(rng);
    }
    centroids.row(c) = points.row(pick);
  }

  Labels labels(static_cast<std::size_t>(n), 0);
  assign(points, centroids, labels);
  repair_empty(points, centroids, labels);
  Labels next(labels.size());
  for (int iter = 0; iter < 300; ++iter) {
    centroids = cluster_means(points, labels, k);
    assign(points, centroids, next);
    repair_empty(points, centroids, next);
    if (next == labels) break;
    labels.swap(next);
  }

  KMeansResult result;
  result.centroids = cluster_means(points, labels, k);
  result.labels = std::move(labels);
  for (Eigen::Index i = 0; i < n; ++i) {
    result.objective += squared_distance(points, i, result.centroids, result.labels[static_cast<std::size_t>(i)]);
  }
  return result;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > points.rows()) {
    throw std::invalid_argument("kmeans: k=" + std::to_string(k) + " exceeds the number of points " +
                                std::to_string(points.rows()));
  }
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    KMeansResult candidate = kmeans_once(points, k, derive_seed(seed, static_cast<std::uint64_t>(r)));
    if (r == 0 || candidate.objective < best.objective) best = std::move(candidate);
  }
  return best;
}

Matrix spectral_embedding(const Matrix& affinity, int k) {
  const Eigen::Index n = affinity.rows();
  if (affinity.cols() != n) throw std::invalid_argument("spectral_embedding: affinity must be square");
  if (k < 1 || k > n) {
    throw std::invalid_argument("spectral_embedding: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) +
                                "]");
  }
  const Vector degree = affinity.rowwise().sum();
  if ((degree.array() <= 0.0).any()) throw std::invalid_argument("spectral_embedding: a vertex has zero degree");
  const Vector inv_sqrt = degree.array().rsqrt();
  Matrix laplacian = -(inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal());
  laplacian.diagonal().array() += 1.0;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(laplacian);
  if (solver.info() != Eigen::Success) throw NumericalError("spectral_embedding: eigensolver did not converge");
  Matrix rows = solver.eigenvectors().leftCols(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = rows.row(i).norm();
    if (norm > 0.0) rows.row(i) /= norm;
  }
  return rows;
}

Labels spectral_cluster(const Matrix& affinity, int k, std::uint64_t seed) {
  const Matrix rows = spectral_embedding(affinity, k);
  return kmeans(rows, k, seed, 10).labels;
}

std::vector<Eigen::Index> WithinVideoClusters::cluster_sizes() const {
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++sizes.at(static_cast<std::size_t>(l));
  return sizes;
}

WithinVideoClusters summarize_clusters(const EmbeddedSequence& emb, const Labels& labels, int k) {
  const Eigen::Index n = emb.embedding.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n || emb.true_timestamps.size() != n) {
    throw std::invalid_argument("summarize_clusters: label/timestamp count does not match the embedding");
  }
  WithinVideoClusters out;
  out.video_id = emb.video_id;
  out.k = k;
  out.labels = labels;
  out.centroids = Matrix::Zero(k, emb.embedding.cols());
  out.mean_timestamps = Vector::Zero(k);
  Vector counts = Vector::Zero(k);
  for (Eigen::Index t = 0; t < n; ++t) {
    const int l = labels[static_cast<std::size_t>(t)];
    if (l < 0 || l >= k) throw std::invalid_argument("summarize_clusters: label out of range");
    out.centroids.row(l) += emb.embedding.row(t);
    out.mean_timestamps(l) += emb.true_timestamps(t);
    counts(l) += 1.0;
  }
  for (int c = 0; c < k; ++c) {
    if (counts(c) == 0.0) throw std::invalid_argument("summarize_clusters: cluster " + std::to_string(c) + " is empty");
    out.centroids.row(c) /= counts(c);
    out.mean_timestamps(c) /= counts(c);
  }
  return out;
}

namespace {

// Renumbers clusters by first appearance in time.
Labels canonical_order(const Labels& labels, int k) {
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  Labels out(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) {
    int& r = remap[static_cast<std::size_t>(labels[t])];
    if (r < 0) r = next++;
    out[t] = r;
  }
  return out;
}

}  // namespace

WithinVideoClusters within_video_clustering(const EmbeddedSequence& emb, int k, const SimilarityConfig& cfg,
                                            std::uint64_t seed) {
  const Eigen::Index n = emb.embedding.rows();
  if (k < 1) throw std::invalid_argument("within_video_clustering: K must be >= 1");
  if (n < k) {
    throw std::invalid_argument("video '" + emb.video_id + "' has " + std::to_string(n) + " frames, fewer than K=" +
                                std::to_string(k));
  }
  if (k == 1) return summarize_clusters(emb, Labels(static_cast<std::size_t>(n), 0), 1);

  if (n <= kMaxClusteredFrames) {
    const Labels labels = spectral_cluster(similarity_matrix(emb, cfg), k, seed);
    return summarize_clusters(emb, canonical_order(labels, k), k);
  }

  const Eigen::Index stride = (n + kMaxClusteredFrames - 1) / kMaxClusteredFrames;
  const Eigen::Index kept = (n + stride - 1) / stride;
  EmbeddedSequence sub;
  sub.video_id = emb.video_id;
  sub.embedding.resize(kept, emb.embedding.cols());
  sub.true_timestamps.resize(kept);
  for (Eigen::Index r = 0; r < kept; ++r) {
    sub.embedding.row(r) = emb.embedding.row(r * stride);
    sub.true_timestamps(r) = emb.true_timestamps(r * stride);
  }
  const Labels sub_labels = spectral_cluster(similarity_matrix(sub, cfg), k, seed);
  Labels labels(static_cast<std::size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    Eigen::Index r = t / stride;
    if (r + 1 < kept && (r + 1) * stride - t < t - r * stride) ++r;
    labels[static_cast<std::size_t>(t)] = sub_labels[static_cast<std::size_t>(r)];
  }
  return summarize_clusters(emb, canonical_order(labels, k), k);
}

}  // namespace taec
