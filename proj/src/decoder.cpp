#include "taec/decoder.hpp"

#include "taec/errors.hpp"
#include "taec/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace taec {

GaussianModel fit_gaussians(const std::vector<Matrix>& points, CovarianceMode mode) {
  if (points.empty()) throw std::invalid_argument("fit_gaussians: no clusters");
  const Eigen::Index dim = points.front().cols();
  const auto k = static_cast<Eigen::Index>(points.size());
  GaussianModel model;
  model.mode = mode;
  model.means.resize(k, dim);
  model.variances.resize(k, dim);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Matrix& x = points[static_cast<std::size_t>(c)];
    if (x.rows() == 0) throw InvalidState("fit_gaussians: global cluster " + std::to_string(c) + " has no frames");
    if (x.cols() != dim) throw std::invalid_argument("fit_gaussians: clusters differ in dimension");
    const RowVector mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    const double n = static_cast<double>(x.rows());
    model.means.row(c) = mean;
    model.variances.row(c) = (centered.array().square().colwise().sum() / n).cwiseMax(kVarianceFloor);
    if (mode == CovarianceMode::full) {
      Matrix cov = centered.transpose() * centered / n;
      cov.diagonal().array() += kVarianceFloor;
      model.covariances.push_back(std::move(cov));
    }
  }
  return model;
}

std::vector<Matrix> group_by_global_cluster(const std::vector<EmbeddedSequence>& embeddings,
                                            const std::vector<WithinVideoClusters>& clusters,
                                            const GlobalAssignment& assignment) {
  if (embeddings.size() != clusters.size() || static_cast<int>(clusters.size()) != assignment.num_videos()) {
    throw std::invalid_argument("group_by_global_cluster: video counts differ");
  }
  const int k = assignment.num_global();
  const Eigen::Index dim = embeddings.empty() ? 0 : embeddings.front().embedding.cols();
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
  std::vector<std::vector<int>> maps;
  for (std::size_t n = 0; n < clusters.size(); ++n) {
    maps.push_back(assignment.global_of(static_cast<int>(n)));
    for (int l : clusters[n].labels) ++counts[static_cast<std::size_t>(maps.back()[static_cast<std::size_t>(l)])];
  }
  std::vector<Matrix> grouped;
  for (int g = 0; g < k; ++g) grouped.emplace_back(counts[static_cast<std::size_t>(g)], dim);
  std::vector<Eigen::Index> fill(static_cast<std::size_t>(k), 0);
  for (std::size_t n = 0; n < clusters.size(); ++n) {
    const Matrix& e = embeddings[n].embedding;
    if (static_cast<Eigen::Index>(clusters[n].labels.size()) != e.rows()) {
      throw std::invalid_argument("group_by_global_cluster: label count mismatch for video '" + embeddings[n].video_id +
                                  "'");
    }
    for (Eigen::Index t = 0; t < e.rows(); ++t) {
      const auto g = static_cast<std::size_t>(maps[n][static_cast<std::size_t>(clusters[n].labels[static_cast<std::size_t>(t)])]);
      grouped[g].row(fill[g]++) = e.row(t);
    }
  }
  return grouped;
}

Matrix loglik_grid(const GaussianModel& model, const EmbeddedSequence& emb) {
  const Matrix& x = emb.embedding;
  if (x.cols() != model.dim()) {
    throw std::invalid_argument("loglik_grid: embedding dimension " + std::to_string(x.cols()) +
                                " does not match the model's " + std::to_string(model.dim()));
  }
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const Eigen::Index k = model.k();
  Matrix grid(x.rows(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const RowVector mu = model.means.row(c);
    if (model.mode == CovarianceMode::diagonal) {
      const RowVector var = model.variances.row(c);
      const double log_norm = -0.5 * (static_cast<double>(x.cols()) * log2pi + var.array().log().sum());
      const RowVector inv = var.cwiseInverse();
      for (Eigen::Index t = 0; t < x.rows(); ++t) {
        grid(t, c) = log_norm - 0.5 * ((x.row(t) - mu).array().square() * inv.array()).sum();
      }
    } else {
      const Eigen::LLT<Matrix> llt(model.covariances.at(static_cast<std::size_t>(c)));
      if (llt.info() != Eigen::Success) throw NumericalError("loglik_grid: covariance is not positive definite");
      const Matrix l = llt.matrixL();
      const double log_det = 2.0 * l.diagonal().array().log().sum();
      const double log_norm = -0.5 * (static_cast<double>(x.cols()) * log2pi + log_det);
      const Matrix centered = (x.rowwise() - mu).transpose();
      const Matrix solved = llt.matrixL().solve(centered);
      for (Eigen::Index t = 0; t < x.rows(); ++t) grid(t, c) = log_norm - 0.5 * solved.col(t).squaredNorm();
    }
  }
  return grid;
}

std::string to_string(OrderMode m) { return m == OrderMode::uniform ? "uniform" : "video_wise"; }

OrderMode parse_order_mode(const std::string& name) {
  if (name == "video_wise") return OrderMode::video_wise;
  if (name == "uniform") return OrderMode::uniform;
  throw std::invalid_argument("unknown order mode '" + name + "' (expected video_wise or uniform)");
}

namespace {

OrderConstraint sort_by_time(const std::vector<double>& times, const std::vector<int>& ids) {
  std::vector<std::size_t> idx(times.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (times[a] != times[b]) return times[a] < times[b];
    return ids[a] < ids[b];
  });
  OrderConstraint order;
  for (std::size_t i : idx) order.push_back(ids[i]);
  return order;
}

}  // namespace

std::vector<OrderConstraint> derive_orders(const std::vector<WithinVideoClusters>& clusters,
                                           const GlobalAssignment& assignment, OrderMode mode) {
  if (static_cast<int>(clusters.size()) != assignment.num_videos()) {
    throw std::invalid_argument("derive_orders: assignment does not cover every video");
  }
  const int k = assignment.num_global();
  std::vector<OrderConstraint> orders;
  if (mode == OrderMode::video_wise) {
    for (std::size_t n = 0; n < clusters.size(); ++n) {
      const WithinVideoClusters& c = clusters[n];
      if (c.k != k) throw std::invalid_argument("derive_orders: video '" + c.video_id + "' has a different K");
      const std::vector<int> global = assignment.global_of(static_cast<int>(n));
      std::vector<double> times(static_cast<std::size_t>(k));
      for (int w = 0; w < k; ++w) times[static_cast<std::size_t>(w)] = c.mean_timestamps(w);
      orders.push_back(sort_by_time(times, global));
    }
    return orders;
  }

  // pooled mean timestamp of each global cluster: size-weighted cluster means
  std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
  std::vector<double> count(static_cast<std::size_t>(k), 0.0);
  for (std::size_t n = 0; n < clusters.size(); ++n) {
    const std::vector<int> global = assignment.global_of(static_cast<int>(n));
    const std::vector<Eigen::Index> sizes = clusters[n].cluster_sizes();
    for (int w = 0; w < k; ++w) {
      const auto g = static_cast<std::size_t>(global[static_cast<std::size_t>(w)]);
      const auto size = static_cast<double>(sizes[static_cast<std::size_t>(w)]);
      sum[g] += size * clusters[n].mean_timestamps(w);
      count[g] += size;
    }
  }
  std::vector<double> times(static_cast<std::size_t>(k));
  std::vector<int> ids(static_cast<std::size_t>(k));
  for (int g = 0; g < k; ++g) {
    times[static_cast<std::size_t>(g)] = count[static_cast<std::size_t>(g)] > 0 ? sum[static_cast<std::size_t>(g)] / count[static_cast<std::size_t>(g)] : 0.0;
    ids[static_cast<std::size_t>(g)] = g;
  }
  orders.assign(clusters.size(), sort_by_time(times, ids));
  return orders;
}

ViterbiPath viterbi_decode(const Matrix& grid, const OrderConstraint& order) {
  const Eigen::Index frames = grid.rows();
  const auto k = static_cast<Eigen::Index>(order.size());
  if (k < 1) throw std::invalid_argument("viterbi_decode: empty order");
  if (frames < k) {
    throw std::invalid_argument("viterbi_decode: " + std::to_string(frames) + " frames cannot hold " +
                                std::to_string(k) + " ordered segments");
  }
  for (int g : order) {
    if (g < 0 || g >= grid.cols()) throw std::invalid_argument("viterbi_decode: order refers to a missing cluster");
  }
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();

  // score(t, i): best path over frames 0..t ending in order position i
  Matrix score = Matrix::Constant(frames, k, neg_inf);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> advanced(frames, k);
  advanced.setConstant(false);
  score(0, 0) = grid(0, order[0]);
  for (Eigen::Index t = 1; t < frames; ++t) {
    const Eigen::Index hi = std::min(t, k - 1);
    for (Eigen::Index i = 0; i <= hi; ++i) {
      const double stay = score(t - 1, i);
      const double advance = i > 0 ? score(t - 1, i - 1) : neg_inf;
      const bool take_advance = advance > stay;
      advanced(t, i) = take_advance;
      score(t, i) = (take_advance ? advance : stay) + grid(t, order[static_cast<std::size_t>(i)]);
    }
  }

  ViterbiPath path;
  path.score = score(frames - 1, k - 1);
  path.labels.resize(static_cast<std::size_t>(frames));
  Eigen::Index i = k - 1;
  for (Eigen::Index t = frames - 1; t >= 0; --t) {
    path.labels[static_cast<std::size_t>(t)] = order[static_cast<std::size_t>(i)];
    if (t > 0 && advanced(t, i)) --i;
  }
  return path;
}

SegmentationResult decode_all(const std::vector<EmbeddedSequence>& embeddings, const GaussianModel& model,
                              const std::vector<OrderConstraint>& orders, int threads) {
  if (embeddings.size() != orders.size()) throw std::invalid_argument("decode_all: one order per video required");
  SegmentationResult result;
  result.video_ids.resize(embeddings.size());
  result.labels.resize(embeddings.size());
  result.log_scores.resize(embeddings.size());
  parallel_for(embeddings.size(), threads, [&](std::size_t n) {
    ViterbiPath path = viterbi_decode(loglik_grid(model, embeddings[n]), orders[n]);
    result.video_ids[n] = embeddings[n].video_id;
    result.labels[n] = std::move(path.labels);
    result.log_scores[n] = path.score;
  });
  return result;
}

void write_segmentation(std::ostream& out, const SegmentationResult& result) {
  for (const Labels& labels : result.labels) {
    for (std::size_t t = 0; t < labels.size(); ++t) {
      if (t > 0) out << ' ';
      out << labels[t];
    }
    out << '\n';
  }
}

std::vector<Labels> read_segmentation(std::istream& in) {
  std::vector<Labels> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    Labels labels;
    int v = 0;
    while (ss >> v) labels.push_back(v);
    if (!ss.eof()) throw DataError("segmentation file: non-integer label");
    out.push_back(std::move(labels));
  }
  return out;
}

}  // namespace taec
