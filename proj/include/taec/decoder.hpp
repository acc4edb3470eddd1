#pragma once

#include "taec/embednet.hpp"
#include "taec/globalassign.hpp"
#include "taec/types.hpp"
#include "taec/videocluster.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace taec {

inline constexpr double kVarianceFloor = 1e-6;

enum class CovarianceMode { diagonal, full };

struct GaussianModel {
  CovarianceMode mode = CovarianceMode::diagonal;
  Matrix means;                   // K x E
  Matrix variances;               // K x E, diagonal mode
  std::vector<Matrix> covariances;  // K of E x E, full mode (ridge included)

  [[nodiscard]] int k() const { return static_cast<int>(means.rows()); }
  [[nodiscard]] Eigen::Index dim() const { return means.cols(); }
};

// Maximum-likelihood fit per global cluster; `points[k]` holds the frames of
// cluster k as rows. Diagonal variances are floored at kVarianceFloor, full
// covariances get kVarianceFloor * I added. Throws InvalidState for an
// empty cluster.
GaussianModel fit_gaussians(const std::vector<Matrix>& points, CovarianceMode mode = CovarianceMode::diagonal);

// Gathers the frames of every video by global cluster.
std::vector<Matrix> group_by_global_cluster(const std::vector<EmbeddedSequence>& embeddings,
                                            const std::vector<WithinVideoClusters>& clusters,
                                            const GlobalAssignment& assignment);

// T x K matrix of log N(e_t; mu_k, Sigma_k).
Matrix loglik_grid(const GaussianModel& model, const EmbeddedSequence& emb);

enum class OrderMode { video_wise, uniform };

std::string to_string(OrderMode m);
OrderMode parse_order_mode(const std::string& name);

// Allowed segment order of one video: a permutation of global cluster ids.
using OrderConstraint = std::vector<int>;

// video_wise: the video's clusters sorted by mean timestamp, mapped to global
// ids. uniform: global clusters sorted by their mean timestamp pooled over
// all frames of all videos; the same order for every video. Ties go to the
// lower global id.
std::vector<OrderConstraint> derive_orders(const std::vector<WithinVideoClusters>& clusters,
                                           const GlobalAssignment& assignment, OrderMode mode);

struct ViterbiPath {
  Labels labels;  // global cluster id per frame
  double score = 0.0;  // sum of grid entries along the path
};

// Best path that starts in order[0], ends in order.back(), and at every frame
// either stays or advances to the next cluster of the order (every cluster
// gets at least one frame). In the recursion staying wins ties, so among
// equal-score paths the one that advances earliest is returned. Throws
// std::invalid_argument when T < K.
ViterbiPath viterbi_decode(const Matrix& grid, const OrderConstraint& order);

struct SegmentationResult {
  std::vector<std::string> video_ids;
  std::vector<Labels> labels;
  std::vector<double> log_scores;
};

SegmentationResult decode_all(const std::vector<EmbeddedSequence>& embeddings, const GaussianModel& model,
                              const std::vector<OrderConstraint>& orders, int threads = 1);

// One line per video, T space-separated global cluster ids.
void write_segmentation(std::ostream& out, const SegmentationResult& result);
std::vector<Labels> read_segmentation(std::istream& in);

}  // namespace taec
