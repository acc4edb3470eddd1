#pragma once

// Grouping of the N x K within-video clusters into K global clusters
// (cliques holding exactly one cluster per video).

#include "taec/types.hpp"
#include "taec/videocluster.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace taec {

// Optimal linear assignment: perm[row] = column minimizing
// sum_row cost(row, perm[row]). Among optimal permutations the
// lexicographically smallest is returned. Throws std::invalid_argument for a
// non-square or non-finite matrix.
std::vector<int> hungarian(const Matrix& cost);

double assignment_cost(const Matrix& cost, const std::vector<int>& perm);

// One centroid matrix (K x E) per video.
using CentroidTable = std::vector<Matrix>;

CentroidTable centroid_table(const std::vector<WithinVideoClusters>& clusters);

enum class AssignStrategy { multi_hub, naive, brute_force };

std::string to_string(AssignStrategy s);
AssignStrategy parse_strategy(const std::string& name);

struct GlobalAssignment {
  // members[g][n] = within-video cluster of video n that belongs to global
  // cluster g.
  std::vector<std::vector<int>> members;
  double cost = 0.0;
  AssignStrategy strategy = AssignStrategy::multi_hub;

  [[nodiscard]] int num_global() const { return static_cast<int>(members.size()); }
  [[nodiscard]] int num_videos() const { return members.empty() ? 0 : static_cast<int>(members.front().size()); }
  // within-video cluster -> global cluster for video n
  [[nodiscard]] std::vector<int> global_of(int video) const;
};

// Sum over cliques of all pairwise Euclidean centroid distances.
double clique_cost(const CentroidTable& centroids, const std::vector<std::vector<int>>& members);

// Throws std::invalid_argument unless `assignment` partitions the N x K
// clusters into K cliques with one member per video.
void check_partition(const GlobalAssignment& assignment, int num_videos, int k);

// Every video in turn serves as the hub: the other videos are matched to it
// by Hungarian matching on centroid distances, hub cluster k plus its
// matches forms clique k, and the cheapest hub wins (lowest index on ties).
GlobalAssignment multi_hub_assign(const CentroidTable& centroids);

// Global cluster g = the g-th cluster of every video in order of mean
// timestamp (lower cluster index on ties).
GlobalAssignment naive_assign(const std::vector<WithinVideoClusters>& clusters);

inline constexpr int kBruteForceMaxVideos = 4;
inline constexpr int kBruteForceMaxClusters = 4;

// Exhaustive search over (K!)^(N-1) permutation products relative to video
// 0. Throws ProblemTooLarge beyond 4 videos or 4 clusters.
GlobalAssignment brute_force_assign(const CentroidTable& centroids);

// (K!)^(N-1)
long long brute_force_candidate_count(int num_videos, int k);

GlobalAssignment assign_clusters(const std::vector<WithinVideoClusters>& clusters, AssignStrategy strategy);

// Text dump: header lines, then one "video_id within global" triple per line.
void write_assignment(std::ostream& out, const GlobalAssignment& assignment, const std::vector<std::string>& video_ids);
GlobalAssignment read_assignment(std::istream& in, const std::vector<std::string>& video_ids);

}  // namespace taec
