#include "taec/globalassign.hpp"

#include "taec/dataio.hpp"
#include "taec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace taec {

namespace {

// Shortest augmenting path Hungarian method with row/column potentials,
// O(n^3). Returns perm[row] = column.
std::vector<int> solve_assignment(const Matrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> match(static_cast<std::size_t>(n + 1), 0);  // column -> row, 1-based
  std::vector<int> way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) perm[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return perm;
}

double optimal_cost(const Matrix& cost) {
  if (cost.rows() == 0) return 0.0;
  return assignment_cost(cost, solve_assignment(cost));
}

}  // namespace

double assignment_cost(const Matrix& cost, const std::vector<int>& perm) {
  double total = 0.0;
  for (std::size_t r = 0; r < perm.size(); ++r) total += cost(static_cast<Eigen::Index>(r), perm[r]);
  return total;
}

std::vector<int> hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw std::invalid_argument("hungarian: cost matrix must be square, got " + std::to_string(cost.rows()) + "x" +
                                std::to_string(cost.cols()));
  }
  if (!cost.allFinite()) throw std::invalid_argument("hungarian: cost matrix has non-finite entries");
  const auto n = static_cast<int>(cost.rows());
  if (n == 0) return {};

  const std::vector<int> first = solve_assignment(cost);
  const double best = assignment_cost(cost, first);
  const double tol = 1e-9 * std::max(1.0, std::abs(best));

  // Lexicographic tie-break: fix rows one at a time to the smallest column
  // that still admits an optimal completion.
  std::vector<int> perm(static_cast<std::size_t>(n), -1);
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  double fixed = 0.0;
  for (int row = 0; row < n; ++row) {
    const int rest = n - row - 1;
    for (int col = 0; col < n; ++col) {
      if (taken[static_cast<std::size_t>(col)]) continue;
      Matrix sub(rest, rest);
      int sc = 0;
      for (int c = 0; c < n; ++c) {
        if (taken[static_cast<std::size_t>(c)] || c == col) continue;
        for (int r = 0; r < rest; ++r) sub(r, sc) = cost(row + 1 + r, c);
        ++sc;
      }
      const double total = fixed + cost(row, col) + optimal_cost(sub);
      if (total <= best + tol) {
        perm[static_cast<std::size_t>(row)] = col;
        taken[static_cast<std::size_t>(col)] = 1;
        fixed += cost(row, col);
        break;
      }
    }
    if (perm[static_cast<std::size_t>(row)] < 0) return first;  // only reachable through round-off
  }
  return perm;
}

std::string to_string(AssignStrategy s) {
  switch (s) {
    case AssignStrategy::multi_hub:
      return "multi_hub";
    case AssignStrategy::naive:
      return "naive";
    case AssignStrategy::brute_force:
      return "brute_force";
  }
  return "unknown";
}

AssignStrategy parse_strategy(const std::string& name) {
  if (name == "multi_hub") return AssignStrategy::multi_hub;
  if (name == "naive") return AssignStrategy::naive;
  if (name == "brute_force") return AssignStrategy::brute_force;
  throw std::invalid_argument("unknown assignment strategy '" + name + "' (expected multi_hub, naive or brute_force)");
}

std::vector<int> GlobalAssignment::global_of(int video) const {
  std::vector<int> out(members.size(), -1);
  for (std::size_t g = 0; g < members.size(); ++g) {
    out.at(static_cast<std::size_t>(members[g].at(static_cast<std::size_t>(video)))) = static_cast<int>(g);
  }
  return out;
}

CentroidTable centroid_table(const std::vector<WithinVideoClusters>& clusters) {
  CentroidTable table;
  table.reserve(clusters.size());
  for (const WithinVideoClusters& c : clusters) table.push_back(c.centroids);
  return table;
}

namespace {

void check_table(const CentroidTable& centroids) {
  if (centroids.empty()) throw std::invalid_argument("global assignment: no videos");
  const Eigen::Index k = centroids.front().rows();
  const Eigen::Index e = centroids.front().cols();
  if (k < 1) throw std::invalid_argument("global assignment: K must be >= 1");
  for (const Matrix& m : centroids) {
    if (m.rows() != k || m.cols() != e) {
      throw std::invalid_argument("global assignment: every video needs a K x E centroid matrix");
    }
    if (!m.allFinite()) throw std::invalid_argument("global assignment: non-finite centroid");
  }
}

Matrix distance_matrix(const Matrix& a, const Matrix& b) {
  Matrix d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).norm();
  }
  return d;
}

GlobalAssignment identity_assignment(int num_videos, int k, AssignStrategy strategy) {
  GlobalAssignment out;
  out.strategy = strategy;
  out.members.assign(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(num_videos)));
  for (int g = 0; g < k; ++g) {
    for (int n = 0; n < num_videos; ++n) out.members[static_cast<std::size_t>(g)][static_cast<std::size_t>(n)] = g;
  }
  return out;
}

}  // namespace

double clique_cost(const CentroidTable& centroids, const std::vector<std::vector<int>>& members) {
  double total = 0.0;
  for (const std::vector<int>& clique : members) {
    for (std::size_t a = 0; a < clique.size(); ++a) {
      for (std::size_t b = a + 1; b < clique.size(); ++b) {
        total += (centroids[a].row(clique[a]) - centroids[b].row(clique[b])).norm();
      }
    }
  }
  return total;
}

void check_partition(const GlobalAssignment& assignment, int num_videos, int k) {
  if (assignment.num_global() != k) throw std::invalid_argument("assignment does not have K cliques");
  for (int n = 0; n < num_videos; ++n) {
    std::vector<char> seen(static_cast<std::size_t>(k), 0);
    for (const std::vector<int>& clique : assignment.members) {
      if (static_cast<int>(clique.size()) != num_videos) {
        throw std::invalid_argument("clique does not have one member per video");
      }
      const int c = clique[static_cast<std::size_t>(n)];
      if (c < 0 || c >= k || seen[static_cast<std::size_t>(c)]) {
        throw std::invalid_argument("cliques do not partition the clusters of video " + std::to_string(n));
      }
      seen[static_cast<std::size_t>(c)] = 1;
    }
  }
}

GlobalAssignment multi_hub_assign(const CentroidTable& centroids) {
  check_table(centroids);
  const auto num_videos = static_cast<int>(centroids.size());
  const auto k = static_cast<int>(centroids.front().rows());
  if (num_videos == 1) return identity_assignment(1, k, AssignStrategy::multi_hub);

  GlobalAssignment best;
  best.strategy = AssignStrategy::multi_hub;
  best.cost = std::numeric_limits<double>::infinity();
  for (int hub = 0; hub < num_videos; ++hub) {
    std::vector<std::vector<int>> members(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(num_videos)));
    for (int g = 0; g < k; ++g) members[static_cast<std::size_t>(g)][static_cast<std::size_t>(hub)] = g;
    for (int n = 0; n < num_videos; ++n) {
      if (n == hub) continue;
      const std::vector<int> match = hungarian(distance_matrix(centroids[static_cast<std::size_t>(hub)],
                                                               centroids[static_cast<std::size_t>(n)]));
      for (int g = 0; g < k; ++g) {
        members[static_cast<std::size_t>(g)][static_cast<std::size_t>(n)] = match[static_cast<std::size_t>(g)];
      }
    }
    const double cost = clique_cost(centroids, members);
    if (cost < best.cost) {
      best.cost = cost;
      best.members = std::move(members);
    }
  }
  return best;
}

GlobalAssignment naive_assign(const std::vector<WithinVideoClusters>& clusters) {
  const CentroidTable table = centroid_table(clusters);
  check_table(table);
  const auto num_videos = static_cast<int>(clusters.size());
  const int k = clusters.front().k;
  GlobalAssignment out;
  out.strategy = AssignStrategy::naive;
  out.members.assign(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(num_videos)));
  for (int n = 0; n < num_videos; ++n) {
    const WithinVideoClusters& c = clusters[static_cast<std::size_t>(n)];
    if (c.k != k || c.mean_timestamps.size() != k) throw std::invalid_argument("naive_assign: videos differ in K");
    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return c.mean_timestamps(a) < c.mean_timestamps(b); });
    for (int g = 0; g < k; ++g) {
      out.members[static_cast<std::size_t>(g)][static_cast<std::size_t>(n)] = order[static_cast<std::size_t>(g)];
    }
  }
  out.cost = clique_cost(table, out.members);
  return out;
}

long long brute_force_candidate_count(int num_videos, int k) {
  long long fact = 1;
  for (int i = 2; i <= k; ++i) fact *= i;
  long long total = 1;
  for (int n = 1; n < num_videos; ++n) total *= fact;
  return total;
}

GlobalAssignment brute_force_assign(const CentroidTable& centroids) {
  check_table(centroids);
  const auto num_videos = static_cast<int>(centroids.size());
  const auto k = static_cast<int>(centroids.front().rows());
  if (num_videos > kBruteForceMaxVideos || k > kBruteForceMaxClusters) {
    throw ProblemTooLarge("brute_force_assign: N=" + std::to_string(num_videos) + ", K=" + std::to_string(k) +
                          " exceeds the exhaustive-search limit (N <= 4, K <= 4)");
  }

  std::vector<std::vector<int>> perms;
  std::vector<int> p(static_cast<std::size_t>(k));
  std::iota(p.begin(), p.end(), 0);
  do {
    perms.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));

  GlobalAssignment best = identity_assignment(num_videos, k, AssignStrategy::brute_force);
  best.cost = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> odometer(static_cast<std::size_t>(num_videos), 0);
  std::vector<std::vector<int>> members = best.members;
  while (true) {
    for (int n = 1; n < num_videos; ++n) {
      const std::vector<int>& perm = perms[odometer[static_cast<std::size_t>(n)]];
      for (int g = 0; g < k; ++g) {
        members[static_cast<std::size_t>(g)][static_cast<std::size_t>(n)] = perm[static_cast<std::size_t>(g)];
      }
    }
    const double cost = clique_cost(centroids, members);
    if (cost < best.cost) {
      best.cost = cost;
      best.members = members;
    }
    int n = num_videos - 1;
    while (n >= 1 && ++odometer[static_cast<std::size_t>(n)] == perms.size()) {
      odometer[static_cast<std::size_t>(n)] = 0;
      --n;
    }
    if (n < 1) break;
  }
  return best;
}

GlobalAssignment assign_clusters(const std::vector<WithinVideoClusters>& clusters, AssignStrategy strategy) {
  switch (strategy) {
    case AssignStrategy::naive:
      return naive_assign(clusters);
    case AssignStrategy::brute_force:
      return brute_force_assign(centroid_table(clusters));
    case AssignStrategy::multi_hub:
      break;
  }
  return multi_hub_assign(centroid_table(clusters));
}

void write_assignment(std::ostream& out, const GlobalAssignment& assignment, const std::vector<std::string>& video_ids) {
  const int num_videos = assignment.num_videos();
  if (static_cast<int>(video_ids.size()) != num_videos) {
    throw std::invalid_argument("write_assignment: video id count does not match the assignment");
  }
  out << "# global cluster assignment\n";
  out << "strategy " << to_string(assignment.strategy) << '\n';
  out << "cost " << format_number(assignment.cost) << '\n';
  out << "videos " << num_videos << '\n';
  out << "clusters " << assignment.num_global() << '\n';
  out << "# video_id within_cluster global_cluster\n";
  for (int n = 0; n < num_videos; ++n) {
    const std::vector<int> global = assignment.global_of(n);
    for (std::size_t c = 0; c < global.size(); ++c) {
      out << video_ids[static_cast<std::size_t>(n)] << ' ' << c << ' ' << global[c] << '\n';
    }
  }
}

GlobalAssignment read_assignment(std::istream& in, const std::vector<std::string>& video_ids) {
  GlobalAssignment out;
  int num_videos = -1;
  int k = -1;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key.front() == '#') continue;
    if (key == "strategy") {
      std::string s;
      ss >> s;
      out.strategy = parse_strategy(s);
    } else if (key == "cost") {
      ss >> out.cost;
    } else if (key == "videos") {
      ss >> num_videos;
    } else if (key == "clusters") {
      ss >> k;
      if (num_videos < 1 || k < 1) throw DataError("assignment file: bad header");
      out.members.assign(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(num_videos), -1));
    } else {
      int within = -1;
      int global = -1;
      if (!(ss >> within >> global) || out.members.empty()) throw DataError("assignment file: malformed line '" + line + "'");
      const auto it = std::find(video_ids.begin(), video_ids.end(), key);
      if (it == video_ids.end()) throw DataError("assignment file: unknown video '" + key + "'");
      if (global < 0 || global >= k || within < 0 || within >= k) throw DataError("assignment file: cluster id out of range");
      out.members[static_cast<std::size_t>(global)][static_cast<std::size_t>(it - video_ids.begin())] = within;
    }
  }
  if (static_cast<int>(video_ids.size()) != num_videos) throw DataError("assignment file: video count mismatch");
  try {
    check_partition(out, num_videos, k);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("assignment file: ") + e.what());
  }
  return out;
}

}  // namespace taec
