#include "taec/decoder.hpp"

#include "taec/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

using namespace taec;
using taec::test::random_matrix;

namespace {

// Exhaustive maximum over admissible paths: choose K-1 advance frames among
// 1..T-1.
double enumerate_best(const Matrix& grid, const OrderConstraint& order, int& paths) {
  const auto frames = static_cast<int>(grid.rows());
  const auto k = static_cast<int>(order.size());
  double best = -std::numeric_limits<double>::infinity();
  paths = 0;
  std::vector<int> starts(static_cast<std::size_t>(k), 0);
  std::function<void(int, int)> rec = [&](int seg, int from) {
    if (seg == k) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) {
        const int end = i + 1 < k ? starts[static_cast<std::size_t>(i + 1)] : frames;
        for (int t = starts[static_cast<std::size_t>(i)]; t < end; ++t) s += grid(t, order[static_cast<std::size_t>(i)]);
      }
      best = std::max(best, s);
      ++paths;
      return;
    }
    for (int t = from; t <= frames - (k - seg); ++t) {
      starts[static_cast<std::size_t>(seg)] = t;
      rec(seg + 1, t + 1);
    }
  };
  rec(1, 1);
  return best;
}

long binomial(int n, int r) {
  long out = 1;
  for (int i = 1; i <= r; ++i) out = out * (n - r + i) / i;
  return out;
}

bool follows_order(const Labels& labels, const OrderConstraint& order) {
  std::vector<int> seen;
  for (int l : labels) {
    if (seen.empty() || seen.back() != l) seen.push_back(l);
  }
  return seen == order;
}

WithinVideoClusters make_clusters(const Vector& times) {
  WithinVideoClusters c;
  c.k = static_cast<int>(times.size());
  c.mean_timestamps = times;
  c.centroids = Matrix::Zero(c.k, 1);
  for (int i = 0; i < c.k; ++i) c.labels.push_back(i);
  return c;
}

GlobalAssignment assignment_of(const std::vector<std::vector<int>>& members) {
  GlobalAssignment a;
  a.members = members;
  return a;
}

}  // namespace

TEST_CASE("fit_gaussians") {
  Matrix pts(2, 2);
  pts << 0, 0, 2, 2;
  const GaussianModel m = fit_gaussians({pts});
  CHECK(m.means.row(0) == RowVector::Ones(2));
  CHECK(m.variances.row(0) == RowVector::Ones(2));

  Matrix single(1, 3);
  single << 4, 5, 6;
  const GaussianModel s = fit_gaussians({single});
  CHECK((s.variances.array() == kVarianceFloor).all());

  CHECK_THROWS_AS(fit_gaussians({pts, Matrix(0, 2)}), InvalidState);
  try {
    fit_gaussians({pts, Matrix(0, 2)});
  } catch (const InvalidState& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }

  const GaussianModel full = fit_gaussians({pts}, CovarianceMode::full);
  REQUIRE(full.covariances.size() == 1);
  Matrix expect(2, 2);
  expect << 1 + kVarianceFloor, 1, 1, 1 + kVarianceFloor;
  CHECK(full.covariances[0].isApprox(expect, 1e-15));
}

TEST_CASE("log-likelihood grid against direct densities") {
  SUBCASE("standard normal at the mean") {
    GaussianModel m;
    m.means = Matrix::Zero(1, 1);
    m.variances = Matrix::Ones(1, 1);
    const EmbeddedSequence e{"v", Matrix::Zero(1, 1), Vector::Ones(1)};
    CHECK(loglik_grid(m, e)(0, 0) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  }

  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(40, 3, rng);
  const std::vector<Matrix> groups{x.topRows(15), x.bottomRows(25)};
  const EmbeddedSequence emb{"v", random_matrix(12, 3, rng, -2.0, 2.0), Vector::Ones(12)};

  SUBCASE("diagonal") {
    const GaussianModel m = fit_gaussians(groups);
    const Matrix grid = loglik_grid(m, emb);
    for (int t = 0; t < 12; ++t) {
      for (int k = 0; k < 2; ++k) {
        double density = 1.0;
        for (int d = 0; d < 3; ++d) {
          const double var = m.variances(k, d);
          const double z = emb.embedding(t, d) - m.means(k, d);
          density *= std::exp(-z * z / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
        }
        CHECK(std::abs(grid(t, k) - std::log(density)) <= 1e-9);
      }
    }
  }

  SUBCASE("full") {
    const GaussianModel m = fit_gaussians(groups, CovarianceMode::full);
    const Matrix grid = loglik_grid(m, emb);
    for (int k = 0; k < 2; ++k) {
      const Matrix& cov = m.covariances[static_cast<std::size_t>(k)];
      const Matrix inv = cov.inverse();
      const double det = cov.determinant();
      for (int t = 0; t < 12; ++t) {
        const Vector z = (emb.embedding.row(t) - m.means.row(k)).transpose();
        const double density =
            std::exp(-0.5 * z.dot(inv * z)) / std::sqrt(std::pow(2.0 * std::numbers::pi, 3) * det);
        CHECK(std::abs(grid(t, k) - std::log(density)) <= 1e-9);
      }
    }
  }

  SUBCASE("mean is the mode") {
    const GaussianModel m = fit_gaussians(groups);
    EmbeddedSequence probe{"p", Matrix(13, 3), Vector::Ones(13)};
    probe.embedding.row(0) = m.means.row(0);
    probe.embedding.bottomRows(12) = random_matrix(12, 3, rng);
    const Matrix grid = loglik_grid(m, probe);
    CHECK(grid(0, 0) >= grid.col(0).maxCoeff());
  }

  CHECK_THROWS_AS(loglik_grid(fit_gaussians(groups), EmbeddedSequence{"v", Matrix::Zero(2, 4), Vector::Ones(2)}),
                  std::invalid_argument);
}

TEST_CASE("shared covariance: row maximum at the matching mean") {
  GaussianModel m;
  m.means.resize(3, 2);
  m.means << 0, 0, 3, 0, 0, 3;
  m.variances = Matrix::Ones(3, 2);
  const EmbeddedSequence e{"v", m.means, Vector::Ones(3)};
  const Matrix grid = loglik_grid(m, e);
  for (int t = 0; t < 3; ++t) {
    Eigen::Index arg = 0;
    grid.row(t).maxCoeff(&arg);
    CHECK(arg == t);
  }
}

TEST_CASE("viterbi worked examples") {
  Matrix grid(3, 2);
  grid << 0, -1, 0, -1, -5, 0;
  const ViterbiPath p = viterbi_decode(grid, {0, 1});
  CHECK(p.labels == Labels{0, 0, 1});
  CHECK(p.score == 0.0);

  // T = K: the only admissible path
  const ViterbiPath forced = viterbi_decode(Matrix::Zero(3, 3), {2, 0, 1});
  CHECK(forced.labels == Labels{2, 0, 1});

  // the recursion keeps the predecessor in the same segment on ties, so
  // the backtracked path advances as early as possible
  const ViterbiPath tie = viterbi_decode(Matrix::Zero(4, 2), {1, 0});
  CHECK(tie.labels == Labels{1, 0, 0, 0});

  const ViterbiPath one = viterbi_decode(Matrix::Zero(5, 1), {0});
  CHECK(one.labels == Labels(5, 0));

  CHECK_THROWS_AS(viterbi_decode(Matrix::Zero(2, 3), {0, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(viterbi_decode(Matrix::Zero(4, 2), {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(viterbi_decode(Matrix::Zero(4, 2), {}), std::invalid_argument);
}

TEST_CASE("viterbi equals exhaustive enumeration") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> kd(1, 4);
    const int k = kd(rng);
    std::uniform_int_distribution<int> td(k, 12);
    const int frames = td(rng);
    const Matrix grid = random_matrix(frames, k, rng, -3.0, 0.0);
    OrderConstraint order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    int paths = 0;
    const double best = enumerate_best(grid, order, paths);
    CHECK(paths == binomial(frames - 1, k - 1));
    const ViterbiPath p = viterbi_decode(grid, order);
    CHECK(p.score == doctest::Approx(best).epsilon(1e-12));
    CHECK(follows_order(p.labels, order));
    double along = 0.0;
    for (int t = 0; t < frames; ++t) along += grid(t, p.labels[static_cast<std::size_t>(t)]);
    CHECK(along == doctest::Approx(p.score).epsilon(1e-12));
  }
}

TEST_CASE("derive_orders") {
  Vector times(3);
  times << 0.8, 0.2, 0.5;
  // within clusters 0,1,2 map to globals A=0, B=1, C=2
  const std::vector<WithinVideoClusters> one{make_clusters(times)};
  const GlobalAssignment identity = assignment_of({{0}, {1}, {2}});
  CHECK(derive_orders(one, identity, OrderMode::video_wise).front() == OrderConstraint{1, 2, 0});

  Vector forward(3);
  forward << 0.2, 0.5, 0.8;
  Vector reversed(3);
  reversed << 0.8, 0.5, 0.2;
  const std::vector<WithinVideoClusters> two{make_clusters(forward), make_clusters(reversed)};
  const GlobalAssignment same = assignment_of({{0, 0}, {1, 1}, {2, 2}});
  const std::vector<OrderConstraint> vw = derive_orders(two, same, OrderMode::video_wise);
  CHECK(vw[0] == OrderConstraint{0, 1, 2});
  CHECK(vw[1] == OrderConstraint{2, 1, 0});

  const std::vector<OrderConstraint> uni = derive_orders(two, same, OrderMode::uniform);
  CHECK(uni[0] == uni[1]);
  // symmetric timings tie at 0.5 for every global cluster: lower id first
  CHECK(uni[0] == OrderConstraint{0, 1, 2});

  Vector tied(2);
  tied << 0.5, 0.5;
  const std::vector<WithinVideoClusters> t1{make_clusters(tied)};
  CHECK(derive_orders(t1, assignment_of({{1}, {0}}), OrderMode::video_wise).front() == OrderConstraint{0, 1});

  CHECK_THROWS_AS(parse_order_mode("random"), std::invalid_argument);
}

TEST_CASE("decode_all on planted data") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.3);
  const std::vector<std::vector<int>> lengths{{20, 30, 25}, {35, 15, 30}, {25, 25, 25}};
  const std::vector<OrderConstraint> orders{{0, 1, 2}, {1, 0, 2}, {2, 1, 0}};
  Matrix protos(3, 2);
  protos << 0, 0, 4, 0, 0, 4;
  std::vector<EmbeddedSequence> embeddings;
  std::vector<Matrix> groups(3, Matrix(0, 2));
  std::vector<std::vector<int>> boundaries;
  for (std::size_t n = 0; n < 3; ++n) {
    const int total = std::accumulate(lengths[n].begin(), lengths[n].end(), 0);
    Matrix e(total, 2);
    int t = 0;
    boundaries.emplace_back();
    for (std::size_t s = 0; s < 3; ++s) {
      if (s > 0) boundaries.back().push_back(t);
      for (int i = 0; i < lengths[n][s]; ++i, ++t) {
        e.row(t) = protos.row(orders[n][s]) + RowVector::NullaryExpr(2, [&] { return noise(rng); });
      }
    }
    for (std::size_t s = 0, t0 = 0; s < 3; t0 += static_cast<std::size_t>(lengths[n][s]), ++s) {
      Matrix& g = groups[static_cast<std::size_t>(orders[n][s])];
      g.conservativeResize(g.rows() + lengths[n][s], 2);
      g.bottomRows(lengths[n][s]) = e.middleRows(static_cast<Eigen::Index>(t0), lengths[n][s]);
    }
    embeddings.push_back({"v" + std::to_string(n), e, relative_timestamps(total)});
  }
  const GaussianModel model = fit_gaussians(groups);
  const SegmentationResult r = decode_all(embeddings, model, orders, 1);
  for (std::size_t n = 0; n < 3; ++n) {
    CHECK(follows_order(r.labels[n], orders[n]));
    std::vector<int> found;
    for (std::size_t t = 1; t < r.labels[n].size(); ++t) {
      if (r.labels[n][t] != r.labels[n][t - 1]) found.push_back(static_cast<int>(t));
    }
    REQUIRE(found.size() == 2);
    for (std::size_t b = 0; b < 2; ++b) CHECK(std::abs(found[b] - boundaries[n][b]) <= 3);
  }

  const SegmentationResult again = decode_all(embeddings, model, orders, 3);
  CHECK(again.labels == r.labels);
  CHECK(again.log_scores == r.log_scores);

  const GaussianModel single = fit_gaussians({embeddings[0].embedding});
  const SegmentationResult k1 = decode_all({embeddings[0]}, single, {{0}}, 1);
  CHECK(k1.labels[0] == Labels(embeddings[0].embedding.rows(), 0));

  std::stringstream ss;
  write_segmentation(ss, r);
  CHECK(read_segmentation(ss) == r.labels);
  std::stringstream bad("0 1 x\n");
  CHECK_THROWS_AS(read_segmentation(bad), DataError);
}
