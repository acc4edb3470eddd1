#include "taec/dataio.hpp"

#include "taec/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace taec {

namespace fs = std::filesystem;

void validate(const FeatureSequence& video) {
  if (video.frames() < 1) throw DataError("video '" + video.video_id + "' has no frames");
  if (video.dim() < 1) throw DataError("video '" + video.video_id + "' has zero feature dimension");
  if (!video.features.allFinite()) {
    throw DataError("video '" + video.video_id + "' contains non-finite features");
  }
  if (video.gt_labels && static_cast<Eigen::Index>(video.gt_labels->size()) != video.frames()) {
    throw DataError("video '" + video.video_id + "': " + std::to_string(video.gt_labels->size()) +
                    " labels for " + std::to_string(video.frames()) + " frames");
  }
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

std::vector<int> segment_order(const Labels& labels) {
  std::vector<int> order;
  for (int label : labels) {
    if (order.empty() || order.back() != label) order.push_back(label);
  }
  return order;
}

namespace {

bool parse_double(std::string_view token, double& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

Matrix sample_prototypes(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int k = cfg.num_actions;
  const int d = cfg.feature_dim;
  for (int attempt = 0; attempt < 100; ++attempt) {
    // uniform on the sphere of radius `separation`
    Matrix protos(k, d);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < d; ++j) protos(i, j) = normal(rng);
      const double norm = protos.row(i).norm();
      if (norm == 0.0) continue;
      protos.row(i) *= cfg.separation / norm;
    }
    bool ok = true;
    for (int a = 0; a < k && ok; ++a) {
      for (int b = a + 1; b < k && ok; ++b) ok = (protos.row(a) - protos.row(b)).norm() >= cfg.separation;
    }
    if (ok) return protos;
  }
  throw DataError("generate_synthetic: could not place " + std::to_string(k) +
                  " prototypes with separation " + format_number(cfg.separation) + " in dimension " +
                  std::to_string(d));
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) {
  if (cfg.num_videos < 1 || cfg.num_actions < 1 || cfg.feature_dim < 1) {
    throw std::invalid_argument("generate_synthetic: counts must be positive");
  }
  if (!(cfg.separation > 0.0)) throw std::invalid_argument("generate_synthetic: separation must be > 0");
  if (!(cfg.noise_sigma >= 0.0)) throw std::invalid_argument("generate_synthetic: noise sigma must be >= 0");
  if (!(cfg.order_permutation_prob >= 0.0 && cfg.order_permutation_prob <= 1.0)) {
    throw std::invalid_argument("generate_synthetic: order permutation probability must lie in [0,1]");
  }
  if (cfg.min_segment_length < 1 || cfg.max_segment_length < cfg.min_segment_length) {
    throw std::invalid_argument("generate_synthetic: invalid segment length range");
  }

  std::mt19937_64 rng(cfg.seed);
  const Matrix prototypes = sample_prototypes(cfg, rng);
  const int k = cfg.num_actions;

  std::uniform_int_distribution<int> length_dist(cfg.min_segment_length, cfg.max_segment_length);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset data;
  data.reserve(static_cast<std::size_t>(cfg.num_videos));
  for (int n = 0; n < cfg.num_videos; ++n) {
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    if (k > 1 && unit(rng) < cfg.order_permutation_prob) {
      std::uniform_int_distribution<int> swaps_dist(1, k - 1);
      std::uniform_int_distribution<int> pos_dist(0, k - 2);
      const int swaps = swaps_dist(rng);
      for (int s = 0; s < swaps; ++s) {
        const auto p = static_cast<std::size_t>(pos_dist(rng));
        std::swap(order[p], order[p + 1]);
      }
    }

    Labels labels;
    for (int action : order) {
      const int len = length_dist(rng);
      labels.insert(labels.end(), static_cast<std::size_t>(len), action);
    }
    const auto frames = static_cast<Eigen::Index>(labels.size());

    Matrix raw(frames, cfg.feature_dim);
    for (Eigen::Index t = 0; t < frames; ++t) {
      raw.row(t) = prototypes.row(labels[static_cast<std::size_t>(t)]);
      for (int j = 0; j < cfg.feature_dim; ++j) raw(t, j) += cfg.noise_sigma * noise(rng);
    }

    Matrix smoothed(frames, cfg.feature_dim);
    for (Eigen::Index t = 0; t < frames; ++t) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, t - 1);
      const Eigen::Index hi = std::min<Eigen::Index>(frames - 1, t + 1);
      smoothed.row(t) = raw.middleRows(lo, hi - lo + 1).colwise().mean();
    }
    smoothed = smoothed.unaryExpr([](double v) {
      double r = 0.0;
      parse_double(format_number(v), r);
      return r;
    });

    FeatureSequence video;
    char id[32];
    std::snprintf(id, sizeof(id), "video_%03d", n);
    video.video_id = id;
    video.features = std::move(smoothed);
    video.gt_labels = std::move(labels);
    data.push_back(std::move(video));
  }
  return data;
}

Matrix read_feature_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string token;
    while (ss >> token) {
      double v = 0.0;
      if (!parse_double(token, v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric value '" + token + "'");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(rows.front().size()) + " values, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("feature file " + path.string() + " is empty");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

Labels read_label_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file " + path.string());
  Labels labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    int v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    std::string extra;
    if (ec != std::errc() || ptr != token.data() + token.size() || (ss >> extra)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected one integer label");
    }
    labels.push_back(v);
  }
  return labels;
}

void write_feature_file(const fs::path& path, const Matrix& features) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature file " + path.string());
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_number(features(t, j));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void write_label_file(const fs::path& path, const Labels& labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write label file " + path.string());
  for (int l : labels) out << l << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

Dataset load_dataset(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path.string());
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
  };

  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string id;
    std::string feat;
    std::string lab;
    if (!(ss >> id) || id.front() == '#') continue;
    if (!(ss >> feat)) {
      throw DataError(manifest_path.string() + ":" + std::to_string(line_no) + ": missing feature path");
    }
    FeatureSequence video;
    video.video_id = id;
    video.features = read_feature_file(resolve(feat));
    if (ss >> lab) {
      video.gt_labels = read_label_file(resolve(lab));
      if (static_cast<Eigen::Index>(video.gt_labels->size()) != video.frames()) {
        throw DataError("video '" + id + "': label file has " + std::to_string(video.gt_labels->size()) +
                        " lines but features have " + std::to_string(video.frames()) + " frames");
      }
    }
    validate(video);
    if (!data.empty() && data.front().dim() != video.dim()) {
      throw DataError("video '" + id + "' has feature dimension " + std::to_string(video.dim()) +
                      ", expected " + std::to_string(data.front().dim()));
    }
    data.push_back(std::move(video));
  }
  if (data.empty()) throw DataError("manifest " + manifest_path.string() + " lists no videos");
  return data;
}

fs::path save_dataset(const Dataset& data, const fs::path& dir, const std::string& manifest_name) {
  fs::create_directories(dir);
  const fs::path manifest = dir / manifest_name;
  std::ofstream out(manifest);
  if (!out) throw DataError("cannot write manifest " + manifest.string());
  for (const FeatureSequence& video : data) {
    const std::string feat = video.video_id + ".feat";
    write_feature_file(dir / feat, video.features);
    out << video.video_id << ' ' << feat;
    if (video.gt_labels) {
      const std::string lab = video.video_id + ".labels";
      write_label_file(dir / lab, *video.gt_labels);
      out << ' ' << lab;
    }
    out << '\n';
  }
  return manifest;
}

}  // namespace taec
