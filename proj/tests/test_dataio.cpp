#include "taec/dataio.hpp"

#include "taec/errors.hpp"
#include "taec/metrics.hpp"
#include "taec/videocluster.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace taec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("taec_dataio_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synthetic generator basics") {
  SynthConfig cfg;
  cfg.num_videos = 6;
  cfg.num_actions = 4;
  cfg.feature_dim = 8;
  const Dataset data = generate_synthetic(cfg);
  REQUIRE(data.size() == 6);
  for (const FeatureSequence& v : data) {
    CHECK_NOTHROW(validate(v));
    REQUIRE(v.gt_labels);
    CHECK(v.dim() == 8);
    CHECK(v.frames() >= 4 * cfg.min_segment_length);
    CHECK(v.frames() <= 4 * cfg.max_segment_length);
    std::vector<int> order = segment_order(*v.gt_labels);
    CHECK(order.size() == 4);
    std::sort(order.begin(), order.end());
    CHECK(order == std::vector<int>{0, 1, 2, 3});
  }
  CHECK(data[0].video_id == "video_000");
}

TEST_CASE("p = 0 keeps the canonical order") {
  SynthConfig cfg;
  cfg.order_permutation_prob = 0.0;
  for (const FeatureSequence& v : generate_synthetic(cfg)) {
    CHECK(segment_order(*v.gt_labels) == std::vector<int>{0, 1, 2, 3});
  }
}

TEST_CASE("p = 1 permutes every video") {
  SynthConfig cfg;
  cfg.order_permutation_prob = 1.0;
  cfg.num_videos = 20;
  int permuted = 0;
  for (const FeatureSequence& v : generate_synthetic(cfg)) {
    permuted += segment_order(*v.gt_labels) != std::vector<int>{0, 1, 2, 3} ? 1 : 0;
  }
  // adjacent swaps can cancel, but most videos end up out of order
  CHECK(permuted >= 10);
}

TEST_CASE("noise-free frames are constant away from borders") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.num_videos = 3;
  for (const FeatureSequence& v : generate_synthetic(cfg)) {
    const Labels& gt = *v.gt_labels;
    int differing = 0;
    int boundaries = 0;
    for (Eigen::Index t = 1; t < v.frames(); ++t) {
      const auto i = static_cast<std::size_t>(t);
      if (gt[i] != gt[i - 1]) {
        ++boundaries;
        continue;
      }
      if (v.features.row(t) != v.features.row(t - 1)) ++differing;
    }
    // each boundary perturbs one frame on either side, giving at most two
    // unequal neighbouring pairs inside segments
    CHECK(differing <= 2 * boundaries);
  }
}

TEST_CASE("prototype separation is honoured") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.min_segment_length = cfg.max_segment_length = 10;
  const Dataset data = generate_synthetic(cfg);
  // frame 5 of each segment is untouched by smoothing
  std::vector<RowVector> protos(4);
  const FeatureSequence& v = data[0];
  for (int s = 0; s < 4; ++s) protos[static_cast<std::size_t>((*v.gt_labels)[static_cast<std::size_t>(s * 10 + 5)])] = v.features.row(s * 10 + 5);
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) CHECK((protos[a] - protos[b]).norm() >= cfg.separation - 1e-5);
  }
}

TEST_CASE("infeasible separation") {
  SynthConfig cfg;
  cfg.feature_dim = 1;
  cfg.num_actions = 4;
  cfg.separation = 10.0;  // four points on a 1-D "sphere" of radius 10 cannot be 10 apart
  CHECK_THROWS_AS(generate_synthetic(cfg), DataError);
  cfg = SynthConfig{};
  cfg.order_permutation_prob = 1.5;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
  cfg = SynthConfig{};
  cfg.separation = 0.0;
  CHECK_THROWS_AS(generate_synthetic(cfg), std::invalid_argument);
}

TEST_CASE("generator is deterministic") {
  SynthConfig cfg;
  cfg.seed = 99;
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  save_dataset(generate_synthetic(cfg), a);
  save_dataset(generate_synthetic(cfg), b);
  for (const auto& entry : fs::directory_iterator(a)) {
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("save/load round trip is bitwise") {
  SynthConfig cfg;
  cfg.num_videos = 3;
  const Dataset data = generate_synthetic(cfg);
  const fs::path dir = scratch("roundtrip");
  const fs::path manifest = save_dataset(data, dir);
  const Dataset back = load_dataset(manifest);
  REQUIRE(back.size() == data.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    CHECK(back[n].video_id == data[n].video_id);
    CHECK(back[n].features == data[n].features);
    CHECK(back[n].gt_labels == data[n].gt_labels);
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest loading") {
  const fs::path dir = scratch("manifest");
  write_text(dir / "a.feat", "1 2 3 4\n5 6 7 8\n");
  write_text(dir / "b.feat", "0 0 0 0\n");
  write_text(dir / "a.labels", "0\n-1\n");
  write_text(dir / "manifest.txt", "# two videos\na a.feat a.labels\n\nb b.feat\n");
  const Dataset data = load_dataset(dir / "manifest.txt");
  REQUIRE(data.size() == 2);
  CHECK(data[0].dim() == 4);
  CHECK(data[1].dim() == 4);
  CHECK(data[0].features(1, 2) == 7.0);
  CHECK(*data[0].gt_labels == Labels{0, -1});
  CHECK_FALSE(data[1].gt_labels);

  SUBCASE("wrong label count names the video") {
    write_text(dir / "a.labels", "0\n");
    try {
      load_dataset(dir / "manifest.txt");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
  }
  SUBCASE("dimension mismatch") {
    write_text(dir / "b.feat", "0 0 0\n");
    CHECK_THROWS_AS(load_dataset(dir / "manifest.txt"), DataError);
  }
  SUBCASE("non-numeric content") {
    write_text(dir / "b.feat", "0 x 0 0\n");
    CHECK_THROWS_AS(load_dataset(dir / "manifest.txt"), DataError);
  }
  SUBCASE("ragged rows") {
    write_text(dir / "a.feat", "1 2 3 4\n5 6 7\n");
    CHECK_THROWS_AS(load_dataset(dir / "manifest.txt"), DataError);
  }
  SUBCASE("missing file") {
    fs::remove(dir / "b.feat");
    CHECK_THROWS_AS(load_dataset(dir / "manifest.txt"), DataError);
    CHECK_THROWS_AS(load_dataset(dir / "nope.txt"), DataError);
  }
  fs::remove_all(dir);
}

TEST_CASE("number format") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.333333333");
  CHECK(format_number(-2.0) == "-2");
}

TEST_CASE("planted ground truth is recoverable by per-video kmeans") {
  SynthConfig cfg;
  cfg.separation = 5.0;
  cfg.noise_sigma = 0.5;
  const Dataset data = generate_synthetic(cfg);
  std::vector<Labels> pred;
  std::vector<Labels> gt;
  std::vector<std::string> ids;
  for (const FeatureSequence& v : data) {
    pred.push_back(kmeans(v.features, cfg.num_actions, 1, 10).labels);
    gt.push_back(*v.gt_labels);
    ids.push_back(v.video_id);
  }
  CHECK(evaluate(pred, gt, ids, MatchingScope::local).mof >= 95.0);
}
