#include <doctest.h>

#include "taec/errors.hpp"
#include "taec/pipeline.hpp"
#include "taec/svg.hpp"

#include <filesystem>
#include <regex>
#include <set>
#include <sstream>

using namespace taec;
namespace fs = std::filesystem;

namespace {

struct BandRect {
  int x;
  int width;
  std::string fill;
};

// Rectangles of each band group, in document order.
std::vector<std::vector<BandRect>> band_rects(const std::string& svg) {
  std::vector<std::vector<BandRect>> bands;
  std::istringstream in(svg);
  std::string line;
  bool inside = false;
  const std::regex rect(R"re(<rect x="(\d+)" y="0" width="(\d+)" height="\d+" fill="([^"]+)")re");
  while (std::getline(in, line)) {
    if (line.rfind("<g class=\"band\"", 0) == 0) {
      bands.emplace_back();
      inside = true;
    } else if (line == "</g>") {
      inside = false;
    } else if (inside) {
      std::smatch m;
      REQUIRE(std::regex_search(line, m, rect));
      bands.back().push_back({std::stoi(m[1]), std::stoi(m[2]), m[3]});
    }
  }
  return bands;
}

std::vector<std::string> heat_fills(const std::string& svg) {
  std::vector<std::string> fills;
  const std::regex fill(R"re(width="1" height="1" fill="(#[0-9a-f]{6})")re");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), fill); it != std::sregex_iterator(); ++it) {
    fills.push_back((*it)[1]);
  }
  return fills;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("taec_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PipelineConfig small_config(const fs::path& manifest, const fs::path& out) {
  PipelineConfig c;
  c.manifest = manifest;
  c.out_dir = out;
  c.embed.hidden_dim = 8;
  c.embed.layers_per_stage = 2;
  c.embed.epochs = 3;
  c.seed = 5;
  return c;
}

fs::path small_dataset(const std::string& name) {
  SynthConfig s;
  s.num_videos = 4;
  s.num_actions = 3;
  s.feature_dim = 6;
  s.min_segment_length = 8;
  s.max_segment_length = 12;
  s.seed = 9;
  return save_dataset(generate_synthetic(s), fresh_dir(name) / "data");
}

}  // namespace

TEST_CASE("segmentation svg tiles every band over all frames") {
  const Labels gt{0, 0, 0, 1, 1, 2, 2, 2, 2, -1};
  const Labels pred{1, 1, 1, 1, 0, 0, 0, 2, 2, 2};
  const std::string svg = render_segmentation_svg(gt, {pred});
  CHECK(svg.rfind("<svg", 0) == 0);
  const auto bands = band_rects(svg);
  REQUIRE(bands.size() == 2);
  for (const auto& band : bands) {
    int next = 0;
    for (const BandRect& r : band) {
      CHECK(r.x == next);
      CHECK(r.width > 0);
      next += r.width;
    }
    CHECK(next == 10);
  }
  CHECK(bands[0].size() == 4);
  CHECK(bands[1].size() == 3);

  std::set<std::string> colours;
  for (const auto& band : bands) {
    for (const BandRect& r : band) colours.insert(r.fill);
  }
  CHECK(colours.size() <= 4);  // three classes plus the ignored frame
  CHECK(bands[0].back().fill == kUnlabeledColor);
  CHECK(svg.find("unlabeled") != std::string::npos);
  CHECK(svg.find("class 2") != std::string::npos);
}

TEST_CASE("segmentation svg options and errors") {
  const Labels gt{0, 0, 1};
  CHECK(band_rects(render_segmentation_svg(gt, {})).size() == 1);
  const std::string named = render_segmentation_svg(gt, {gt}, default_palette(), {"truth & co", "ours"});
  CHECK(named.find("truth &amp; co") != std::string::npos);
  CHECK_THROWS_AS(render_segmentation_svg({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(render_segmentation_svg(gt, {Labels{0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(render_segmentation_svg(gt, {gt}, default_palette(), {"only one"}), std::invalid_argument);
}

TEST_CASE("similarity svg maps values to gray levels") {
  const std::vector<std::string> eye = heat_fills(render_similarity_svg(Matrix::Identity(3, 3)));
  REQUIRE(eye.size() == 9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(eye[static_cast<std::size_t>(3 * i + j)] == (i == j ? "#000000" : "#ffffff"));
  }
  for (const std::string& f : heat_fills(render_similarity_svg(Matrix::Ones(4, 4)))) CHECK(f == "#000000");

  Matrix blocks = Matrix::Zero(4, 4);
  blocks.topLeftCorner(2, 2).setOnes();
  blocks.bottomRightCorner(2, 2).setConstant(0.5);
  const std::vector<std::string> half = heat_fills(render_similarity_svg(blocks, 2));
  REQUIRE(half.size() == 4);
  CHECK(half[0] == "#000000");
  CHECK(half[1] == "#ffffff");
  CHECK(half[3] == "#808080");

  CHECK_THROWS_AS(render_similarity_svg(Matrix::Zero(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(render_similarity_svg(Matrix(0, 0)), std::invalid_argument);
  CHECK_THROWS_AS(render_similarity_svg(Matrix::Ones(2, 2), 0), std::invalid_argument);
}

TEST_CASE("run_stage prefixes the message and keeps the type") {
  try {
    run_stage("decode", [] { throw DataError("broken"); });
    FAIL("no exception");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()) == "stage 'decode': broken");
  }
  CHECK_THROWS_AS(run_stage("x", [] { throw NumericalError("nan"); }), NumericalError);
  CHECK_THROWS_AS(run_stage("x", [] { throw std::invalid_argument("k"); }), std::invalid_argument);
  CHECK_THROWS_AS(run_stage("x", [] { throw ProblemTooLarge("n"); }), ProblemTooLarge);
  CHECK_NOTHROW(run_stage("x", [] {}));
}

TEST_CASE("clusters file round trip and validation") {
  const fs::path manifest = small_dataset("clusters");
  const Dataset data = load_dataset(manifest);
  std::vector<EmbeddedSequence> emb;
  for (const FeatureSequence& v : data) emb.push_back({v.video_id, v.features, relative_timestamps(v.frames())});
  const std::vector<WithinVideoClusters> clusters = cluster_videos(emb, 3, SimilarityConfig{}, 1, 2);
  std::ostringstream out;
  write_clusters(out, clusters);
  std::istringstream in(out.str());
  const std::vector<WithinVideoClusters> back = read_clusters(in, emb);
  REQUIRE(back.size() == clusters.size());
  for (std::size_t n = 0; n < back.size(); ++n) {
    CHECK(back[n].labels == clusters[n].labels);
    CHECK((back[n].centroids - clusters[n].centroids).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(cluster_videos(emb, 3, SimilarityConfig{}, 1, 1)[2].labels == clusters[2].labels);

  std::istringstream missing("video_000 3 0 1\n");
  CHECK_THROWS_AS(read_clusters(missing, emb), DataError);
  std::istringstream wrong_id("nope 3 0\n");
  CHECK_THROWS_AS(read_clusters(wrong_id, emb), DataError);
  CHECK(count_classes(data) == 3);
}

TEST_CASE("pipeline is deterministic and resumes from its artifacts") {
  const fs::path manifest = small_dataset("determinism");
  const fs::path root = manifest.parent_path().parent_path();
  const PipelineResult a = run_pipeline(small_config(manifest, root / "a"));
  PipelineConfig threaded = small_config(manifest, root / "b");
  threaded.threads = 3;
  const PipelineResult b = run_pipeline(threaded);
  REQUIRE(a.report);
  REQUIRE(b.report);
  for (const char* name : {artifact::kClusters, artifact::kAssignment, artifact::kSegments, artifact::kReport}) {
    CHECK_MESSAGE(read_text_file(root / "a" / name) == read_text_file(root / "b" / name), name);
  }
  CHECK(a.loss_history.size() == 3);
  CHECK(fs::exists(root / "a" / artifact::kModel));
  CHECK(fs::exists(root / "a" / "segmentation_video_000.svg"));
  CHECK(fs::exists(root / "a" / "similarity_video_000.svg"));

  PipelineConfig resumed = small_config(manifest, root / "a");
  resumed.resume = true;
  const PipelineResult c = run_pipeline(resumed);
  CHECK(c.loss_history.empty());
  CHECK(c.segmentation.labels == a.segmentation.labels);
  CHECK(read_text_file(root / "a" / artifact::kReport) == read_text_file(root / "b" / artifact::kReport));

  PipelineConfig from_model = small_config(manifest, root / "c");
  from_model.model_path = root / "a" / artifact::kModel;
  from_model.plots = false;
  const PipelineResult d = run_pipeline(from_model);
  CHECK(d.segmentation.labels == a.segmentation.labels);
  CHECK_FALSE(fs::exists(root / "c" / "similarity_video_000.svg"));
}

TEST_CASE("pipeline errors name the stage") {
  const fs::path root = fresh_dir("errors");
  PipelineConfig c = small_config(root / "missing.txt", root / "out");
  try {
    run_pipeline(c);
    FAIL("no exception");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).rfind("stage 'load': ", 0) == 0);
  }
  c.threads = 0;
  CHECK_THROWS_AS(run_pipeline(c), std::invalid_argument);
  c.threads = 1;
  c.k = -1;
  CHECK_THROWS_AS(run_pipeline(c), std::invalid_argument);
}
