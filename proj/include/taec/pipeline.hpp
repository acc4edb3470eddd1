#pragma once

// End-to-end orchestration: train -> embed -> within-video clustering ->
// global assignment -> Gaussian fit and order -> decoding -> evaluation.
// Every stage writes its result under the output directory and, when
// resuming, is read back instead of recomputed.

#include "taec/dataio.hpp"
#include "taec/decoder.hpp"
#include "taec/embednet.hpp"
#include "taec/globalassign.hpp"
#include "taec/metrics.hpp"
#include "taec/videocluster.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace taec {

// File names inside the output directory.
namespace artifact {
inline constexpr const char* kModel = "model.bin";
inline constexpr const char* kLoss = "loss.txt";
inline constexpr const char* kEmbeddingsDir = "embeddings";
inline constexpr const char* kEmbeddingsManifest = "embeddings/manifest.txt";
inline constexpr const char* kClusters = "clusters.txt";
inline constexpr const char* kAssignment = "assignment.txt";
inline constexpr const char* kSegments = "segments.txt";
inline constexpr const char* kReport = "report.txt";
}  // namespace artifact

struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  // Use this checkpoint instead of training.
  std::optional<std::filesystem::path> model_path;
  EmbedConfig embed;
  SimilarityConfig similarity;
  int k = 0;  // 0: number of ground-truth classes
  AssignStrategy strategy = AssignStrategy::multi_hub;
  OrderMode order = OrderMode::video_wise;
  MatchingScope scope = MatchingScope::global;
  CovarianceMode covariance = CovarianceMode::diagonal;
  std::uint64_t seed = 0;
  int threads = 1;
  bool resume = false;  // reuse artifacts already present in out_dir
  bool plots = true;

  void validate() const;
};

struct PipelineResult {
  std::vector<double> loss_history;
  std::vector<WithinVideoClusters> clusters;
  GlobalAssignment assignment;
  SegmentationResult segmentation;
  std::optional<MetricsReport> report;  // present when every video has labels
};

// Runs `fn`, re-throwing any library error with "stage '<name>': " prefixed
// while keeping its type.
void run_stage(const std::string& name, const std::function<void()>& fn);

// Number of distinct ground-truth classes; throws DataError if a video has
// no labels.
int count_classes(const Dataset& data);

std::vector<EmbeddedSequence> embed_dataset(const ModelParams& params, const Dataset& data, int threads = 1);

// Embedding matrices in the feature file format plus a manifest; timestamps
// are implied by the frame count.
void save_embeddings(const std::vector<EmbeddedSequence>& embeddings, const std::filesystem::path& dir);
std::vector<EmbeddedSequence> load_embeddings(const std::filesystem::path& manifest);

// Video n is clustered with seed derive_seed(seed, n).
std::vector<WithinVideoClusters> cluster_videos(const std::vector<EmbeddedSequence>& embeddings, int k,
                                                const SimilarityConfig& cfg, std::uint64_t seed, int threads = 1);

// "video_id K l_1 ... l_T" per line. Reading recomputes centroids and mean
// timestamps from the embeddings.
void write_clusters(std::ostream& out, const std::vector<WithinVideoClusters>& clusters);
std::vector<WithinVideoClusters> read_clusters(std::istream& in, const std::vector<EmbeddedSequence>& embeddings);

SegmentationResult segment_videos(const std::vector<EmbeddedSequence>& embeddings,
                                  const std::vector<WithinVideoClusters>& clusters, const GlobalAssignment& assignment,
                                  OrderMode order, CovarianceMode covariance, int threads = 1);

std::vector<Labels> ground_truth(const Dataset& data);
std::vector<std::string> video_ids(const Dataset& data);

// Per-video segmentation figures (ground truth, clusters, decoding; predicted
// ids mapped to classes when `mapping` is given) and a similarity heatmap of
// the first video.
void write_figures(const std::filesystem::path& out_dir, const Dataset& data,
                   const std::vector<EmbeddedSequence>& embeddings, const PipelineResult& result,
                   const SimilarityConfig& similarity, const std::optional<std::vector<LabelMapping>>& mapping);

PipelineResult run_pipeline(const PipelineConfig& config);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace taec
