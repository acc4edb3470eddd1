#include "taec/pipeline.hpp"

#include "taec/errors.hpp"
#include "taec/parallel.hpp"
#include "taec/svg.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace taec {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  if (manifest.empty()) throw std::invalid_argument("pipeline: dataset manifest is required");
  if (out_dir.empty()) throw std::invalid_argument("pipeline: output directory is required");
  if (k < 0) throw std::invalid_argument("pipeline: K must be >= 1 (or 0 to use the number of classes)");
  if (threads < 1) throw std::invalid_argument("pipeline: threads must be >= 1");
  similarity.validate();
}

void run_stage(const std::string& name, const std::function<void()>& fn) {
  const std::string prefix = "stage '" + name + "': ";
  try {
    fn();
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const ProblemTooLarge& e) {
    throw ProblemTooLarge(prefix + e.what());
  } catch (const UndefinedMetric& e) {
    throw UndefinedMetric(prefix + e.what());
  } catch (const InvalidState& e) {
    throw InvalidState(prefix + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(prefix + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(prefix + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_classes(const Dataset& data) {
  std::set<int> classes;
  for (const FeatureSequence& v : data) {
    if (!v.gt_labels) throw DataError("video '" + v.video_id + "' has no labels, so K cannot be inferred; pass K");
    for (int l : *v.gt_labels) {
      if (l != kIgnoreLabel) classes.insert(l);
    }
  }
  if (classes.empty()) throw DataError("no labelled frames, so K cannot be inferred; pass K");
  return static_cast<int>(classes.size());
}

std::vector<EmbeddedSequence> embed_dataset(const ModelParams& params, const Dataset& data, int threads) {
  std::vector<EmbeddedSequence> out(data.size());
  parallel_for(data.size(), threads, [&](std::size_t n) { out[n] = embed(params, data[n]); });
  return out;
}

void save_embeddings(const std::vector<EmbeddedSequence>& embeddings, const fs::path& dir) {
  Dataset as_features;
  for (const EmbeddedSequence& e : embeddings) as_features.push_back({e.video_id, e.embedding, std::nullopt});
  save_dataset(as_features, dir);
}

std::vector<EmbeddedSequence> load_embeddings(const fs::path& manifest) {
  std::vector<EmbeddedSequence> out;
  for (FeatureSequence& v : load_dataset(manifest)) {
    const Eigen::Index frames = v.frames();
    out.push_back({v.video_id, std::move(v.features), relative_timestamps(frames)});
  }
  return out;
}

std::vector<WithinVideoClusters> cluster_videos(const std::vector<EmbeddedSequence>& embeddings, int k,
                                                const SimilarityConfig& cfg, std::uint64_t seed, int threads) {
  std::vector<WithinVideoClusters> out(embeddings.size());
  parallel_for(embeddings.size(), threads, [&](std::size_t n) {
    out[n] = within_video_clustering(embeddings[n], k, cfg, derive_seed(seed, n));
  });
  return out;
}

void write_clusters(std::ostream& out, const std::vector<WithinVideoClusters>& clusters) {
  for (const WithinVideoClusters& c : clusters) {
    out << c.video_id << ' ' << c.k;
    for (int l : c.labels) out << ' ' << l;
    out << '\n';
  }
}

std::vector<WithinVideoClusters> read_clusters(std::istream& in, const std::vector<EmbeddedSequence>& embeddings) {
  std::vector<WithinVideoClusters> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string id;
    int k = 0;
    if (!(ss >> id) || id.front() == '#') continue;
    if (!(ss >> k) || k < 1) throw DataError("clusters file: bad K for video '" + id + "'");
    Labels labels;
    int l = 0;
    while (ss >> l) labels.push_back(l);
    if (!ss.eof()) throw DataError("clusters file: non-integer label for video '" + id + "'");
    const std::size_t n = out.size();
    if (n >= embeddings.size() || embeddings[n].video_id != id) {
      throw DataError("clusters file: video '" + id + "' does not match the embeddings");
    }
    try {
      out.push_back(summarize_clusters(embeddings[n], labels, k));
    } catch (const std::invalid_argument& e) {
      throw DataError("clusters file, video '" + id + "': " + e.what());
    }
  }
  if (out.size() != embeddings.size()) throw DataError("clusters file: expected " + std::to_string(embeddings.size()) + " videos");
  return out;
}

SegmentationResult segment_videos(const std::vector<EmbeddedSequence>& embeddings,
                                  const std::vector<WithinVideoClusters>& clusters, const GlobalAssignment& assignment,
                                  OrderMode order, CovarianceMode covariance, int threads) {
  const GaussianModel model = fit_gaussians(group_by_global_cluster(embeddings, clusters, assignment), covariance);
  return decode_all(embeddings, model, derive_orders(clusters, assignment, order), threads);
}

std::vector<Labels> ground_truth(const Dataset& data) {
  std::vector<Labels> out;
  for (const FeatureSequence& v : data) {
    if (!v.gt_labels) throw DataError("video '" + v.video_id + "' has no ground-truth labels");
    out.push_back(*v.gt_labels);
  }
  return out;
}

std::vector<std::string> video_ids(const Dataset& data) {
  std::vector<std::string> out;
  for (const FeatureSequence& v : data) out.push_back(v.video_id);
  return out;
}

void write_figures(const fs::path& out_dir, const Dataset& data, const std::vector<EmbeddedSequence>& embeddings,
                   const PipelineResult& result, const SimilarityConfig& similarity,
                   const std::optional<std::vector<LabelMapping>>& mapping) {
  for (std::size_t n = 0; n < data.size(); ++n) {
    const std::vector<int> global = result.assignment.global_of(static_cast<int>(n));
    Labels clustered;
    for (int l : result.clusters[n].labels) clustered.push_back(global[static_cast<std::size_t>(l)]);
    std::vector<Labels> rows{clustered, result.segmentation.labels[n]};
    if (mapping) rows = apply_mapping(rows, {(*mapping)[mapping->size() == 1 ? 0 : n]});
    std::string svg;
    if (data[n].gt_labels) {
      svg = render_segmentation_svg(*data[n].gt_labels, rows, default_palette(), {"ground truth", "clusters", "decoded"});
    } else {
      svg = render_segmentation_svg(rows[0], {rows[1]}, default_palette(), {"clusters", "decoded"});
    }
    write_text_file(out_dir / ("segmentation_" + data[n].video_id + ".svg"), svg);
  }
  if (!embeddings.empty() && embeddings.front().embedding.rows() >= 2) {
    SimilarityConfig cfg = similarity;
    cfg.nearest_neighbor = std::min<int>(cfg.nearest_neighbor, static_cast<int>(embeddings.front().embedding.rows()) - 1);
    write_text_file(out_dir / ("similarity_" + embeddings.front().video_id + ".svg"),
                    render_similarity_svg(similarity_matrix(embeddings.front(), cfg)));
  }
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  PipelineResult result;
  Dataset data;
  run_stage("load", [&] {
    data = load_dataset(config.manifest);
    if (data.empty()) throw DataError("dataset '" + config.manifest.string() + "' lists no videos");
    fs::create_directories(config.out_dir);
  });
  const fs::path& out = config.out_dir;
  auto reuse = [&](const char* name) { return config.resume && fs::exists(out / name); };

  int k = config.k;
  if (k == 0) run_stage("load", [&] { k = count_classes(data); });

  ModelParams params;
  run_stage("train", [&] {
    if (config.model_path) {
      params = load_model(*config.model_path);
    } else if (reuse(artifact::kModel)) {
      params = load_model(out / artifact::kModel);
    } else {
      EmbedConfig ec = config.embed;
      ec.input_dim = static_cast<int>(data.front().dim());
      ec.seed = config.seed;
      TrainResult trained = train(data, ec);
      params = std::move(trained.params);
      result.loss_history = std::move(trained.loss_history);
      save_model(params, out / artifact::kModel);
      std::ostringstream loss;
      for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        loss << e + 1 << ' ' << format_number(result.loss_history[e]) << '\n';
      }
      write_text_file(out / artifact::kLoss, loss.str());
    }
  });

  // Later stages always read the saved embeddings back, so a resumed run sees
  // exactly the values a fresh run used.
  std::vector<EmbeddedSequence> embeddings;
  run_stage("embed", [&] {
    if (!reuse(artifact::kEmbeddingsManifest)) {
      save_embeddings(embed_dataset(params, data, config.threads), out / artifact::kEmbeddingsDir);
    }
    embeddings = load_embeddings(out / artifact::kEmbeddingsManifest);
    if (embeddings.size() != data.size()) throw DataError("saved embeddings do not match the dataset");
  });

  run_stage("cluster", [&] {
    if (reuse(artifact::kClusters)) {
      std::istringstream in(read_text_file(out / artifact::kClusters));
      result.clusters = read_clusters(in, embeddings);
    } else {
      result.clusters = cluster_videos(embeddings, k, config.similarity, config.seed, config.threads);
      std::ostringstream text;
      write_clusters(text, result.clusters);
      write_text_file(out / artifact::kClusters, text.str());
    }
  });

  const std::vector<std::string> ids = video_ids(data);
  run_stage("assign", [&] {
    if (reuse(artifact::kAssignment)) {
      std::istringstream in(read_text_file(out / artifact::kAssignment));
      result.assignment = read_assignment(in, ids);
    } else {
      result.assignment = assign_clusters(result.clusters, config.strategy);
      std::ostringstream text;
      write_assignment(text, result.assignment, ids);
      write_text_file(out / artifact::kAssignment, text.str());
    }
  });

  run_stage("decode", [&] {
    if (reuse(artifact::kSegments)) {
      std::istringstream in(read_text_file(out / artifact::kSegments));
      result.segmentation.labels = read_segmentation(in);
      result.segmentation.video_ids = ids;
      result.segmentation.log_scores.assign(ids.size(), std::numeric_limits<double>::quiet_NaN());
      if (result.segmentation.labels.size() != ids.size()) throw DataError("segments file does not match the dataset");
    } else {
      result.segmentation = segment_videos(embeddings, result.clusters, result.assignment, config.order,
                                           config.covariance, config.threads);
      std::ostringstream text;
      write_segmentation(text, result.segmentation);
      write_text_file(out / artifact::kSegments, text.str());
    }
  });

  const bool labelled = std::all_of(data.begin(), data.end(), [](const FeatureSequence& v) { return v.gt_labels.has_value(); });
  std::optional<std::vector<LabelMapping>> mapping;
  run_stage("evaluate", [&] {
    if (!labelled) return;
    const std::vector<Labels> gt = ground_truth(data);
    result.report = evaluate(result.segmentation.labels, gt, ids, config.scope);
    mapping = match_labels(result.segmentation.labels, gt, config.scope);
    std::ostringstream text;
    write_report(text, *result.report);
    write_text_file(out / artifact::kReport, text.str());
  });

  if (config.plots) {
    run_stage("plot", [&] { write_figures(out, data, embeddings, result, config.similarity, mapping); });
  }
  return result;
}

}  // namespace taec
