// Command-line front end. Every subcommand reads and writes fixed file names
// under --out DIR, so stages can be run one at a time or all at once.

#include "taec/dataio.hpp"
#include "taec/decoder.hpp"
#include "taec/embednet.hpp"
#include "taec/errors.hpp"
#include "taec/globalassign.hpp"
#include "taec/metrics.hpp"
#include "taec/pipeline.hpp"
#include "taec/svg.hpp"
#include "taec/videocluster.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace taec;

namespace {

constexpr int kExitInvalidArgument = 2;
constexpr int kExitDataError = 3;
constexpr int kExitNumerical = 4;

struct Options {
  std::string config;
  std::string out = ".";
  int threads = 1;
  std::uint64_t seed = 0;

  std::string data;
  std::string model;
  std::string embeddings;
  std::string clusters;
  std::string assignment;
  std::string segments;

  SynthConfig synth;

  std::string variant = "ssten";
  EmbedConfig embed;

  int k = 0;
  SimilarityConfig similarity;
  double sigma_spat = 0.0;
  bool no_temporal = false;

  std::string strategy = "multi_hub";
  std::string order = "video_wise";
  std::string covariance = "diagonal";
  std::string scope = "global";

  bool resume = false;
  bool no_plots = false;
  std::string video;
  bool similarity_plot = false;
};

fs::path out_file(const Options& o, const char* name) { return fs::path(o.out) / name; }

fs::path or_default(const std::string& given, const Options& o, const char* name) {
  return given.empty() ? out_file(o, name) : fs::path(given);
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "key=value file; keys are long option names");
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--threads", o.threads, "videos processed in parallel")->capture_default_str();
}

void add_seed(CLI::App* sub, Options& o) { sub->add_option("--seed", o.seed, "random seed")->capture_default_str(); }

void add_embed(CLI::App* sub, Options& o) {
  sub->add_option("--variant", o.variant, "ssten, tcn or mlp")->capture_default_str();
  sub->add_option("--hidden", o.embed.hidden_dim, "hidden channels H")->capture_default_str();
  sub->add_option("--layers", o.embed.layers_per_stage, "dilated residual layers per stage")->capture_default_str();
  sub->add_option("--kernel", o.embed.kernel_size, "temporal kernel size (odd)")->capture_default_str();
  sub->add_option("--lambda", o.embed.lambda, "reconstruction weight")->capture_default_str();
  sub->add_option("--dropout", o.embed.dropout, "dropout probability in residual layers")->capture_default_str();
  sub->add_option("--epochs", o.embed.epochs)->capture_default_str();
  sub->add_option("--lr", o.embed.learning_rate, "Adam learning rate")->capture_default_str();
}

void add_similarity(CLI::App* sub, Options& o) {
  sub->add_option("-k,--clusters-per-video", o.k, "K; 0 infers it from the ground truth")->capture_default_str();
  sub->add_option("--neighbors", o.similarity.nearest_neighbor, "m for local scaling")->capture_default_str();
  sub->add_option("--sigma-prime", o.similarity.sigma_prime, "temporal kernel width")->capture_default_str();
  sub->add_option("--sigma-spat", o.sigma_spat, "fixed spatial width (0 uses local scaling)")->capture_default_str();
  sub->add_flag("--no-temporal", o.no_temporal, "drop the temporal kernel");
}

void add_decode(CLI::App* sub, Options& o) {
  sub->add_option("--order", o.order, "video_wise or uniform")->capture_default_str();
  sub->add_option("--covariance", o.covariance, "diagonal or full")->capture_default_str();
}

void finish_similarity(Options& o) {
  if (o.sigma_spat < 0.0) throw std::invalid_argument("--sigma-spat must be >= 0");
  if (o.sigma_spat > 0.0) o.similarity.fixed_sigma_spat = o.sigma_spat;
  o.similarity.temporal_kernel = !o.no_temporal;
  o.similarity.validate();
}

void finish_embed(Options& o) {
  o.embed.variant = parse_variant(o.variant);
  o.embed.seed = o.seed;
}

CovarianceMode parse_covariance(const std::string& name) {
  if (name == "diagonal") return CovarianceMode::diagonal;
  if (name == "full") return CovarianceMode::full;
  throw std::invalid_argument("unknown covariance mode '" + name + "' (expected diagonal or full)");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Expands a key=value file into "--key=value" arguments.
std::vector<std::string> config_arguments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file '" + path.string() + "'");
  std::vector<std::string> args;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") {
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": bad key");
    }
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

// Arguments as CLI11 expects them (reversed), with the config file's entries
// placed right after the subcommand so explicit flags take precedence.
std::vector<std::string> expand_arguments(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config.empty() && !args.empty()) {
    const std::vector<std::string> extra = config_arguments(config);
    args.insert(args.begin() + 1, extra.begin(), extra.end());
  }
  std::reverse(args.begin(), args.end());
  return args;
}

void print_report(const MetricsReport& r) {
  std::cout << "MoF " << r.mof << "  cIoU " << r.ciou << "  F1 " << r.f1 << "  Edit " << r.edit << "  ("
            << to_string(r.scope) << " matching)\n";
}

void cmd_synth(Options& o) {
  const Dataset data = generate_synthetic(o.synth);
  const fs::path manifest = save_dataset(data, o.out);
  std::cout << "wrote " << data.size() << " videos, manifest " << manifest.string() << "\n";
}

void cmd_train(Options& o) {
  finish_embed(o);
  const Dataset data = load_dataset(o.data);
  if (data.empty()) throw DataError("dataset lists no videos");
  o.embed.input_dim = static_cast<int>(data.front().dim());
  const TrainResult r = train(data, o.embed);
  fs::create_directories(o.out);
  save_model(r.params, out_file(o, artifact::kModel));
  std::ostringstream loss;
  for (std::size_t e = 0; e < r.loss_history.size(); ++e) loss << e + 1 << ' ' << format_number(r.loss_history[e]) << '\n';
  write_text_file(out_file(o, artifact::kLoss), loss.str());
  if (!r.loss_history.empty()) {
    std::cout << "trained " << r.loss_history.size() << " epochs, loss " << r.loss_history.front() << " -> "
              << r.loss_history.back() << "\n";
  }
}

void cmd_embed(Options& o) {
  const ModelParams params = load_model(or_default(o.model, o, artifact::kModel));
  const Dataset data = load_dataset(o.data);
  save_embeddings(embed_dataset(params, data, o.threads), out_file(o, artifact::kEmbeddingsDir));
  std::cout << "embedded " << data.size() << " videos into " << out_file(o, artifact::kEmbeddingsDir).string() << "\n";
}

std::vector<EmbeddedSequence> embeddings_of(const Options& o) {
  return load_embeddings(or_default(o.embeddings, o, artifact::kEmbeddingsManifest));
}

std::vector<WithinVideoClusters> clusters_of(const Options& o, const std::vector<EmbeddedSequence>& emb) {
  std::istringstream in(read_text_file(or_default(o.clusters, o, artifact::kClusters)));
  return read_clusters(in, emb);
}

std::vector<std::string> ids_of(const std::vector<EmbeddedSequence>& emb) {
  std::vector<std::string> ids;
  for (const EmbeddedSequence& e : emb) ids.push_back(e.video_id);
  return ids;
}

GlobalAssignment assignment_of(const Options& o, const std::vector<EmbeddedSequence>& emb) {
  std::istringstream in(read_text_file(or_default(o.assignment, o, artifact::kAssignment)));
  return read_assignment(in, ids_of(emb));
}

void cmd_cluster(Options& o) {
  finish_similarity(o);
  if (o.k < 1) {
    if (o.data.empty()) throw std::invalid_argument("cluster: pass -k or --data with ground truth to infer it");
    o.k = count_classes(load_dataset(o.data));
  }
  const std::vector<EmbeddedSequence> emb = embeddings_of(o);
  const std::vector<WithinVideoClusters> clusters = cluster_videos(emb, o.k, o.similarity, o.seed, o.threads);
  std::ostringstream text;
  write_clusters(text, clusters);
  write_text_file(out_file(o, artifact::kClusters), text.str());
  std::cout << "clustered " << clusters.size() << " videos into K=" << o.k << "\n";
}

void cmd_assign(Options& o) {
  const std::vector<EmbeddedSequence> emb = embeddings_of(o);
  const GlobalAssignment a = assign_clusters(clusters_of(o, emb), parse_strategy(o.strategy));
  std::ostringstream text;
  write_assignment(text, a, ids_of(emb));
  write_text_file(out_file(o, artifact::kAssignment), text.str());
  std::cout << to_string(a.strategy) << " assignment, cost " << a.cost << "\n";
}

void cmd_decode(Options& o) {
  const std::vector<EmbeddedSequence> emb = embeddings_of(o);
  const std::vector<WithinVideoClusters> clusters = clusters_of(o, emb);
  const SegmentationResult r = segment_videos(emb, clusters, assignment_of(o, emb), parse_order_mode(o.order),
                                              parse_covariance(o.covariance), o.threads);
  std::ostringstream text;
  write_segmentation(text, r);
  write_text_file(out_file(o, artifact::kSegments), text.str());
  std::cout << "decoded " << r.labels.size() << " videos\n";
}

std::vector<Labels> segments_of(const Options& o, std::size_t expected) {
  std::istringstream in(read_text_file(or_default(o.segments, o, artifact::kSegments)));
  std::vector<Labels> labels = read_segmentation(in);
  if (labels.size() != expected) {
    throw DataError("segments file has " + std::to_string(labels.size()) + " videos, dataset " +
                    std::to_string(expected));
  }
  return labels;
}

void cmd_eval(Options& o) {
  const Dataset data = load_dataset(o.data);
  const std::vector<Labels> pred = segments_of(o, data.size());
  const MetricsReport r = evaluate(pred, ground_truth(data), video_ids(data), parse_scope(o.scope));
  std::ostringstream text;
  write_report(text, r);
  fs::create_directories(o.out);
  write_text_file(out_file(o, artifact::kReport), text.str());
  print_report(r);
}

void cmd_plot(Options& o) {
  fs::create_directories(o.out);
  if (o.similarity_plot) {
    finish_similarity(o);
    for (const EmbeddedSequence& e : embeddings_of(o)) {
      if (!o.video.empty() && e.video_id != o.video) continue;
      const fs::path path = out_file(o, ("similarity_" + e.video_id + ".svg").c_str());
      write_text_file(path, render_similarity_svg(similarity_matrix(e, o.similarity)));
      std::cout << "wrote " << path.string() << "\n";
    }
    return;
  }
  const Dataset data = load_dataset(o.data);
  std::vector<Labels> pred = segments_of(o, data.size());
  const bool labelled =
      std::all_of(data.begin(), data.end(), [](const FeatureSequence& v) { return v.gt_labels.has_value(); });
  if (labelled) pred = apply_mapping(pred, match_labels(pred, ground_truth(data), parse_scope(o.scope)));
  for (std::size_t n = 0; n < data.size(); ++n) {
    if (!o.video.empty() && data[n].video_id != o.video) continue;
    const std::string svg = labelled ? render_segmentation_svg(*data[n].gt_labels, {pred[n]}, default_palette(),
                                                               {"ground truth", "decoded"})
                                     : render_segmentation_svg(pred[n], {}, default_palette(), {"decoded"});
    const fs::path path = out_file(o, ("segmentation_" + data[n].video_id + ".svg").c_str());
    write_text_file(path, svg);
    std::cout << "wrote " << path.string() << "\n";
  }
}

void cmd_pipeline(Options& o) {
  finish_embed(o);
  finish_similarity(o);
  PipelineConfig c;
  c.manifest = o.data;
  c.out_dir = o.out;
  if (!o.model.empty()) c.model_path = o.model;
  c.embed = o.embed;
  c.similarity = o.similarity;
  c.k = o.k;
  c.strategy = parse_strategy(o.strategy);
  c.order = parse_order_mode(o.order);
  c.scope = parse_scope(o.scope);
  c.covariance = parse_covariance(o.covariance);
  c.seed = o.seed;
  c.threads = o.threads;
  c.resume = o.resume;
  c.plots = !o.no_plots;
  const PipelineResult r = run_pipeline(c);
  if (r.report) {
    print_report(*r.report);
  } else {
    std::cout << "segmented " << r.segmentation.labels.size() << " videos (no ground truth, no report)\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Unsupervised temporal action segmentation: embedding, clustering, assignment and decoding."};
  app.name("taec");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic activity dataset with planted labels");
  add_common(synth, o);
  synth->add_option("--videos", o.synth.num_videos)->capture_default_str();
  synth->add_option("--actions", o.synth.num_actions)->capture_default_str();
  synth->add_option("--dim", o.synth.feature_dim)->capture_default_str();
  synth->add_option("--separation", o.synth.separation, "minimum prototype distance")->capture_default_str();
  synth->add_option("--noise", o.synth.noise_sigma)->capture_default_str();
  synth->add_option("--min-length", o.synth.min_segment_length)->capture_default_str();
  synth->add_option("--max-length", o.synth.max_segment_length)->capture_default_str();
  synth->add_option("--perm-prob", o.synth.order_permutation_prob, "chance a video's order is permuted")
      ->capture_default_str();
  synth->add_option("--seed", o.synth.seed)->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "train the embedding network");
  add_common(train_cmd, o);
  add_seed(train_cmd, o);
  train_cmd->add_option("--data", o.data, "dataset manifest")->required();
  add_embed(train_cmd, o);

  auto* embed_cmd = app.add_subcommand("embed", "embed every video with a trained model");
  add_common(embed_cmd, o);
  embed_cmd->add_option("--data", o.data, "dataset manifest")->required();
  embed_cmd->add_option("--model", o.model, "checkpoint (default OUT/model.bin)");

  auto* cluster_cmd = app.add_subcommand("cluster", "spectral clustering within each video");
  add_common(cluster_cmd, o);
  add_seed(cluster_cmd, o);
  cluster_cmd->add_option("--embeddings", o.embeddings, "embeddings manifest (default OUT/embeddings/manifest.txt)");
  cluster_cmd->add_option("--data", o.data, "dataset manifest, used to infer K");
  add_similarity(cluster_cmd, o);

  auto* assign_cmd = app.add_subcommand("assign", "group within-video clusters into global clusters");
  add_common(assign_cmd, o);
  assign_cmd->add_option("--embeddings", o.embeddings);
  assign_cmd->add_option("--clusters", o.clusters, "default OUT/clusters.txt");
  assign_cmd->add_option("--strategy", o.strategy, "multi_hub, naive or brute_force")->capture_default_str();

  auto* decode_cmd = app.add_subcommand("decode", "order-constrained Viterbi decoding");
  add_common(decode_cmd, o);
  decode_cmd->add_option("--embeddings", o.embeddings);
  decode_cmd->add_option("--clusters", o.clusters);
  decode_cmd->add_option("--assignment", o.assignment, "default OUT/assignment.txt");
  add_decode(decode_cmd, o);

  auto* eval_cmd = app.add_subcommand("eval", "score a segmentation against ground truth");
  add_common(eval_cmd, o);
  eval_cmd->add_option("--data", o.data, "dataset manifest with labels")->required();
  eval_cmd->add_option("--segments", o.segments, "default OUT/segments.txt");
  eval_cmd->add_option("--scope", o.scope, "global or local Hungarian matching")->capture_default_str();

  auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage end to end");
  add_common(pipeline_cmd, o);
  add_seed(pipeline_cmd, o);
  pipeline_cmd->add_option("--data", o.data, "dataset manifest")->required();
  pipeline_cmd->add_option("--model", o.model, "use this checkpoint instead of training");
  add_embed(pipeline_cmd, o);
  add_similarity(pipeline_cmd, o);
  pipeline_cmd->add_option("--strategy", o.strategy, "multi_hub, naive or brute_force")->capture_default_str();
  add_decode(pipeline_cmd, o);
  pipeline_cmd->add_option("--scope", o.scope, "global or local Hungarian matching")->capture_default_str();
  pipeline_cmd->add_flag("--resume", o.resume, "reuse artifacts already in OUT");
  pipeline_cmd->add_flag("--no-plots", o.no_plots, "skip the SVG figures");

  auto* plot_cmd = app.add_subcommand("plot", "render segmentation or similarity figures");
  add_common(plot_cmd, o);
  plot_cmd->add_option("--data", o.data, "dataset manifest");
  plot_cmd->add_option("--segments", o.segments);
  plot_cmd->add_option("--embeddings", o.embeddings);
  plot_cmd->add_option("--scope", o.scope)->capture_default_str();
  plot_cmd->add_option("--video", o.video, "only this video");
  plot_cmd->add_flag("--similarity", o.similarity_plot, "plot frame similarity instead of segments");
  plot_cmd->add_option("--neighbors", o.similarity.nearest_neighbor)->capture_default_str();
  plot_cmd->add_option("--sigma-prime", o.similarity.sigma_prime)->capture_default_str();
  plot_cmd->add_option("--sigma-spat", o.sigma_spat)->capture_default_str();
  plot_cmd->add_flag("--no-temporal", o.no_temporal);

  try {
    std::vector<std::string> args;
    try {
      args = expand_arguments(argc, argv);
    } catch (const DataError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitDataError;
    }
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidArgument;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidArgument;
  }
  if (o.threads < 1) {
    std::cerr << "error: --threads must be >= 1\n";
    return kExitInvalidArgument;
  }

  try {
    if (*synth) cmd_synth(o);
    if (*train_cmd) cmd_train(o);
    if (*embed_cmd) cmd_embed(o);
    if (*cluster_cmd) cmd_cluster(o);
    if (*assign_cmd) cmd_assign(o);
    if (*decode_cmd) cmd_decode(o);
    if (*eval_cmd) cmd_eval(o);
    if (*pipeline_cmd) cmd_pipeline(o);
    if (*plot_cmd) cmd_plot(o);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const InvalidState& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const UndefinedMetric& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitInvalidArgument;
  } catch (const ProblemTooLarge& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitInvalidArgument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return 0;
}
