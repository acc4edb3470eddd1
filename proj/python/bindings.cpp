#include "taec/dataio.hpp"
#include "taec/decoder.hpp"
#include "taec/embednet.hpp"
#include "taec/errors.hpp"
#include "taec/globalassign.hpp"
#include "taec/metrics.hpp"
#include "taec/pipeline.hpp"
#include "taec/videocluster.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace taec;

namespace {

py::dict video_to_dict(const FeatureSequence& v) {
  py::dict d;
  d["video_id"] = v.video_id;
  d["features"] = v.features;
  d["labels"] = v.gt_labels ? py::cast(*v.gt_labels) : py::none();
  return d;
}

FeatureSequence video_from_dict(const py::dict& d) {
  FeatureSequence v;
  v.video_id = d["video_id"].cast<std::string>();
  v.features = d["features"].cast<Matrix>();
  if (d.contains("labels") && !d["labels"].is_none()) v.gt_labels = d["labels"].cast<Labels>();
  return v;
}

EmbeddedSequence embedded(const Matrix& embedding) {
  return {"video", embedding, relative_timestamps(embedding.rows())};
}

SimilarityConfig similarity_config(int neighbors, double sigma_prime, std::optional<double> sigma_spat, bool temporal) {
  SimilarityConfig c;
  c.nearest_neighbor = neighbors;
  c.sigma_prime = sigma_prime;
  c.fixed_sigma_spat = sigma_spat;
  c.temporal_kernel = temporal;
  c.validate();
  return c;
}

py::dict report_to_dict(const MetricsReport& r) {
  py::dict d;
  d["mof"] = r.mof;
  d["ciou"] = r.ciou;
  d["f1"] = r.f1;
  d["edit"] = r.edit;
  d["scope"] = to_string(r.scope);
  py::list videos;
  for (const VideoScores& v : r.per_video) {
    py::dict s;
    s["video_id"] = v.video_id;
    s["mof"] = v.mof;
    s["ciou"] = v.ciou;
    s["f1"] = v.f1;
    s["edit"] = v.edit;
    videos.append(s);
  }
  d["per_video"] = videos;
  return d;
}

}  // namespace

PYBIND11_MODULE(_taec, m) {
  m.doc() = "Unsupervised temporal action segmentation";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<InvalidState>(m, "InvalidState", PyExc_RuntimeError);
  py::register_exception<UndefinedMetric>(m, "UndefinedMetric", PyExc_ValueError);
  py::register_exception<ProblemTooLarge>(m, "ProblemTooLarge", PyExc_ValueError);

  m.def("receptive_field", &receptive_field, py::arg("layers"), py::arg("kernel_size"));

  m.def(
      "generate_synthetic",
      [](int videos, int actions, int dim, double separation, double noise, int min_length, int max_length,
         double perm_prob, std::uint64_t seed) {
        SynthConfig c;
        c.num_videos = videos;
        c.num_actions = actions;
        c.feature_dim = dim;
        c.separation = separation;
        c.noise_sigma = noise;
        c.min_segment_length = min_length;
        c.max_segment_length = max_length;
        c.order_permutation_prob = perm_prob;
        c.seed = seed;
        py::list out;
        for (const FeatureSequence& v : generate_synthetic(c)) out.append(video_to_dict(v));
        return out;
      },
      py::arg("videos") = 10, py::arg("actions") = 4, py::arg("dim") = 16, py::arg("separation") = 4.0,
      py::arg("noise") = 0.5, py::arg("min_length") = 20, py::arg("max_length") = 40, py::arg("perm_prob") = 0.5,
      py::arg("seed") = 0, "List of videos as dicts with video_id, features (T x D) and labels.");

  m.def(
      "save_dataset",
      [](const py::list& videos, const std::filesystem::path& dir) {
        Dataset data;
        for (const py::handle& v : videos) data.push_back(video_from_dict(v.cast<py::dict>()));
        return save_dataset(data, dir);
      },
      py::arg("videos"), py::arg("directory"), "Writes the videos and returns the manifest path.");

  m.def(
      "load_dataset",
      [](const std::filesystem::path& manifest) {
        py::list out;
        for (const FeatureSequence& v : load_dataset(manifest)) out.append(video_to_dict(v));
        return out;
      },
      py::arg("manifest"));

  m.def(
      "similarity_matrix",
      [](const Matrix& embedding, int neighbors, double sigma_prime, std::optional<double> sigma_spat, bool temporal) {
        return similarity_matrix(embedded(embedding), similarity_config(neighbors, sigma_prime, sigma_spat, temporal));
      },
      py::arg("embedding"), py::arg("neighbors") = 9, py::arg("sigma_prime") = 1.0 / 6.0,
      py::arg("sigma_spat") = py::none(), py::arg("temporal") = true);

  m.def(
      "within_video_clustering",
      [](const Matrix& embedding, int k, std::uint64_t seed, int neighbors, double sigma_prime,
         std::optional<double> sigma_spat, bool temporal) {
        const WithinVideoClusters c = within_video_clustering(
            embedded(embedding), k, similarity_config(neighbors, sigma_prime, sigma_spat, temporal), seed);
        return py::make_tuple(c.labels, c.centroids, c.mean_timestamps);
      },
      py::arg("embedding"), py::arg("k"), py::arg("seed") = 0, py::arg("neighbors") = 9,
      py::arg("sigma_prime") = 1.0 / 6.0, py::arg("sigma_spat") = py::none(), py::arg("temporal") = true,
      "Returns (labels, centroids, mean_timestamps).");

  m.def("hungarian", &hungarian, py::arg("cost"), "Minimum-cost permutation: row i is assigned column perm[i].");

  m.def(
      "assign_clusters",
      [](const CentroidTable& centroids, const std::string& strategy) {
        const AssignStrategy s = parse_strategy(strategy);
        if (s == AssignStrategy::naive) {
          throw std::invalid_argument("naive assignment needs cluster timestamps; use the pipeline");
        }
        const GlobalAssignment a = s == AssignStrategy::brute_force ? brute_force_assign(centroids)
                                                                    : multi_hub_assign(centroids);
        return py::make_tuple(a.members, a.cost);
      },
      py::arg("centroids"), py::arg("strategy") = "multi_hub",
      "Groups one K x E centroid matrix per video into K cliques; returns (members, cost).");

  m.def(
      "viterbi_decode",
      [](const Matrix& grid, const OrderConstraint& order) {
        const ViterbiPath p = viterbi_decode(grid, order);
        return py::make_tuple(p.labels, p.score);
      },
      py::arg("loglik"), py::arg("order"), "Returns (labels, score).");

  m.def("mof", &mof, py::arg("pred"), py::arg("gt"), py::arg("ignore_label") = kIgnoreLabel);
  m.def("ciou", &ciou, py::arg("pred"), py::arg("gt"), py::arg("ignore_label") = kIgnoreLabel);
  m.def("f1_score", &f1_score, py::arg("pred"), py::arg("gt"), py::arg("ignore_label") = kIgnoreLabel);
  m.def("edit_score", &edit_score, py::arg("pred"), py::arg("gt"), py::arg("ignore_label") = kIgnoreLabel);

  m.def(
      "evaluate",
      [](const std::vector<Labels>& pred, const std::vector<Labels>& gt, std::vector<std::string> ids,
         const std::string& scope) {
        if (ids.empty()) {
          for (std::size_t n = 0; n < gt.size(); ++n) ids.push_back("video_" + std::to_string(n));
        }
        return report_to_dict(evaluate(pred, gt, ids, parse_scope(scope)));
      },
      py::arg("pred"), py::arg("gt"), py::arg("video_ids") = std::vector<std::string>{},
      py::arg("scope") = "global", "Hungarian-matched MoF, cIoU, F1 and Edit.");

  m.def(
      "run_pipeline",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out_dir, int k, const std::string& variant,
         int epochs, double lambda_, const std::string& strategy, const std::string& order, const std::string& scope,
         std::uint64_t seed, int threads, bool resume, bool plots) {
        PipelineConfig c;
        c.manifest = manifest;
        c.out_dir = out_dir;
        c.k = k;
        c.embed.variant = parse_variant(variant);
        c.embed.epochs = epochs;
        c.embed.lambda = lambda_;
        c.strategy = parse_strategy(strategy);
        c.order = parse_order_mode(order);
        c.scope = parse_scope(scope);
        c.seed = seed;
        c.threads = threads;
        c.resume = resume;
        c.plots = plots;
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(c);
        }
        py::dict d;
        d["loss_history"] = r.loss_history;
        d["segments"] = r.segmentation.labels;
        d["report"] = r.report ? py::object(report_to_dict(*r.report)) : py::none();
        return d;
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("k") = 0, py::arg("variant") = "ssten", py::arg("epochs") = 40,
      py::arg("lambda_") = 0.01, py::arg("strategy") = "multi_hub", py::arg("order") = "video_wise",
      py::arg("scope") = "global", py::arg("seed") = 0, py::arg("threads") = 1, py::arg("resume") = false,
      py::arg("plots") = true, "Runs every stage and writes the artifacts under out_dir.");
}
