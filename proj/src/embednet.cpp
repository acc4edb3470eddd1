#include "taec/embednet.hpp"

#include "taec/errors.hpp"
#include "taec/seqgrad.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace taec {

namespace sg = seqgrad;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::ssten:
      return "ssten";
    case Variant::tcn:
      return "tcn";
    case Variant::mlp:
      return "mlp";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "ssten") return Variant::ssten;
  if (name == "tcn") return Variant::tcn;
  if (name == "mlp") return Variant::mlp;
  throw std::invalid_argument("unknown embedding variant '" + name + "' (expected ssten, tcn or mlp)");
}

void EmbedConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("EmbedConfig: input_dim must be >= 1");
  if (hidden_dim < 1) throw std::invalid_argument("EmbedConfig: hidden_dim must be >= 1");
  if (variant != Variant::mlp) {
    if (layers_per_stage < 1) throw std::invalid_argument("EmbedConfig: layers_per_stage must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) {
      throw std::invalid_argument("EmbedConfig: kernel_size must be odd and >= 1");
    }
    if (layers_per_stage > 30) throw std::invalid_argument("EmbedConfig: layers_per_stage too large");
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("EmbedConfig: lambda must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("EmbedConfig: dropout must lie in [0,1)");
  if (epochs < 0) throw std::invalid_argument("EmbedConfig: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("EmbedConfig: learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("EmbedConfig: Adam decay rates must lie in [0,1)");
  }
  if (!(adam_epsilon > 0.0)) throw std::invalid_argument("EmbedConfig: adam_epsilon must be > 0");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : tensors) n += static_cast<std::size_t>(p.value.size());
  return n;
}

const Matrix& ModelParams::tensor(const std::string& name) const {
  for (const Parameter& p : tensors) {
    if (p.name == name) return p.value;
  }
  throw std::out_of_range("no tensor named '" + name + "'");
}

long long receptive_field(int q, int r) {
  if (q < 1 || r < 1 || q > 60) throw std::invalid_argument("receptive_field: need 1 <= q <= 60 and r >= 1");
  return 1 + static_cast<long long>(r - 1) * ((1LL << q) - 1);
}

Vector relative_timestamps(Eigen::Index frames) {
  Vector s(frames);
  for (Eigen::Index t = 0; t < frames; ++t) s(t) = static_cast<double>(t + 1) / static_cast<double>(frames);
  return s;
}

namespace {

// Shapes of every tensor, in the order the network consumes them.
struct TensorSpec {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index fan_in;
};

void add_affine(std::vector<TensorSpec>& specs, const std::string& prefix, Eigen::Index in, Eigen::Index out,
                Eigen::Index taps = 1) {
  specs.push_back({prefix + ".weight", taps * in, out, taps * in});
  specs.push_back({prefix + ".bias", 1, out, taps * in});
}

void add_stage(std::vector<TensorSpec>& specs, const std::string& prefix, Eigen::Index in, const EmbedConfig& c) {
  const Eigen::Index h = c.hidden_dim;
  add_affine(specs, prefix + ".in", in, h);
  for (int q = 0; q < c.layers_per_stage; ++q) {
    const std::string layer = prefix + ".layer" + std::to_string(q);
    add_affine(specs, layer + ".dilated", h, h, c.kernel_size);
    add_affine(specs, layer + ".pointwise", h, h);
  }
}

std::vector<TensorSpec> architecture(const EmbedConfig& c) {
  std::vector<TensorSpec> specs;
  const Eigen::Index d = c.input_dim;
  const Eigen::Index h = c.hidden_dim;
  if (c.variant == Variant::mlp) {
    add_affine(specs, "mlp.fc1", d, h);
    add_affine(specs, "mlp.fc2", h, h);
    add_affine(specs, "mlp.timestamp", h, 1);
    return specs;
  }
  add_stage(specs, "enc1", d, c);
  add_affine(specs, "enc1.timestamp", h, 1);
  add_stage(specs, "enc2", h + 1, c);
  add_affine(specs, "enc2.timestamp", h, 1);
  if (c.variant == Variant::ssten) {
    add_stage(specs, "dec1", h + 1, c);
    add_stage(specs, "dec2", h, c);
    add_affine(specs, "dec2.out", h, d);
  }
  return specs;
}

void check_compatible(const ModelParams& params) {
  const std::vector<TensorSpec> specs = architecture(params.config);
  if (specs.size() != params.tensors.size()) {
    throw std::invalid_argument("model has " + std::to_string(params.tensors.size()) + " tensors, architecture needs " +
                                std::to_string(specs.size()));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const Matrix& m = params.tensors[i].value;
    if (params.tensors[i].name != specs[i].name || m.rows() != specs[i].rows || m.cols() != specs[i].cols) {
      throw std::invalid_argument("tensor '" + params.tensors[i].name + "' does not match the architecture");
    }
  }
  const auto d = static_cast<Eigen::Index>(params.config.input_dim);
  if (params.feature_mean.size() != d || params.feature_scale.size() != d) {
    throw std::invalid_argument("normalization statistics do not match input_dim");
  }
}

// Records the network on a tape. Parameters are consumed in architecture
// order.
class NetworkBuilder {
 public:
  NetworkBuilder(sg::Tape& tape, const ModelParams& params, bool params_require_grad, std::mt19937_64* dropout_rng)
      : tape_(tape), config_(params.config), dropout_rng_(dropout_rng) {
    for (const Parameter& p : params.tensors) vars_.push_back(tape_.leaf(p.value, params_require_grad));
  }

  const std::vector<sg::Var>& parameters() const { return vars_; }

  struct Outputs {
    sg::Var reconstruction;
    std::vector<sg::Var> timestamps;
    sg::Var embedding;
  };

  Outputs run(sg::Var x) {
    Outputs out;
    if (config_.variant == Variant::mlp) {
      sg::Var h = sg::relu(affine(x));
      h = sg::relu(affine(h));
      sg::Var s = affine(h);
      out.timestamps.push_back(s);
      out.embedding = sg::concat_channels(h, s);
      return out;
    }
    sg::Var h1 = stage(x);
    sg::Var s1 = affine(h1);
    sg::Var z1 = sg::concat_channels(h1, s1);
    sg::Var h2 = stage(z1);
    sg::Var s2 = affine(h2);
    out.timestamps = {s1, s2};
    out.embedding = sg::concat_channels(h2, s2);
    if (config_.variant == Variant::ssten) {
      sg::Var d1 = stage(out.embedding);
      sg::Var d2 = stage(d1);
      out.reconstruction = affine(d2);
    }
    return out;
  }

 private:
  sg::Var affine(sg::Var x) {
    sg::Var w = next();
    sg::Var b = next();
    return sg::pointwise_conv(x, w, b);
  }

  sg::Var stage(sg::Var x) {
    sg::Var h = affine(x);
    int dilation = 1;
    for (int q = 0; q < config_.layers_per_stage; ++q, dilation *= 2) {
      sg::Var w = next();
      sg::Var b = next();
      sg::Var y = sg::relu(sg::conv1d_dilated(h, w, b, dilation));
      y = affine(y);
      if (dropout_rng_ != nullptr && config_.dropout > 0.0) y = dropout(y);
      h = sg::add(h, y);
    }
    return h;
  }

  sg::Var dropout(sg::Var y) {
    std::bernoulli_distribution keep(1.0 - config_.dropout);
    Matrix m(y.rows(), y.cols());
    const double scale = 1.0 / (1.0 - config_.dropout);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*dropout_rng_) ? scale : 0.0;
    return sg::mask(y, m);
  }

  sg::Var next() { return vars_.at(cursor_++); }

  sg::Tape& tape_;
  const EmbedConfig& config_;
  std::mt19937_64* dropout_rng_;
  std::vector<sg::Var> vars_;
  std::size_t cursor_ = 0;
};

Matrix normalize(const ModelParams& params, const Matrix& features) {
  if (features.cols() != params.config.input_dim) {
    throw std::invalid_argument("feature dimension " + std::to_string(features.cols()) + " does not match model input_dim " +
                                std::to_string(params.config.input_dim));
  }
  if (features.rows() < 1) throw std::invalid_argument("video has no frames");
  return (features.rowwise() - params.feature_mean).array().rowwise() / params.feature_scale.array();
}

sg::Var graph_loss(sg::Tape& tape, const NetworkBuilder::Outputs& out, sg::Var x, double lambda) {
  const Eigen::Index frames = x.rows();
  sg::Var target = tape.constant(relative_timestamps(frames));
  sg::Var loss = sg::mse(out.timestamps.front(), target);
  for (std::size_t p = 1; p < out.timestamps.size(); ++p) loss = sg::add(loss, sg::mse(out.timestamps[p], target));
  if (out.reconstruction.valid()) loss = sg::add(loss, sg::scale(sg::mse(out.reconstruction, x), lambda));
  return loss;
}

}  // namespace

ModelParams build_model(const EmbedConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params;
  params.config = config;
  params.config.seed = seed;
  params.feature_mean = RowVector::Zero(config.input_dim);
  params.feature_scale = RowVector::Ones(config.input_dim);

  std::mt19937_64 rng(seed);
  for (const TensorSpec& spec : architecture(config)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(spec.rows, spec.cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    params.tensors.push_back({spec.name, std::move(m)});
  }
  return params;
}

void set_normalization(ModelParams& params, const Dataset& data) {
  const Eigen::Index d = params.config.input_dim;
  RowVector sum = RowVector::Zero(d);
  double frames = 0.0;
  for (const FeatureSequence& v : data) {
    if (v.dim() != d) throw std::invalid_argument("video '" + v.video_id + "' has mismatched feature dimension");
    sum += v.features.colwise().sum();
    frames += static_cast<double>(v.frames());
  }
  if (frames == 0.0) throw std::invalid_argument("set_normalization: no frames");
  const RowVector mean = sum / frames;
  RowVector sq = RowVector::Zero(d);
  for (const FeatureSequence& v : data) sq += (v.features.rowwise() - mean).array().square().matrix().colwise().sum();
  RowVector scale = (sq / frames).array().sqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(scale(j) > 1e-12)) scale(j) = 1.0;
  }
  params.feature_mean = mean;
  params.feature_scale = scale;
}

ForwardResult forward(const ModelParams& params, const Matrix& features) {
  check_compatible(params);
  ForwardResult result;
  result.normalized_input = normalize(params, features);
  sg::Tape tape;
  NetworkBuilder net(tape, params, false, nullptr);
  const NetworkBuilder::Outputs out = net.run(tape.constant(result.normalized_input));
  if (out.reconstruction.valid()) result.reconstruction = out.reconstruction.value();
  for (const sg::Var& s : out.timestamps) result.timestamps.emplace_back(s.value().col(0));
  result.embedding = out.embedding.value();
  return result;
}

double embedding_loss(const Matrix& input, const Matrix* reconstruction, const std::vector<Vector>& predicted_timestamps,
                      const Vector& true_timestamps, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("embedding_loss: lambda must be >= 0");
  double loss = 0.0;
  if (reconstruction != nullptr) {
    if (reconstruction->rows() != input.rows() || reconstruction->cols() != input.cols()) {
      throw std::invalid_argument("embedding_loss: reconstruction shape mismatch");
    }
    loss += lambda * (input - *reconstruction).squaredNorm();
  }
  for (const Vector& s : predicted_timestamps) {
    if (s.size() != true_timestamps.size()) throw std::invalid_argument("embedding_loss: timestamp length mismatch");
    loss += (true_timestamps - s).squaredNorm();
  }
  return loss;
}

LossGradient loss_and_gradient(const ModelParams& params, const Matrix& features,
                               std::optional<std::uint64_t> dropout_seed) {
  check_compatible(params);
  const Matrix x = normalize(params, features);
  std::optional<std::mt19937_64> rng;
  if (dropout_seed) rng.emplace(*dropout_seed);

  sg::Tape tape;
  NetworkBuilder net(tape, params, true, rng ? &*rng : nullptr);
  sg::Var input = tape.constant(x);
  const NetworkBuilder::Outputs out = net.run(input);
  sg::Var loss = graph_loss(tape, out, input, params.config.lambda);
  tape.backward(loss);

  LossGradient result;
  result.loss = loss.value()(0, 0);
  for (const sg::Var& p : net.parameters()) result.gradients.push_back(p.grad());
  return result;
}

TrainResult train(const Dataset& data, EmbedConfig config) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const Eigen::Index d = data.front().dim();
  for (const FeatureSequence& v : data) {
    if (v.dim() != d) {
      throw std::invalid_argument("train: video '" + v.video_id + "' has feature dimension " + std::to_string(v.dim()) +
                                  ", expected " + std::to_string(d));
    }
    if (v.frames() < 1) throw std::invalid_argument("train: video '" + v.video_id + "' has no frames");
  }
  config.input_dim = static_cast<int>(d);
  config.validate();

  TrainResult result;
  result.params = build_model(config, config.seed);
  set_normalization(result.params, data);

  std::vector<Matrix> m1;
  std::vector<Matrix> m2;
  for (const Parameter& p : result.params.tensors) {
    m1.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    m2.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  long long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      std::optional<std::uint64_t> dropout_seed;
      if (config.dropout > 0.0) dropout_seed = rng();
      LossGradient lg = loss_and_gradient(result.params, data[idx].features, dropout_seed);
      if (!std::isfinite(lg.loss)) {
        throw NumericalError("training diverged in epoch " + std::to_string(epoch + 1) + " (non-finite loss on video '" +
                             data[idx].video_id + "')");
      }
      epoch_loss += lg.loss;

      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < result.params.tensors.size(); ++i) {
        const Matrix& g = lg.gradients[i];
        m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * g;
        m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * g.cwiseProduct(g);
        result.params.tensors[i].value.array() -=
            config.learning_rate * (m1[i].array() / c1) / ((m2[i].array() / c2).sqrt() + config.adam_epsilon);
      }
    }
    const double mean = epoch_loss / static_cast<double>(data.size());
    if (!std::isfinite(mean)) throw NumericalError("training diverged in epoch " + std::to_string(epoch + 1));
    result.loss_history.push_back(mean);
  }
  return result;
}

EmbeddedSequence embed(const ModelParams& params, const FeatureSequence& video) {
  ForwardResult fwd = forward(params, video.features);
  EmbeddedSequence out;
  out.video_id = video.video_id;
  out.embedding = std::move(fwd.embedding);
  out.true_timestamps = relative_timestamps(video.frames());
  return out;
}

namespace {

constexpr char kMagic[8] = {'T', 'A', 'E', 'C', 'M', 'D', 'L', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_matrix(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void read_matrix(std::istream& in, Matrix& m, const std::filesystem::path& path) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw DataError("checkpoint " + path.string() + " is truncated");
}

}  // namespace

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  const EmbedConfig& c = params.config;
  nlohmann::json header;
  header["format"] = "taec-model";
  header["version"] = 1;
  header["architecture"] = {{"variant", to_string(c.variant)},
                            {"input_dim", c.input_dim},
                            {"hidden_dim", c.hidden_dim},
                            {"layers_per_stage", c.layers_per_stage},
                            {"kernel_size", c.kernel_size}};
  // doubles are stored as their bit patterns so the header round-trips exactly
  header["training"] = {{"lambda", std::bit_cast<std::uint64_t>(c.lambda)},
                        {"dropout", std::bit_cast<std::uint64_t>(c.dropout)},
                        {"epochs", c.epochs},
                        {"learning_rate", std::bit_cast<std::uint64_t>(c.learning_rate)},
                        {"beta1", std::bit_cast<std::uint64_t>(c.beta1)},
                        {"beta2", std::bit_cast<std::uint64_t>(c.beta2)},
                        {"adam_epsilon", std::bit_cast<std::uint64_t>(c.adam_epsilon)},
                        {"seed", c.seed}};
  header["tensors"] = nlohmann::json::array();
  header["tensors"].push_back({{"name", "norm.mean"}, {"rows", 1}, {"cols", params.feature_mean.size()}});
  header["tensors"].push_back({{"name", "norm.scale"}, {"rows", 1}, {"cols", params.feature_scale.size()}});
  for (const Parameter& p : params.tensors) {
    header["tensors"].push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_matrix(out, params.feature_mean);
  write_matrix(out, params.feature_scale);
  for (const Parameter& p : params.tensors) write_matrix(out, p.value);
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + " is not a taec model checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26)) throw DataError("checkpoint " + path.string() + " has a corrupt header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("checkpoint " + path.string() + " is truncated");

  ModelParams params;
  try {
    const nlohmann::json header = nlohmann::json::parse(text);
    const auto& arch = header.at("architecture");
    const auto& training = header.at("training");
    EmbedConfig& c = params.config;
    c.variant = parse_variant(arch.at("variant").get<std::string>());
    c.input_dim = arch.at("input_dim").get<int>();
    c.hidden_dim = arch.at("hidden_dim").get<int>();
    c.layers_per_stage = arch.at("layers_per_stage").get<int>();
    c.kernel_size = arch.at("kernel_size").get<int>();
    auto real = [&](const char* key) { return std::bit_cast<double>(training.at(key).get<std::uint64_t>()); };
    c.lambda = real("lambda");
    c.dropout = real("dropout");
    c.epochs = training.at("epochs").get<int>();
    c.learning_rate = real("learning_rate");
    c.beta1 = real("beta1");
    c.beta2 = real("beta2");
    c.adam_epsilon = real("adam_epsilon");
    c.seed = training.at("seed").get<std::uint64_t>();
    c.validate();

    const auto& tensors = header.at("tensors");
    if (tensors.size() < 2) throw DataError("checkpoint " + path.string() + " lists no normalization tensors");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto rows = tensors[i].at("rows").get<Eigen::Index>();
      const auto cols = tensors[i].at("cols").get<Eigen::Index>();
      Matrix m(rows, cols);
      read_matrix(in, m, path);
      if (i == 0) {
        params.feature_mean = m.row(0);
      } else if (i == 1) {
        params.feature_scale = m.row(0);
      } else {
        params.tensors.push_back({tensors[i].at("name").get<std::string>(), std::move(m)});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + " has a malformed header: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    check_compatible(params);
  } catch (const std::invalid_argument& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  return params;
}

}  // namespace taec
