#pragma once

// Temporal embedding networks trained with a reconstruction + relative
// timestamp objective.
//
//   ssten: encoder stage 1 -> encoder stage 2 -> decoder stage 1 -> stage 2.
//          Every stage is a 1x1 input projection followed by Q dilated
//          residual layers (dilation 2^(q-1)). Each encoder stage has a 1x1
//          timestamp head whose output is concatenated to the stage features.
//   tcn:   the two encoder stages only; no reconstruction.
//   mlp:   three per-frame fully connected layers predicting the timestamp.
//
// The embedding of every variant is [hidden features | predicted timestamp]
// taken from the last encoder stage, i.e. E = hidden_dim + 1.

#include "taec/dataio.hpp"
#include "taec/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace taec {

enum class Variant { ssten, tcn, mlp };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct EmbedConfig {
  Variant variant = Variant::ssten;
  int input_dim = 0;
  int hidden_dim = 32;
  int layers_per_stage = 5;
  int kernel_size = 3;
  double lambda = 0.01;
  double dropout = 0.0;
  int epochs = 40;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
  [[nodiscard]] int embedding_dim() const { return hidden_dim + 1; }
};

struct Parameter {
  std::string name;
  Matrix value;
};

struct ModelParams {
  EmbedConfig config;
  // Per-dimension z-score statistics applied to inputs before the network.
  RowVector feature_mean;
  RowVector feature_scale;
  std::vector<Parameter> tensors;

  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] const Matrix& tensor(const std::string& name) const;
};

// 1 + (r - 1)(2^q - 1): temporal receptive field after q dilated layers
// with kernel size r.
long long receptive_field(int q, int r);

// Deterministic initialization from `seed`. Normalization is the identity
// until set_normalization() or train() fills it in.
ModelParams build_model(const EmbedConfig& config, std::uint64_t seed);

// Z-score statistics over all frames of `data`; constant dimensions get
// scale 1.
void set_normalization(ModelParams& params, const Dataset& data);

struct ForwardResult {
  Matrix normalized_input;             // T x D, the reconstruction target
  std::optional<Matrix> reconstruction;  // absent for tcn and mlp
  std::vector<Vector> timestamps;      // one per encoder stage (mlp: one)
  Matrix embedding;                    // T x (H + 1)
};

ForwardResult forward(const ModelParams& params, const Matrix& features);

// s_t = t / T for t = 1..T.
Vector relative_timestamps(Eigen::Index frames);

// lambda * sum_t |x_t - xhat_t|^2 + sum_p sum_t (s_t - shat_{p,t})^2 for
// one video. `reconstruction` may be null (term dropped).
double embedding_loss(const Matrix& input, const Matrix* reconstruction,
                      const std::vector<Vector>& predicted_timestamps, const Vector& true_timestamps,
                      double lambda);

// Loss of one video and its gradient with respect to every tensor of
// `params` (same order as params.tensors). Dropout is applied only when
// `dropout_seed` is set and config.dropout > 0.
struct LossGradient {
  double loss = 0.0;
  std::vector<Matrix> gradients;
};
LossGradient loss_and_gradient(const ModelParams& params, const Matrix& features,
                               std::optional<std::uint64_t> dropout_seed = std::nullopt);

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_history;  // mean per-video loss of each epoch
};

// One Adam step per video, video order reshuffled every epoch. Throws
// std::invalid_argument on empty data or mixed feature dimensions and
// NumericalError when the loss becomes non-finite.
TrainResult train(const Dataset& data, EmbedConfig config);

struct EmbeddedSequence {
  std::string video_id;
  Matrix embedding;
  Vector true_timestamps;
};

EmbeddedSequence embed(const ModelParams& params, const FeatureSequence& video);

// Binary checkpoint: "TAECMDL1", a length-prefixed JSON header describing
// the architecture and tensor shapes, then raw little-endian doubles.
void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace taec
