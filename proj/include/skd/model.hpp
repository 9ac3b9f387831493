#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "skd/lattice.hpp"

namespace skd {

using TokenId = std::int32_t;

// Shape of a windowed-embedding tagger: each token's emission vector is
// computed from the embeddings of the `window` tokens centred on it
// (zero vectors beyond the sentence boundary), passed through tanh layers
// of widths `hidden_dims` and a linear projection to `num_tags`.
struct EncoderConfig {
  std::size_t vocab_size = 1;
  std::size_t embed_dim = 1;
  std::size_t window = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_tags = 1;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the first offending field.
  void validate() const;
  std::size_t input_dim() const { return window * embed_dim; }

  bool operator==(const EncoderConfig&) const = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// Teacher defaults: embed 64, window 5, hidden [128, 128].
EncoderConfig default_teacher_config(std::size_t vocab_size, std::size_t num_tags, std::uint64_t seed);
// Student defaults: embed 32, window 3, hidden [32].
EncoderConfig default_student_config(std::size_t vocab_size, std::size_t num_tags, std::uint64_t seed);

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

// All trainable tensors in a fixed order:
//   embeddings, (layer{k}.weight, layer{k}.bias)*, output.weight, output.bias,
//   transition, start.
// Weight matrices are row-major [out][in].
class ModelParams {
 public:
  ModelParams() = default;
  // Zero-filled tensors of the right shapes.
  explicit ModelParams(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }
  std::size_t num_tags() const { return config_.num_tags; }
  std::size_t num_layers() const { return config_.hidden_dims.size(); }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  Tensor& embeddings() { return tensors_[0]; }
  const Tensor& embeddings() const { return tensors_[0]; }
  const Tensor& layer_weight(std::size_t k) const { return tensors_[1 + 2 * k]; }
  const Tensor& layer_bias(std::size_t k) const { return tensors_[2 + 2 * k]; }
  const Tensor& output_weight() const { return tensors_[1 + 2 * num_layers()]; }
  const Tensor& output_bias() const { return tensors_[2 + 2 * num_layers()]; }
  Tensor& transition() { return tensors_[3 + 2 * num_layers()]; }
  const Tensor& transition() const { return tensors_[3 + 2 * num_layers()]; }
  Tensor& start() { return tensors_[4 + 2 * num_layers()]; }
  const Tensor& start() const { return tensors_[4 + 2 * num_layers()]; }

  std::size_t parameter_count() const;

  bool operator==(const ModelParams& o) const;

 private:
  EncoderConfig config_;
  std::vector<Tensor> tensors_;
};

// Gradient buffers laid out like ModelParams::tensors().
struct ParamGrads {
  std::vector<std::vector<double>> tensors;

  static ParamGrads zeros_like(const ModelParams& params);
  void set_zero();
  void add(const ParamGrads& other);
  void scale(double factor);
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases,
// zero transitions and start scores. Reproducible from config.seed.
ModelParams init_model(const EncoderConfig& config);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Intermediate values of one forward pass, kept for backward.
struct EncoderActivations {
  RowMatrix input;                // L x input_dim
  std::vector<RowMatrix> hidden;  // per layer, L x width, post-tanh
  RowMatrix emissions;            // L x N
};

// Emission-folded score lattice of one sentence:
// start[j] = start_param[j] + e_1[j], pair(l, i, j) = transition[i][j] + e_{l+1}[j].
ScoreLattice encode(const ModelParams& params, std::span<const TokenId> sentence);
ScoreLattice encode(const ModelParams& params, std::span<const TokenId> sentence, EncoderActivations& acts);

// Adds the parameter gradients of a loss with lattice gradient `grad` to `accum`.
void accumulate_backward(const ModelParams& params, std::span<const TokenId> sentence,
                         const EncoderActivations& acts, const LatticeGrad& grad, ParamGrads& accum);

// Parameter gradients for one sentence (recomputes the forward pass).
ParamGrads backward(const ModelParams& params, std::span<const TokenId> sentence, const LatticeGrad& grad);

// Adam with bias correction; beta1 = 0.9, beta2 = 0.999, eps = 1e-8 by default.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState for_params(const ModelParams& params, double lr);
};

void adam_step(ModelParams& params, const ParamGrads& grads, AdamState& state);

}  // namespace skd
