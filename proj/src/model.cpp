#include "skd/model.hpp"

#include <cmath>

#include "skd/instrumentation.hpp"
#include "skd/random.hpp"

namespace skd {

void EncoderConfig::validate() const {
  auto positive = [](std::size_t v, const char* field) {
    if (v == 0) throw ConfigError(std::string("encoder config: ") + field + " must be >= 1");
  };
  positive(vocab_size, "vocab_size");
  positive(embed_dim, "embed_dim");
  positive(window, "window");
  positive(num_tags, "num_tags");
  if (window % 2 == 0) throw ConfigError("encoder config: window must be odd");
  for (std::size_t h : hidden_dims) positive(h, "hidden_dims");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim}, {"window", c.window},
                     {"hidden_dims", c.hidden_dims}, {"num_tags", c.num_tags}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("window").get_to(c.window);
  j.at("hidden_dims").get_to(c.hidden_dims);
  j.at("num_tags").get_to(c.num_tags);
  c.seed = j.value("seed", std::uint64_t{0});
}

EncoderConfig default_teacher_config(std::size_t vocab_size, std::size_t num_tags, std::uint64_t seed) {
  return {vocab_size, 64, 5, {128, 128}, num_tags, seed};
}

EncoderConfig default_student_config(std::size_t vocab_size, std::size_t num_tags, std::uint64_t seed) {
  return {vocab_size, 32, 3, {32}, num_tags, seed};
}

ModelParams::ModelParams(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  auto add = [this](std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    tensors_.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0)});
  };
  add("embeddings", {config_.vocab_size, config_.embed_dim});
  std::size_t in = config_.input_dim();
  for (std::size_t k = 0; k < config_.hidden_dims.size(); ++k) {
    const std::size_t out = config_.hidden_dims[k];
    add("layer" + std::to_string(k) + ".weight", {out, in});
    add("layer" + std::to_string(k) + ".bias", {out});
    in = out;
  }
  add("output.weight", {config_.num_tags, in});
  add("output.bias", {config_.num_tags});
  add("transition", {config_.num_tags, config_.num_tags});
  add("start", {config_.num_tags});
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.values.size();
  return n;
}

bool ModelParams::operator==(const ModelParams& o) const {
  if (!(config_ == o.config_) || tensors_.size() != o.tensors_.size()) return false;
  for (std::size_t k = 0; k < tensors_.size(); ++k) {
    if (tensors_[k].values != o.tensors_[k].values) return false;
  }
  return true;
}

ParamGrads ParamGrads::zeros_like(const ModelParams& params) {
  ParamGrads g;
  for (const auto& t : params.tensors()) g.tensors.emplace_back(t.values.size(), 0.0);
  return g;
}

void ParamGrads::set_zero() {
  for (auto& t : tensors) std::fill(t.begin(), t.end(), 0.0);
}

void ParamGrads::add(const ParamGrads& other) {
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    for (std::size_t i = 0; i < tensors[k].size(); ++i) tensors[k][i] += other.tensors[k][i];
  }
}

void ParamGrads::scale(double factor) {
  for (auto& t : tensors) {
    for (double& v : t) v *= factor;
  }
}

ModelParams init_model(const EncoderConfig& config) {
  ModelParams params(config);
  Rng rng(derive_seed(config.seed, "init-model"));
  auto fill_uniform = [&rng](Tensor& t, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.values) v = rng.uniform(-bound, bound);
  };
  auto& tensors = params.tensors();
  fill_uniform(tensors[0], config.embed_dim);
  std::size_t in = config.input_dim();
  for (std::size_t k = 0; k < config.hidden_dims.size(); ++k) {
    fill_uniform(tensors[1 + 2 * k], in);
    in = config.hidden_dims[k];
  }
  fill_uniform(tensors[1 + 2 * config.hidden_dims.size()], in);
  return params;
}

namespace {

using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.values.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
}

Eigen::Map<const Eigen::RowVectorXd> as_row(const Tensor& t) {
  return Eigen::Map<const Eigen::RowVectorXd>(t.values.data(), static_cast<Eigen::Index>(t.values.size()));
}

void check_tokens(const ModelParams& params, std::span<const TokenId> sentence) {
  if (sentence.empty()) throw InvalidInput("cannot encode an empty sentence");
  for (TokenId t : sentence) {
    if (t < 0 || static_cast<std::size_t>(t) >= params.config().vocab_size) {
      throw InvalidInput("token id " + std::to_string(t) + " out of vocabulary range");
    }
  }
}

}  // namespace

ScoreLattice encode(const ModelParams& params, std::span<const TokenId> sentence, EncoderActivations& acts) {
  check_tokens(params, sentence);
  instrumentation::counters().encode.fetch_add(1, std::memory_order_relaxed);
  const auto& cfg = params.config();
  const auto len = static_cast<Eigen::Index>(sentence.size());
  const auto dim = static_cast<Eigen::Index>(cfg.embed_dim);
  const auto half = static_cast<Eigen::Index>(cfg.window / 2);

  acts.input.setZero(len, static_cast<Eigen::Index>(cfg.input_dim()));
  const ConstMap emb = as_matrix(params.embeddings());
  for (Eigen::Index l = 0; l < len; ++l) {
    for (Eigen::Index o = -half; o <= half; ++o) {
      const Eigen::Index p = l + o;
      if (p < 0 || p >= len) continue;
      acts.input.block(l, (o + half) * dim, 1, dim) = emb.row(sentence[static_cast<std::size_t>(p)]);
    }
  }

  acts.hidden.resize(params.num_layers());
  const RowMatrix* prev = &acts.input;
  for (std::size_t k = 0; k < params.num_layers(); ++k) {
    RowMatrix& h = acts.hidden[k];
    h.noalias() = *prev * as_matrix(params.layer_weight(k)).transpose();
    h.rowwise() += as_row(params.layer_bias(k));
    h = h.array().tanh().matrix();
    prev = &h;
  }
  acts.emissions.noalias() = *prev * as_matrix(params.output_weight()).transpose();
  acts.emissions.rowwise() += as_row(params.output_bias());

  const std::size_t n = cfg.num_tags;
  ScoreLattice lattice(sentence.size(), n);
  const auto& trans = params.transition().values;
  const auto& start = params.start().values;
  for (std::size_t j = 0; j < n; ++j) lattice.start(j) = start[j] + acts.emissions(0, static_cast<Eigen::Index>(j));
  for (std::size_t l = 0; l + 1 < sentence.size(); ++l) {
    double* block = lattice.pair_block(l).data();
    const double* e = acts.emissions.row(static_cast<Eigen::Index>(l + 1)).data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) block[i * n + j] = trans[i * n + j] + e[j];
    }
  }
  return lattice;
}

ScoreLattice encode(const ModelParams& params, std::span<const TokenId> sentence) {
  EncoderActivations acts;
  return encode(params, sentence, acts);
}

void accumulate_backward(const ModelParams& params, std::span<const TokenId> sentence,
                         const EncoderActivations& acts, const LatticeGrad& grad, ParamGrads& accum) {
  const auto& cfg = params.config();
  const std::size_t n = cfg.num_tags;
  if (!(grad.shape() == LatticeShape{sentence.size(), n})) {
    throw InvalidInput("lattice gradient shape does not match the sentence");
  }
  const std::size_t layers = params.num_layers();
  const auto len = static_cast<Eigen::Index>(sentence.size());

  // Emission gradient: d e_1 = d_start, d e_{l+1}[j] = sum_i d_pair(l, i, j).
  RowMatrix d_emit = RowMatrix::Zero(len, static_cast<Eigen::Index>(n));
  auto& d_start = accum.tensors[4 + 2 * layers];
  auto& d_trans = accum.tensors[3 + 2 * layers];
  for (std::size_t j = 0; j < n; ++j) {
    d_emit(0, static_cast<Eigen::Index>(j)) = grad.start(j);
    d_start[j] += grad.start(j);
  }
  for (std::size_t l = 0; l + 1 < sentence.size(); ++l) {
    const double* block = grad.pair_block(l).data();
    double* row = d_emit.row(static_cast<Eigen::Index>(l + 1)).data();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        row[j] += block[i * n + j];
        d_trans[i * n + j] += block[i * n + j];
      }
    }
  }

  auto grad_matrix = [&](std::size_t index) {
    const auto& shape = params.tensors()[index].shape;
    return Map(accum.tensors[index].data(), static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1]));
  };
  auto grad_row = [&](std::size_t index) {
    return Eigen::Map<Eigen::RowVectorXd>(accum.tensors[index].data(),
                                          static_cast<Eigen::Index>(accum.tensors[index].size()));
  };

  const RowMatrix& last = layers == 0 ? acts.input : acts.hidden.back();
  grad_matrix(1 + 2 * layers).noalias() += d_emit.transpose() * last;
  grad_row(2 + 2 * layers) += d_emit.colwise().sum();
  RowMatrix d_act = d_emit * as_matrix(params.output_weight());

  for (std::size_t k = layers; k-- > 0;) {
    const RowMatrix& h = acts.hidden[k];
    const RowMatrix& below = k == 0 ? acts.input : acts.hidden[k - 1];
    RowMatrix d_pre = (d_act.array() * (1.0 - h.array().square())).matrix();
    grad_matrix(1 + 2 * k).noalias() += d_pre.transpose() * below;
    grad_row(2 + 2 * k) += d_pre.colwise().sum();
    d_act = d_pre * as_matrix(params.layer_weight(k));
  }

  // Scatter window slots back onto the embedding rows they were read from.
  Map d_emb = grad_matrix(0);
  const auto dim = static_cast<Eigen::Index>(cfg.embed_dim);
  const auto half = static_cast<Eigen::Index>(cfg.window / 2);
  for (Eigen::Index l = 0; l < len; ++l) {
    for (Eigen::Index o = -half; o <= half; ++o) {
      const Eigen::Index p = l + o;
      if (p < 0 || p >= len) continue;
      d_emb.row(sentence[static_cast<std::size_t>(p)]) += d_act.block(l, (o + half) * dim, 1, dim);
    }
  }
}

ParamGrads backward(const ModelParams& params, std::span<const TokenId> sentence, const LatticeGrad& grad) {
  EncoderActivations acts;
  encode(params, sentence, acts);
  ParamGrads out = ParamGrads::zeros_like(params);
  accumulate_backward(params, sentence, acts, grad, out);
  return out;
}

AdamState AdamState::for_params(const ModelParams& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& t : params.tensors()) {
    s.m.emplace_back(t.values.size(), 0.0);
    s.v.emplace_back(t.values.size(), 0.0);
  }
  return s;
}

void adam_step(ModelParams& params, const ParamGrads& grads, AdamState& state) {
  auto& tensors = params.tensors();
  if (grads.tensors.size() != tensors.size() || state.m.size() != tensors.size()) {
    throw InvalidInput("adam_step: parameter, gradient and state layouts differ");
  }
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    if (grads.tensors[k].size() != tensors[k].values.size() || state.m[k].size() != tensors[k].values.size()) {
      throw InvalidInput("adam_step: tensor '" + tensors[k].name + "' has mismatched size");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    auto& p = tensors[k].values;
    const auto& g = grads.tensors[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace skd
