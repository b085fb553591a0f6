// Landslide encoder and predictor.
//
// Terrain branch: two 3x3 conv+ReLU layers, spatial mean pool.
// Rain branch: the same two-layer CNN applied to every hourly frame, spatial
// mean pool per frame, linear token projection plus sinusoidal positions,
// a pre-norm Transformer encoder, temporal mean pool.
// The pooled rain and terrain features are concatenated into the embedding;
// an MLP head maps it to a landslide probability.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lews/nn_layers.hpp"
#include "lews/sample.hpp"

namespace lews {

class Manifest;

struct EncoderConfig {
  int terrain_channels = 30;
  int terrain_hidden = 16;
  int terrain_out = 16;
  int rain_hidden = 8;
  int rain_out = 16;
  int token_dim = 32;
  int transformer_layers = 3;
  int heads = 2;
  int ff_width = 64;
  int max_positions = 48;
  int head_hidden = 32;
  double rain_scale = 10.0;  // mm/h mapped to 1.0 at the input
  double layer_norm_eps = 1e-5;

  int embedding_dim() const { return token_dim + terrain_out; }
  void validate() const;
  void write(Manifest& m, const std::string& prefix) const;
  static EncoderConfig read(const Manifest& m, const std::string& prefix);
  bool operator==(const EncoderConfig&) const = default;

  template <class Self, class V>
  static void visit(Self& s, V& v) {
    v("terrain_channels", s.terrain_channels);
    v("terrain_hidden", s.terrain_hidden);
    v("terrain_out", s.terrain_out);
    v("rain_hidden", s.rain_hidden);
    v("rain_out", s.rain_out);
    v("token_dim", s.token_dim);
    v("transformer_layers", s.transformer_layers);
    v("heads", s.heads);
    v("ff_width", s.ff_width);
    v("max_positions", s.max_positions);
    v("head_hidden", s.head_hidden);
    v("rain_scale", s.rain_scale);
    v("layer_norm_eps", s.layer_norm_eps);
  }
};

struct ParamSpec {
  enum class Init { Uniform, Zeros, Ones };
  std::string name;
  int rows = 0;
  int cols = 0;
  Init init = Init::Zeros;
  double bound = 0.0;
};

struct TransformerSlots {
  int ln1_gamma, ln1_beta, wq, bq, wk, bk, wv, bv, wo, bo, ln2_gamma, ln2_beta, ff1_w, ff1_b, ff2_w, ff2_b;
};

/// Fixed parameter order for a configuration; the encoder comes first and
/// the head occupies the last four slots.
struct ParamLayout {
  int terrain_conv1_w, terrain_conv1_b, terrain_conv2_w, terrain_conv2_b;
  int rain_conv1_w, rain_conv1_b, rain_conv2_w, rain_conv2_b;
  int token_w, token_b;
  std::vector<TransformerSlots> layers;
  int head1_w, head1_b, head2_w, head2_b;
  int encoder_count = 0;
  std::vector<ParamSpec> specs;

  static ParamLayout make(const EncoderConfig& cfg);
};

/// Named parameter tensors. Biases and gains are (n, 1).
template <typename S>
struct ModelParams {
  EncoderConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> names;
  std::vector<nn::Matrix<S>> tensors;

  std::size_t size() const { return tensors.size(); }
  int index_of(std::string_view name) const;
  nn::Matrix<S>& at(std::string_view name) { return tensors[static_cast<std::size_t>(index_of(name))]; }
  const nn::Matrix<S>& at(std::string_view name) const { return tensors[static_cast<std::size_t>(index_of(name))]; }
  nn::Matrix<S>& operator[](int i) { return tensors[static_cast<std::size_t>(i)]; }
  const nn::Matrix<S>& operator[](int i) const { return tensors[static_cast<std::size_t>(i)]; }

  ModelParams zeros_like() const;
  void set_zero();
  Eigen::Index parameter_count() const;
  bool all_finite() const;

  template <typename T>
  ModelParams<T> cast() const {
    ModelParams<T> out;
    out.config = config;
    out.seed = seed;
    out.names = names;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<T>());
    return out;
  }
};

/// Fan-in uniform weights, zero biases, unit layer-norm gains.
template <typename S>
ModelParams<S> init_params(const EncoderConfig& cfg, std::uint64_t seed);

/// Model-ready tensors: rain (1, T*H*W) scaled by 1/rain_scale, terrain (30, H*W).
template <typename S>
struct ModelInput {
  nn::Matrix<S> rain;
  nn::Matrix<S> terrain;
  int height = 0;
  int width = 0;
  int frames = 0;
};

template <typename S>
ModelInput<S> make_model_input(const Sample& sample, const EncoderConfig& cfg);

template <typename S>
struct Embedding {
  nn::Vector<S> z;
  bool normalized = false;
};

template <typename S>
struct TransformerTape {
  nn::Matrix<S> x_in;
  nn::LayerNormCache<S> ln1;
  nn::AttentionCache<S> attention;
  nn::LayerNormCache<S> ln2;
  nn::Matrix<S> ln2_out;
  nn::Matrix<S> ff_hidden;
};

/// Everything the encoder backward pass needs from one forward pass.
template <typename S>
struct EncoderTape {
  bool complete = false;
  int height = 0, width = 0, frames = 0;
  nn::Matrix<S> terrain_cols1, terrain_act1, terrain_cols2, terrain_act2;
  nn::Matrix<S> rain_cols1, rain_act1, rain_cols2, rain_act2;
  nn::Matrix<S> frame_features;
  std::vector<TransformerTape<S>> layers;
  nn::Matrix<S> tokens_out;
  nn::Vector<S> embedding;  // before normalization
  S norm = S(1);
  bool normalized = false;
};

template <typename S>
struct InputGrads {
  nn::Matrix<S> rain;
  nn::Matrix<S> terrain;
};

template <typename S>
Embedding<S> encode(const ModelInput<S>& input, const ModelParams<S>& params, bool normalize,
                    EncoderTape<S>* tape = nullptr);

template <typename S>
Embedding<S> encode(const Sample& sample, const ModelParams<S>& params, bool normalize);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(embedding).
/// Throws std::logic_error when the tape is not from a completed forward pass.
template <typename S>
void encode_backward(const EncoderTape<S>& tape, const ModelParams<S>& params, const nn::Vector<S>& dz,
                     ModelParams<S>& grads, InputGrads<S>* input_grads = nullptr);

template <typename S>
struct HeadTape {
  bool complete = false;
  nn::Matrix<S> z;
  nn::Matrix<S> hidden;
  S logit = S(0);
};

/// MLP head on an embedding; returns the logit.
template <typename S>
S predict_logit(const nn::Vector<S>& z, const ModelParams<S>& params, HeadTape<S>* tape = nullptr);

/// Landslide probability in (0, 1).
template <typename S>
S predict(const Embedding<S>& embedding, const ModelParams<S>& params);

/// Accumulates head gradients and returns d(loss)/d(embedding).
template <typename S>
nn::Vector<S> head_backward(const HeadTape<S>& tape, const ModelParams<S>& params, S dlogit, ModelParams<S>& grads);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

template <typename S>
struct AdamWState {
  std::int64_t step = 0;
  std::vector<nn::Matrix<S>> m;
  std::vector<nn::Matrix<S>> v;
};

/// Decoupled weight decay Adam. `lr_scale[i]` (optional) scales the step of
/// tensor i; a scale of 0 freezes it. Throws ValidationError naming the
/// tensor when any gradient is non-finite, before touching the parameters.
template <typename S>
void adamw_step(ModelParams<S>& params, const ModelParams<S>& grads, AdamWState<S>& state, const AdamWConfig& cfg,
                const std::vector<double>* lr_scale = nullptr);

void write_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path);
ModelParams<float> read_checkpoint(const std::filesystem::path& path);

}  // namespace lews
