#include "lews/neural.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "lews/config_io.hpp"
#include "lews/manifest.hpp"

namespace lews {

using nn::Matrix;
using nn::Vector;

void EncoderConfig::validate() const {
  for (int v : {terrain_channels, terrain_hidden, terrain_out, rain_hidden, rain_out, token_dim, transformer_layers,
                heads, ff_width, max_positions, head_hidden}) {
    if (v <= 0) throw ValidationError("encoder: all dimensions must be positive");
  }
  if (terrain_channels != kTerrainChannels) throw ValidationError("encoder: terrain input must have 30 channels");
  if (token_dim % heads != 0) throw ValidationError("encoder: head count must divide token_dim");
  if (!(rain_scale > 0.0)) throw ValidationError("encoder: rain_scale must be positive");
  if (!(layer_norm_eps > 0.0)) throw ValidationError("encoder: layer_norm_eps must be positive");
}

void EncoderConfig::write(Manifest& m, const std::string& prefix) const { write_config(*this, m, prefix); }

EncoderConfig EncoderConfig::read(const Manifest& m, const std::string& prefix) {
  EncoderConfig c;
  read_config(c, m, prefix);
  return c;
}

ParamLayout ParamLayout::make(const EncoderConfig& cfg) {
  cfg.validate();
  ParamLayout l;
  using Init = ParamSpec::Init;
  auto add = [&](std::string name, int rows, int cols, Init init, double bound = 0.0) {
    l.specs.push_back({std::move(name), rows, cols, init, bound});
    return static_cast<int>(l.specs.size()) - 1;
  };
  auto relu_bound = [](int fan_in) { return std::sqrt(6.0 / fan_in); };
  auto linear_bound = [](int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };

  const int t_in = cfg.terrain_channels * 9;
  l.terrain_conv1_w = add("terrain.conv1.weight", cfg.terrain_hidden, t_in, Init::Uniform, relu_bound(t_in));
  l.terrain_conv1_b = add("terrain.conv1.bias", cfg.terrain_hidden, 1, Init::Zeros);
  const int t_in2 = cfg.terrain_hidden * 9;
  l.terrain_conv2_w = add("terrain.conv2.weight", cfg.terrain_out, t_in2, Init::Uniform, relu_bound(t_in2));
  l.terrain_conv2_b = add("terrain.conv2.bias", cfg.terrain_out, 1, Init::Zeros);

  l.rain_conv1_w = add("rain.conv1.weight", cfg.rain_hidden, 9, Init::Uniform, relu_bound(9));
  l.rain_conv1_b = add("rain.conv1.bias", cfg.rain_hidden, 1, Init::Zeros);
  const int r_in2 = cfg.rain_hidden * 9;
  l.rain_conv2_w = add("rain.conv2.weight", cfg.rain_out, r_in2, Init::Uniform, relu_bound(r_in2));
  l.rain_conv2_b = add("rain.conv2.bias", cfg.rain_out, 1, Init::Zeros);
  l.token_w = add("rain.token.weight", cfg.token_dim, cfg.rain_out, Init::Uniform, linear_bound(cfg.rain_out));
  l.token_b = add("rain.token.bias", cfg.token_dim, 1, Init::Zeros);

  const int d = cfg.token_dim;
  for (int i = 0; i < cfg.transformer_layers; ++i) {
    const std::string p = "transformer." + std::to_string(i) + ".";
    TransformerSlots s{};
    s.ln1_gamma = add(p + "ln1.gamma", d, 1, Init::Ones);
    s.ln1_beta = add(p + "ln1.beta", d, 1, Init::Zeros);
    s.wq = add(p + "attn.wq", d, d, Init::Uniform, linear_bound(d));
    s.bq = add(p + "attn.bq", d, 1, Init::Zeros);
    s.wk = add(p + "attn.wk", d, d, Init::Uniform, linear_bound(d));
    s.bk = add(p + "attn.bk", d, 1, Init::Zeros);
    s.wv = add(p + "attn.wv", d, d, Init::Uniform, linear_bound(d));
    s.bv = add(p + "attn.bv", d, 1, Init::Zeros);
    s.wo = add(p + "attn.wo", d, d, Init::Uniform, linear_bound(d));
    s.bo = add(p + "attn.bo", d, 1, Init::Zeros);
    s.ln2_gamma = add(p + "ln2.gamma", d, 1, Init::Ones);
    s.ln2_beta = add(p + "ln2.beta", d, 1, Init::Zeros);
    s.ff1_w = add(p + "ff1.weight", cfg.ff_width, d, Init::Uniform, relu_bound(d));
    s.ff1_b = add(p + "ff1.bias", cfg.ff_width, 1, Init::Zeros);
    s.ff2_w = add(p + "ff2.weight", d, cfg.ff_width, Init::Uniform, linear_bound(cfg.ff_width));
    s.ff2_b = add(p + "ff2.bias", d, 1, Init::Zeros);
    l.layers.push_back(s);
  }
  l.encoder_count = static_cast<int>(l.specs.size());

  const int e = cfg.embedding_dim();
  l.head1_w = add("head.fc1.weight", cfg.head_hidden, e, Init::Uniform, relu_bound(e));
  l.head1_b = add("head.fc1.bias", cfg.head_hidden, 1, Init::Zeros);
  l.head2_w = add("head.fc2.weight", 1, cfg.head_hidden, Init::Uniform, linear_bound(cfg.head_hidden));
  l.head2_b = add("head.fc2.bias", 1, 1, Init::Zeros);
  return l;
}

// ---------------------------------------------------------------------------
// ModelParams

template <typename S>
int ModelParams<S>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

template <typename S>
ModelParams<S> ModelParams<S>::zeros_like() const {
  ModelParams out;
  out.config = config;
  out.seed = seed;
  out.names = names;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.push_back(Matrix<S>::Zero(t.rows(), t.cols()));
  return out;
}

template <typename S>
void ModelParams<S>::set_zero() {
  for (auto& t : tensors) t.setZero();
}

template <typename S>
Eigen::Index ModelParams<S>::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template <typename S>
bool ModelParams<S>::all_finite() const {
  for (const auto& t : tensors) {
    if (!t.allFinite()) return false;
  }
  return true;
}

template <typename S>
ModelParams<S> init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  const ParamLayout layout = ParamLayout::make(cfg);
  std::mt19937_64 rng(seed);
  ModelParams<S> p;
  p.config = cfg;
  p.seed = seed;
  for (const auto& spec : layout.specs) {
    p.names.push_back(spec.name);
    Matrix<S> t(spec.rows, spec.cols);
    switch (spec.init) {
      case ParamSpec::Init::Zeros: t.setZero(); break;
      case ParamSpec::Init::Ones: t.setOnes(); break;
      case ParamSpec::Init::Uniform: {
        std::uniform_real_distribution<double> dist(-spec.bound, spec.bound);
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
          for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = static_cast<S>(dist(rng));
        }
        break;
      }
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

template <typename S>
ModelInput<S> make_model_input(const Sample& sample, const EncoderConfig& cfg) {
  const Region& region = sample.rain.region();
  const int h = region.height_cells;
  const int w = region.width_cells;
  const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
  ModelInput<S> in;
  in.height = h;
  in.width = w;
  in.frames = static_cast<int>(sample.rain.size());
  in.rain.resize(1, in.frames * hw);
  const S inv_scale = static_cast<S>(1.0 / cfg.rain_scale);
  for (int t = 0; t < in.frames; ++t) {
    const GridF& g = sample.rain[static_cast<std::size_t>(t)].values;
    for (Eigen::Index i = 0; i < hw; ++i) in.rain(0, t * hw + i) = static_cast<S>(g.data()[i]) * inv_scale;
  }
  in.terrain.resize(kTerrainChannels, hw);
  for (int c = 0; c < kElevationChannel; ++c) {
    const GridF& g = sample.terrain->channel(c);
    for (Eigen::Index i = 0; i < hw; ++i) in.terrain(c, i) = static_cast<S>(g.data()[i]);
  }
  const GridD elev = sample.model_elevation();
  for (Eigen::Index i = 0; i < hw; ++i) in.terrain(kElevationChannel, i) = static_cast<S>(elev.data()[i]);
  return in;
}

// ---------------------------------------------------------------------------
// Encoder

namespace {

template <typename S>
nn::AttentionParams<S> attention_params(const ModelParams<S>& p, const TransformerSlots& s) {
  return {p[s.wq], p[s.bq], p[s.wk], p[s.bk], p[s.wv], p[s.bv], p[s.wo], p[s.bo]};
}

template <typename S>
nn::AttentionGrads<S> attention_grads(ModelParams<S>& g, const TransformerSlots& s) {
  return {g[s.wq], g[s.bq], g[s.wk], g[s.bk], g[s.wv], g[s.bv], g[s.wo], g[s.bo]};
}

void check_layout(const ParamLayout& layout, std::size_t count) {
  if (layout.specs.size() != count) throw ValidationError("parameter set does not match the encoder configuration");
}

}  // namespace

template <typename S>
Embedding<S> encode(const ModelInput<S>& input, const ModelParams<S>& params, bool normalize, EncoderTape<S>* tape) {
  const EncoderConfig& cfg = params.config;
  const ParamLayout layout = ParamLayout::make(cfg);
  check_layout(layout, params.size());
  const Eigen::Index hw = static_cast<Eigen::Index>(input.height) * input.width;
  if (input.terrain.rows() != cfg.terrain_channels || input.terrain.cols() != hw) {
    throw ValidationError("encode: terrain input has the wrong shape");
  }
  if (input.frames < 1 || input.frames > cfg.max_positions || input.rain.rows() != 1 ||
      input.rain.cols() != input.frames * hw) {
    throw ValidationError("encode: rain input has the wrong shape");
  }

  EncoderTape<S> local;
  EncoderTape<S>& tp = tape != nullptr ? *tape : local;
  tp = EncoderTape<S>{};
  tp.height = input.height;
  tp.width = input.width;
  tp.frames = input.frames;

  // Terrain branch.
  tp.terrain_act1 = nn::relu<S>(nn::conv3x3_forward<S>(input.terrain, input.height, input.width,
                                                       params[layout.terrain_conv1_w], params[layout.terrain_conv1_b],
                                                       tp.terrain_cols1));
  tp.terrain_act2 = nn::relu<S>(nn::conv3x3_forward<S>(tp.terrain_act1, input.height, input.width,
                                                       params[layout.terrain_conv2_w], params[layout.terrain_conv2_b],
                                                       tp.terrain_cols2));
  const Matrix<S> terrain_vec = nn::mean_pool<S>(tp.terrain_act2);

  // Rain branch.
  tp.rain_act1 = nn::relu<S>(nn::conv3x3_forward<S>(input.rain, input.height, input.width,
                                                    params[layout.rain_conv1_w], params[layout.rain_conv1_b],
                                                    tp.rain_cols1));
  tp.rain_act2 = nn::relu<S>(nn::conv3x3_forward<S>(tp.rain_act1, input.height, input.width,
                                                    params[layout.rain_conv2_w], params[layout.rain_conv2_b],
                                                    tp.rain_cols2));
  tp.frame_features = nn::frame_mean_pool<S>(tp.rain_act2, hw);
  Matrix<S> x = nn::linear_forward<S>(tp.frame_features, params[layout.token_w], params[layout.token_b]);
  x += nn::positional_encoding<S>(cfg.token_dim, input.frames);

  const S eps = static_cast<S>(cfg.layer_norm_eps);
  tp.layers.resize(layout.layers.size());
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const TransformerSlots& s = layout.layers[l];
    TransformerTape<S>& lt = tp.layers[l];
    lt.x_in = x;
    const Matrix<S> a = nn::layer_norm_forward<S>(x, params[s.ln1_gamma], params[s.ln1_beta], eps, lt.ln1);
    const Matrix<S> h = x + nn::attention_forward<S>(a, attention_params(params, s), cfg.heads, lt.attention);
    lt.ln2_out = nn::layer_norm_forward<S>(h, params[s.ln2_gamma], params[s.ln2_beta], eps, lt.ln2);
    lt.ff_hidden = nn::relu<S>(nn::linear_forward<S>(lt.ln2_out, params[s.ff1_w], params[s.ff1_b]));
    x = h + nn::linear_forward<S>(lt.ff_hidden, params[s.ff2_w], params[s.ff2_b]);
  }
  tp.tokens_out = x;
  const Matrix<S> rain_vec = nn::mean_pool<S>(x);

  tp.embedding.resize(cfg.embedding_dim());
  tp.embedding << rain_vec.col(0), terrain_vec.col(0);
  tp.normalized = normalize;
  tp.norm = tp.embedding.norm();
  tp.complete = true;

  Embedding<S> out;
  out.normalized = normalize;
  out.z = tp.embedding;
  if (normalize) {
    // A zero embedding has no direction; it stays zero.
    if (tp.norm > S(0)) out.z /= tp.norm;
  }
  return out;
}

template <typename S>
Embedding<S> encode(const Sample& sample, const ModelParams<S>& params, bool normalize) {
  return encode<S>(make_model_input<S>(sample, params.config), params, normalize, nullptr);
}

template <typename S>
void encode_backward(const EncoderTape<S>& tp, const ModelParams<S>& params, const Vector<S>& dz,
                     ModelParams<S>& grads, InputGrads<S>* input_grads) {
  if (!tp.complete) throw std::logic_error("encode_backward called without a completed forward pass");
  const EncoderConfig& cfg = params.config;
  const ParamLayout layout = ParamLayout::make(cfg);
  check_layout(layout, params.size());
  check_layout(layout, grads.size());
  if (dz.size() != cfg.embedding_dim()) throw ValidationError("encode_backward: gradient has the wrong length");
  const Eigen::Index hw = static_cast<Eigen::Index>(tp.height) * tp.width;

  Vector<S> de = dz;
  if (tp.normalized && tp.norm > S(0)) {
    const Vector<S> z = tp.embedding / tp.norm;
    de = (dz - z * z.dot(dz)) / tp.norm;
  }
  const Matrix<S> d_rain_vec = de.head(cfg.token_dim);
  const Matrix<S> d_terrain_vec = de.tail(cfg.terrain_out);

  // Transformer stack, last layer first.
  Matrix<S> dx = nn::mean_pool_backward<S>(d_rain_vec, tp.tokens_out.cols());
  for (std::size_t li = layout.layers.size(); li-- > 0;) {
    const TransformerSlots& s = layout.layers[li];
    const TransformerTape<S>& lt = tp.layers[li];
    Matrix<S> d_hidden;
    nn::linear_backward<S>(dx, lt.ff_hidden, params[s.ff2_w], grads[s.ff2_w], grads[s.ff2_b], &d_hidden);
    d_hidden = nn::relu_backward<S>(d_hidden, lt.ff_hidden);
    Matrix<S> d_ln2;
    nn::linear_backward<S>(d_hidden, lt.ln2_out, params[s.ff1_w], grads[s.ff1_w], grads[s.ff1_b], &d_ln2);
    Matrix<S> dh = dx + nn::layer_norm_backward<S>(d_ln2, params[s.ln2_gamma], lt.ln2, grads[s.ln2_gamma],
                                                   grads[s.ln2_beta]);
    auto ag = attention_grads(grads, s);
    const Matrix<S> da = nn::attention_backward<S>(dh, lt.attention, attention_params(params, s), cfg.heads, ag);
    dx = dh + nn::layer_norm_backward<S>(da, params[s.ln1_gamma], lt.ln1, grads[s.ln1_gamma], grads[s.ln1_beta]);
  }

  // Token projection and rain CNN.
  Matrix<S> d_frames;
  nn::linear_backward<S>(dx, tp.frame_features, params[layout.token_w], grads[layout.token_w], grads[layout.token_b],
                         &d_frames);
  Matrix<S> d_act = nn::relu_backward<S>(nn::frame_mean_pool_backward<S>(d_frames, hw), tp.rain_act2);
  Matrix<S> d_prev;
  nn::conv3x3_backward<S>(d_act, tp.rain_cols2, tp.height, tp.width, params[layout.rain_conv2_w],
                          grads[layout.rain_conv2_w], grads[layout.rain_conv2_b], &d_prev);
  d_act = nn::relu_backward<S>(d_prev, tp.rain_act1);
  nn::conv3x3_backward<S>(d_act, tp.rain_cols1, tp.height, tp.width, params[layout.rain_conv1_w],
                          grads[layout.rain_conv1_w], grads[layout.rain_conv1_b],
                          input_grads != nullptr ? &input_grads->rain : nullptr);

  // Terrain CNN.
  d_act = nn::relu_backward<S>(nn::mean_pool_backward<S>(d_terrain_vec, hw), tp.terrain_act2);
  nn::conv3x3_backward<S>(d_act, tp.terrain_cols2, tp.height, tp.width, params[layout.terrain_conv2_w],
                          grads[layout.terrain_conv2_w], grads[layout.terrain_conv2_b], &d_prev);
  d_act = nn::relu_backward<S>(d_prev, tp.terrain_act1);
  nn::conv3x3_backward<S>(d_act, tp.terrain_cols1, tp.height, tp.width, params[layout.terrain_conv1_w],
                          grads[layout.terrain_conv1_w], grads[layout.terrain_conv1_b],
                          input_grads != nullptr ? &input_grads->terrain : nullptr);
}

// ---------------------------------------------------------------------------
// Head

template <typename S>
S predict_logit(const Vector<S>& z, const ModelParams<S>& params, HeadTape<S>* tape) {
  const ParamLayout layout = ParamLayout::make(params.config);
  check_layout(layout, params.size());
  if (z.size() != params.config.embedding_dim()) throw ValidationError("predict: embedding has the wrong length");
  HeadTape<S> local;
  HeadTape<S>& tp = tape != nullptr ? *tape : local;
  tp.z = z;
  tp.hidden = nn::relu<S>(nn::linear_forward<S>(tp.z, params[layout.head1_w], params[layout.head1_b]));
  tp.logit = nn::linear_forward<S>(tp.hidden, params[layout.head2_w], params[layout.head2_b])(0, 0);
  tp.complete = true;
  return tp.logit;
}

template <typename S>
S predict(const Embedding<S>& embedding, const ModelParams<S>& params) {
  return nn::sigmoid(predict_logit<S>(embedding.z, params));
}

template <typename S>
Vector<S> head_backward(const HeadTape<S>& tp, const ModelParams<S>& params, S dlogit, ModelParams<S>& grads) {
  if (!tp.complete) throw std::logic_error("head_backward called without a completed forward pass");
  const ParamLayout layout = ParamLayout::make(params.config);
  const Matrix<S> dl = Matrix<S>::Constant(1, 1, dlogit);
  Matrix<S> d_hidden;
  nn::linear_backward<S>(dl, tp.hidden, params[layout.head2_w], grads[layout.head2_w], grads[layout.head2_b],
                         &d_hidden);
  d_hidden = nn::relu_backward<S>(d_hidden, tp.hidden);
  Matrix<S> dz;
  nn::linear_backward<S>(d_hidden, tp.z, params[layout.head1_w], grads[layout.head1_w], grads[layout.head1_b], &dz);
  return dz.col(0);
}

// ---------------------------------------------------------------------------
// AdamW

template <typename S>
void adamw_step(ModelParams<S>& params, const ModelParams<S>& grads, AdamWState<S>& state, const AdamWConfig& cfg,
                const std::vector<double>* lr_scale) {
  if (grads.size() != params.size()) throw ValidationError("adamw: gradient set does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.tensors[i].rows() != params.tensors[i].rows() || grads.tensors[i].cols() != params.tensors[i].cols()) {
      throw ValidationError("adamw: gradient shape mismatch for '" + params.names[i] + "'");
    }
    if (!grads.tensors[i].allFinite()) throw ValidationError("adamw: non-finite gradient in '" + params.names[i] + "'");
  }
  if (lr_scale != nullptr && lr_scale->size() != params.size()) {
    throw ValidationError("adamw: learning-rate scale list does not match parameters");
  }
  if (state.m.empty()) {
    for (const auto& t : params.tensors) {
      state.m.push_back(Matrix<S>::Zero(t.rows(), t.cols()));
      state.v.push_back(Matrix<S>::Zero(t.rows(), t.cols()));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double scale = lr_scale != nullptr ? (*lr_scale)[i] : 1.0;
    if (scale == 0.0) continue;
    const double lr = cfg.lr * scale;
    Matrix<S>& p = params.tensors[i];
    const Matrix<S>& g = grads.tensors[i];
    state.m[i] = b1 * state.m[i] + (S(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (S(1) - b2) * g.cwiseAbs2();
    p *= static_cast<S>(1.0 - lr * cfg.weight_decay);
    const auto m_hat = state.m[i].array() / static_cast<S>(bc1);
    const auto v_hat = state.v[i].array() / static_cast<S>(bc2);
    p.array() -= static_cast<S>(lr) * m_hat / (v_hat.sqrt() + static_cast<S>(cfg.eps));
  }
}

// ---------------------------------------------------------------------------

#define LEWS_INSTANTIATE_NEURAL(S)                                                                             \
  template struct ModelParams<S>;                                                                              \
  template ModelParams<S> init_params<S>(const EncoderConfig&, std::uint64_t);                                 \
  template ModelInput<S> make_model_input<S>(const Sample&, const EncoderConfig&);                             \
  template Embedding<S> encode<S>(const ModelInput<S>&, const ModelParams<S>&, bool, EncoderTape<S>*);         \
  template Embedding<S> encode<S>(const Sample&, const ModelParams<S>&, bool);                                 \
  template void encode_backward<S>(const EncoderTape<S>&, const ModelParams<S>&, const Vector<S>&,             \
                                   ModelParams<S>&, InputGrads<S>*);                                           \
  template S predict_logit<S>(const Vector<S>&, const ModelParams<S>&, HeadTape<S>*);                          \
  template S predict<S>(const Embedding<S>&, const ModelParams<S>&);                                           \
  template Vector<S> head_backward<S>(const HeadTape<S>&, const ModelParams<S>&, S, ModelParams<S>&);          \
  template void adamw_step<S>(ModelParams<S>&, const ModelParams<S>&, AdamWState<S>&, const AdamWConfig&,      \
                              const std::vector<double>*);

LEWS_INSTANTIATE_NEURAL(float)
LEWS_INSTANTIATE_NEURAL(double)

#undef LEWS_INSTANTIATE_NEURAL

}  // namespace lews
