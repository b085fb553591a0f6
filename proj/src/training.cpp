#include "lews/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lews/manifest.hpp"

namespace lews {

using nn::Matrix;
using nn::Vector;

namespace {

constexpr std::uint64_t kOrderStream = 11;
constexpr std::uint64_t kProbeStream = 12;
constexpr std::uint64_t kViewStream = 13;

void require_both_classes(std::span<const Sample> train, const char* what) {
  bool pos = false, neg = false;
  for (const auto& s : train) {
    pos = pos || s.label == 1;
    neg = neg || s.label == 0;
  }
  if (!pos || !neg) throw ValidationError(std::string(what) + ": training set must contain both classes");
}

int steps_for(const TrainConfig& cfg, std::size_t n) {
  if (cfg.steps_per_epoch > 0) return cfg.steps_per_epoch;
  return static_cast<int>((n + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size));
}

// Endless shuffled pass over a fixed index list.
class Cycler {
 public:
  Cycler(std::vector<std::size_t> items, Rng& rng) : items_(std::move(items)), rng_(rng) { reshuffle(); }
  std::size_t next() {
    if (pos_ == items_.size()) reshuffle();
    return items_[pos_++];
  }

 private:
  void reshuffle() {
    std::shuffle(items_.begin(), items_.end(), rng_);
    pos_ = 0;
  }
  std::vector<std::size_t> items_;
  Rng& rng_;
  std::size_t pos_ = 0;
};

std::vector<double> encoder_scales(const ModelParams<float>& p, double encoder, double head) {
  const ParamLayout layout = ParamLayout::make(p.config);
  std::vector<double> s(p.size(), head);
  for (int i = 0; i < layout.encoder_count; ++i) s[static_cast<std::size_t>(i)] = encoder;
  return s;
}

// Class-balanced batch: half positives (oversampled), the rest negatives.
std::vector<std::size_t> balanced_batch(int batch_size, Cycler& positives, Cycler& negatives) {
  std::vector<std::size_t> batch;
  const int n_pos = batch_size / 2;
  for (int i = 0; i < n_pos; ++i) batch.push_back(positives.next());
  for (int i = n_pos; i < batch_size; ++i) batch.push_back(negatives.next());
  return batch;
}

struct ContrastiveStep {
  double loss = 0.0;
  bool skipped = false;
};

// Encodes original + augmented views of `batch`; accumulates gradients when `grads` is given.
ContrastiveStep contrastive_step(std::span<const Sample> train, const std::vector<std::size_t>& batch,
                                 const ModelParams<float>& params, const TrainConfig& cfg, std::uint64_t extra,
                                 ModelParams<float>* grads) {
  const int views = cfg.views_per_sample;
  const auto n = static_cast<Eigen::Index>(batch.size()) * views;
  ContrastiveBatch<float> cb;
  cb.temperature = static_cast<float>(cfg.temperature);
  cb.embeddings.resize(cfg.encoder.embedding_dim(), n);
  std::vector<EncoderTape<float>> tapes(grads != nullptr ? static_cast<std::size_t>(n) : 0);
  Eigen::Index col = 0;
  for (const std::size_t i : batch) {
    for (int v = 0; v < views; ++v) {
      EncoderTape<float>* tape = grads != nullptr ? &tapes[static_cast<std::size_t>(col)] : nullptr;
      if (v == 0) {
        cb.embeddings.col(col) = encode<float>(make_model_input<float>(train[i], cfg.encoder), params, true, tape).z;
      } else {
        Rng rng = derive_stream(cfg.seed, i, static_cast<std::uint64_t>(v), extra);
        const Sample view = augment_sample(train[i], cfg.augment, rng);
        cb.embeddings.col(col) = encode<float>(make_model_input<float>(view, cfg.encoder), params, true, tape).z;
      }
      cb.labels.push_back(train[i].label);
      ++col;
    }
  }
  const auto r = rmcl_loss<float>(cb, grads != nullptr);
  if (grads != nullptr && !r.all_skipped) {
    for (Eigen::Index c = 0; c < n; ++c) {
      encode_backward<float>(tapes[static_cast<std::size_t>(c)], params, r.grad.col(c), *grads);
    }
  }
  return {static_cast<double>(r.loss), r.all_skipped};
}

struct FocalStep {
  double loss = 0.0;
};

FocalStep focal_step(const std::vector<const ModelInput<float>*>& inputs, const std::vector<int>& labels,
                     const ModelParams<float>& params, const FocalConfig& focal, ModelParams<float>* grads) {
  const auto n = static_cast<float>(inputs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    EncoderTape<float> tape;
    HeadTape<float> head;
    const auto z = encode<float>(*inputs[k], params, false, grads != nullptr ? &tape : nullptr);
    const float logit = predict_logit<float>(z.z, params, &head);
    total += static_cast<double>(focal_loss<float>(nn::sigmoid(logit), labels[k], focal));
    if (grads != nullptr) {
      const float dlogit = focal_loss_grad_logit<float>(logit, labels[k], focal) / n;
      const Vector<float> dz = head_backward<float>(head, params, dlogit, *grads);
      encode_backward<float>(tape, params, dz, *grads);
    }
  }
  return {total / static_cast<double>(inputs.size())};
}

AdamWConfig optimizer(const TrainConfig& cfg) {
  AdamWConfig a;
  a.lr = cfg.lr;
  a.weight_decay = cfg.weight_decay;
  return a;
}

}  // namespace

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::RMCL: return "rmcl";
    case TrainMode::EndToEnd: return "end-to-end";
    case TrainMode::EndToEndForecast: return "end-to-end-forecast";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "rmcl") return TrainMode::RMCL;
  if (s == "end-to-end") return TrainMode::EndToEnd;
  if (s == "end-to-end-forecast") return TrainMode::EndToEndForecast;
  throw ValidationError("unknown training mode '" + s + "' (rmcl, end-to-end, end-to-end-forecast)");
}

std::string to_string(Trainable t) {
  switch (t) {
    case Trainable::All: return "all";
    case Trainable::Head: return "head";
    case Trainable::FinalBias: return "final-bias";
  }
  return "?";
}

Trainable parse_trainable(const std::string& s) {
  if (s == "all") return Trainable::All;
  if (s == "head") return Trainable::Head;
  if (s == "final-bias") return Trainable::FinalBias;
  throw ValidationError("unknown trainable set '" + s + "' (all, head, final-bias)");
}

void TrainConfig::validate() const {
  if (pretrain_epochs < 0 || finetune_epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (batch_size < 2) throw ValidationError("train: batch_size must be >= 2");
  if (views_per_sample < 1) throw ValidationError("train: views_per_sample must be >= 1");
  if (steps_per_epoch < 0) throw ValidationError("train: steps_per_epoch must be >= 0");
  if (!(lr > 0.0) || !(weight_decay >= 0.0)) throw ValidationError("train: need lr > 0 and weight_decay >= 0");
  if (!(temperature > 0.0)) throw ValidationError("train: temperature must be positive");
  if (!(encoder_lr_scale >= 0.0)) throw ValidationError("train: encoder_lr_scale must be >= 0");
  if (probe_size < 1) throw ValidationError("train: probe_size must be >= 1");
  parse_trainable(trainable);
  focal.validate();
  augment.validate();
  encoder.validate();
}

TrainResult pretrain_rmcl(std::span<const Sample> train, const TrainConfig& cfg) {
  cfg.validate();
  if (train.size() < 2) throw ValidationError("pretrain: need at least two samples");
  require_both_classes(train, "pretrain");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < train.size(); ++i) (train[i].label == 1 ? pos : neg).push_back(i);

  TrainResult out;
  out.params = init_params<float>(cfg.encoder, cfg.seed);
  const std::vector<double> scales = encoder_scales(out.params, 1.0, 0.0);
  AdamWState<float> state;
  const AdamWConfig opt = optimizer(cfg);

  Rng probe_rng = derive_stream(cfg.seed, 0, 0, kProbeStream);
  Cycler probe_pos(pos, probe_rng), probe_neg(neg, probe_rng);
  const auto probe = balanced_batch(cfg.batch_size, probe_pos, probe_neg);
  // Probe views use a fixed stream discriminator so every epoch sees the same inputs.
  const std::uint64_t probe_extra = ~std::uint64_t{0};
  auto probe_loss = [&] { return contrastive_step(train, probe, out.params, cfg, probe_extra, nullptr).loss; };
  out.history.push_back({0, probe_loss(), 0.0});

  Rng order = derive_stream(cfg.seed, 0, 0, kOrderStream);
  Cycler positives(pos, order), negatives(neg, order);
  const int steps = steps_for(cfg, train.size());
  auto grads = out.params.zeros_like();
  std::uint64_t step_counter = 0;
  for (int epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    double total = 0.0;
    for (int s = 0; s < steps; ++s) {
      const auto batch = balanced_batch(cfg.batch_size, positives, negatives);
      grads.set_zero();
      const auto r = contrastive_step(train, batch, out.params, cfg, step_counter++, &grads);
      total += r.loss;
      if (r.skipped) {
        ++out.skipped_batches;
        continue;
      }
      adamw_step(out.params, grads, state, opt, &scales);
    }
    out.history.push_back({epoch, probe_loss(), total / steps});
  }
  return out;
}

TrainResult finetune(std::span<const Sample> train, const ModelParams<float>& start, const TrainConfig& cfg,
                     bool augment_inputs) {
  cfg.validate();
  if (train.empty()) throw ValidationError("finetune: no training samples");
  require_both_classes(train, "finetune");
  if (!(start.config == cfg.encoder) || start.size() != ParamLayout::make(cfg.encoder).specs.size()) {
    throw ValidationError("finetune: starting parameters do not match the encoder configuration");
  }

  TrainResult out;
  out.params = start;
  std::vector<double> scales;
  switch (parse_trainable(cfg.trainable)) {
    case Trainable::All: scales = encoder_scales(out.params, cfg.encoder_lr_scale, 1.0); break;
    case Trainable::Head: scales = encoder_scales(out.params, 0.0, 1.0); break;
    case Trainable::FinalBias:
      scales.assign(out.params.size(), 0.0);
      scales[static_cast<std::size_t>(out.params.index_of("head.fc2.bias"))] = 1.0;
      break;
  }
  AdamWState<float> state;
  const AdamWConfig opt = optimizer(cfg);

  std::vector<ModelInput<float>> inputs;
  inputs.reserve(train.size());
  for (const auto& s : train) inputs.push_back(make_model_input<float>(s, cfg.encoder));

  // Probe: evenly spaced training samples.
  const std::size_t probe_n = std::min(train.size(), static_cast<std::size_t>(cfg.probe_size));
  std::vector<const ModelInput<float>*> probe_inputs;
  std::vector<int> probe_labels;
  for (std::size_t k = 0; k < probe_n; ++k) {
    const std::size_t i = k * train.size() / probe_n;
    probe_inputs.push_back(&inputs[i]);
    probe_labels.push_back(train[i].label);
  }
  auto probe_loss = [&] { return focal_step(probe_inputs, probe_labels, out.params, cfg.focal, nullptr).loss; };
  out.history.push_back({0, probe_loss(), 0.0});

  Rng order = derive_stream(cfg.seed, 1, 0, kOrderStream);
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  Cycler cycle(all, order);
  const int steps = steps_for(cfg, train.size());
  const auto batch_size = std::min(static_cast<std::size_t>(cfg.batch_size), train.size());
  auto grads = out.params.zeros_like();
  std::uint64_t step_counter = 0;
  for (int epoch = 1; epoch <= cfg.finetune_epochs; ++epoch) {
    double total = 0.0;
    for (int s = 0; s < steps; ++s) {
      std::vector<const ModelInput<float>*> batch;
      std::vector<int> labels;
      std::vector<ModelInput<float>> views;
      views.reserve(batch_size);
      for (std::size_t k = 0; k < batch_size; ++k) {
        const std::size_t i = cycle.next();
        labels.push_back(train[i].label);
        if (augment_inputs) {
          Rng rng = derive_stream(cfg.seed, i, kViewStream, step_counter);
          views.push_back(make_model_input<float>(augment_sample(train[i], cfg.augment, rng), cfg.encoder));
          batch.push_back(&views.back());
        } else {
          batch.push_back(&inputs[i]);
        }
      }
      ++step_counter;
      grads.set_zero();
      total += focal_step(batch, labels, out.params, cfg.focal, &grads).loss;
      adamw_step(out.params, grads, state, opt, &scales);
    }
    out.history.push_back({epoch, probe_loss(), total / steps});
  }
  return out;
}

TrainResult train_baseline(std::span<const Sample> train, TrainMode mode, const TrainConfig& cfg) {
  if (mode == TrainMode::RMCL) throw ValidationError("train_baseline: mode must be end-to-end or end-to-end-forecast");
  const RainSetting want =
      mode == TrainMode::EndToEnd ? RainSetting::ObservedRainfall : RainSetting::ForecastedRainfall;
  for (const auto& s : train) {
    if (s.setting != want) {
      throw ValidationError("train_baseline: " + to_string(mode) + " needs " + to_string(want) + " samples");
    }
  }
  cfg.validate();
  return finetune(train, init_params<float>(cfg.encoder, cfg.seed), cfg, false);
}

TrainResult train_rmcl(std::span<const Sample> train, const TrainConfig& cfg) {
  TrainResult pre = pretrain_rmcl(train, cfg);
  TrainResult fine = finetune(train, pre.params, cfg, cfg.finetune_augment);
  fine.skipped_batches = pre.skipped_batches;
  return fine;
}

std::vector<double> score_samples(const ModelParams<float>& params, std::span<const Sample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(static_cast<double>(predict<float>(encode<float>(s, params, false), params)));
  return out;
}

void write_loss_csv(const std::vector<EpochLoss>& history, const std::filesystem::path& path) {
  std::string text = "epoch,loss\n";
  for (const auto& e : history) text += std::to_string(e.epoch) + "," + format_real(e.probe_loss) + "\n";
  write_text_file(path, text);
}

}  // namespace lews
