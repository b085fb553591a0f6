// Training procedures: RMCL pretraining, focal-loss fine-tuning and the
// end-to-end baselines.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lews/augment.hpp"
#include "lews/losses.hpp"
#include "lews/neural.hpp"
#include "lews/sample.hpp"

namespace lews {

enum class TrainMode { RMCL, EndToEnd, EndToEndForecast };

std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

/// Which tensors fine-tuning updates.
enum class Trainable { All, Head, FinalBias };

std::string to_string(Trainable t);
Trainable parse_trainable(const std::string& s);

struct TrainConfig {
  int pretrain_epochs = 100;
  int finetune_epochs = 50;
  int batch_size = 32;
  /// Views per sample in RMCL batches, the original included.
  int views_per_sample = 2;
  /// Optimizer steps per epoch; 0 means one pass, ceil(n / batch_size).
  int steps_per_epoch = 0;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double temperature = 0.1;
  /// Learning-rate multiplier for encoder tensors during fine-tuning.
  double encoder_lr_scale = 1.0;
  /// Replace fine-tuning inputs by augmented views (RMCL mode only).
  bool finetune_augment = false;
  /// Training samples in the fixed probe set whose loss is recorded per epoch.
  int probe_size = 256;
  std::string trainable = "all";
  std::uint64_t seed = 0;
  FocalConfig focal;
  AugmentConfig augment;
  EncoderConfig encoder;

  void validate() const;

  template <class Self, class V>
  static void visit(Self& s, V& v) {
    v("pretrain_epochs", s.pretrain_epochs);
    v("finetune_epochs", s.finetune_epochs);
    v("batch_size", s.batch_size);
    v("views_per_sample", s.views_per_sample);
    v("steps_per_epoch", s.steps_per_epoch);
    v("lr", s.lr);
    v("weight_decay", s.weight_decay);
    v("temperature", s.temperature);
    v("encoder_lr_scale", s.encoder_lr_scale);
    v("finetune_augment", s.finetune_augment);
    v("probe_size", s.probe_size);
    v("trainable", s.trainable);
    v("focal_alpha", s.focal.alpha);
    v("focal_gamma", s.focal.gamma);
    v("focal_clamp", s.focal.clamp);
  }
};

struct EpochLoss {
  int epoch = 0;
  /// Loss on the fixed probe set; epoch 0 is before any update.
  double probe_loss = 0.0;
  /// Mean loss over the epoch's batches; 0 at epoch 0.
  double train_loss = 0.0;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<EpochLoss> history;
  /// RMCL batches in which no anchor had a positive.
  int skipped_batches = 0;
};

/// Contrastive pretraining of the encoder on class-balanced batches of
/// original and augmented views. Head tensors are left as initialized.
TrainResult pretrain_rmcl(std::span<const Sample> train, const TrainConfig& cfg);

/// Focal-loss training of the head and (per `cfg.trainable`) the encoder.
TrainResult finetune(std::span<const Sample> train, const ModelParams<float>& start, const TrainConfig& cfg,
                     bool augment_inputs = false);

/// Focal-loss training from a seeded random initialization. EndToEndForecast
/// requires ForecastedRainfall samples, EndToEnd ObservedRainfall ones.
TrainResult train_baseline(std::span<const Sample> train, TrainMode mode, const TrainConfig& cfg);

/// Pretrain then fine-tune on the same samples.
TrainResult train_rmcl(std::span<const Sample> train, const TrainConfig& cfg);

/// Landslide probabilities of the samples.
std::vector<double> score_samples(const ModelParams<float>& params, std::span<const Sample> samples);

/// `epoch,loss` with the probe loss per epoch.
void write_loss_csv(const std::vector<EpochLoss>& history, const std::filesystem::path& path);

}  // namespace lews
