// Whole-run configuration: paths, master seed and every module config, as
// `section.key = value` text.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lews/augment.hpp"
#include "lews/manifest.hpp"
#include "lews/motion.hpp"
#include "lews/neural.hpp"
#include "lews/pipeline.hpp"
#include "lews/synth.hpp"
#include "lews/training.hpp"

namespace lews {

struct RunConfig {
  std::string data_dir = "data";
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  SynthConfig synth;
  FlowConfig flow;
  int forecast_horizon = 8;
  SampleConfig sample;
  AugmentConfig augment;
  TrainConfig train;
  EncoderConfig encoder;
  double target_recall = 0.8;

  /// Copies the master seed and shared sections into the module configs.
  void propagate();
  void validate() const;

  Manifest to_manifest() const;
  /// Overlays `m` on the current values. Unknown keys and bad values throw ValidationError.
  void apply(const Manifest& m);

  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace lews
