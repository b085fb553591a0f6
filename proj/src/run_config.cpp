#include "lews/run_config.hpp"

#include <set>

#include "lews/config_io.hpp"
#include "lews/geogrid.hpp"

namespace lews {

void RunConfig::propagate() {
  synth.seed = seed;
  augment.seed = seed;
  train.seed = seed;
  train.augment = augment;
  train.encoder = encoder;
}

void RunConfig::validate() const {
  if (data_dir.empty() || out_dir.empty()) throw ValidationError("config: paths.data_dir and paths.out_dir must be set");
  if (forecast_horizon < 1) throw ValidationError("config: forecast.horizon must be >= 1");
  if (!(target_recall > 0.0 && target_recall <= 1.0)) throw ValidationError("config: eval.target_recall must be in (0, 1]");
  synth.validate();
  flow.validate();
  sample.validate();
  augment.validate();
  train.validate();
  encoder.validate();
}

Manifest RunConfig::to_manifest() const {
  Manifest m;
  m.set("paths.data_dir", data_dir);
  m.set("paths.out_dir", out_dir);
  m.set("run.seed", std::to_string(seed));
  // The dataset seed always follows run.seed.
  Manifest synth_keys;
  write_config(synth, synth_keys, "synth.");
  for (const auto& [key, value] : synth_keys.entries()) {
    if (key != "synth.seed") m.set(key, value);
  }
  write_config(flow, m, "flow.");
  m.set("forecast.horizon", forecast_horizon);
  write_config(sample, m, "sample.");
  write_config(augment, m, "augment.");
  write_config(train, m, "train.");
  write_config(encoder, m, "encoder.");
  m.set("eval.target_recall", target_recall);
  return m;
}

void RunConfig::apply(const Manifest& m) {
  const Manifest defaults = RunConfig{}.to_manifest();
  std::set<std::string> known;
  for (const auto& [key, value] : defaults.entries()) known.insert(key);
  for (const auto& [key, value] : m.entries()) {
    if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "'");
  }
  try {
    ManifestReader paths{m, "paths."};
    paths("data_dir", data_dir);
    paths("out_dir", out_dir);
    ManifestReader run{m, "run."};
    run("seed", seed);
    read_config(synth, m, "synth.");
    read_config(flow, m, "flow.");
    ManifestReader fc{m, "forecast."};
    fc("horizon", forecast_horizon);
    read_config(sample, m, "sample.");
    read_config(augment, m, "augment.");
    read_config(train, m, "train.");
    read_config(encoder, m, "encoder.");
    ManifestReader ev{m, "eval."};
    ev("target_recall", target_recall);
  } catch (const IoError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const Manifest m = Manifest::parse(read_text_file(path));
  RunConfig cfg;
  cfg.apply(m);
  return cfg;
}

void RunConfig::save(const std::filesystem::path& path) const { to_manifest().write(path); }

}  // namespace lews
