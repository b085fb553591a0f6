// Synthetic landslide scenarios: terrain, advected rain cells, and events
// from an antecedent-precipitation trigger oracle.
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lews/geogrid.hpp"

namespace lews {

struct SynthConfig {
  int n_regions = 19;
  int hours = 17520;
  int height = 10;
  int width = 10;
  double cell_km = 1.0;

  // Weather regime: a two-state chain per region; rain cells are born at a
  // Poisson rate that depends on the state.
  double wet_start_prob = 0.02;  // per dry hour
  double wet_mean_hours = 18.0;
  double birth_rate_wet = 0.6;  // cells per hour
  double birth_rate_dry = 0.02;
  double amplitude_min = 2.0;  // mm/h at the cell peak
  double amplitude_max = 20.0;
  double cell_sigma_min = 1.5;  // cells
  double cell_sigma_max = 3.0;
  double lifetime_min = 3.0;  // hours
  double lifetime_max = 12.0;
  double speed_min = 0.3;  // cells/h
  double speed_max = 1.5;
  double wind_turn_sigma = 0.15;  // radians per hour, random walk of the wind heading

  // Trigger oracle.
  double api_decay = 0.85;
  double trigger_threshold = 60.0;  // mm of antecedent precipitation
  double steep_gradient = 0.6;      // |grad| of normalized elevation, per cell
  int paved_soil = 0;

  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;

  template <class Self, class V>
  static void visit(Self& s, V& v) {
    v("n_regions", s.n_regions);
    v("hours", s.hours);
    v("height", s.height);
    v("width", s.width);
    v("cell_km", s.cell_km);
    v("wet_start_prob", s.wet_start_prob);
    v("wet_mean_hours", s.wet_mean_hours);
    v("birth_rate_wet", s.birth_rate_wet);
    v("birth_rate_dry", s.birth_rate_dry);
    v("amplitude_min", s.amplitude_min);
    v("amplitude_max", s.amplitude_max);
    v("cell_sigma_min", s.cell_sigma_min);
    v("cell_sigma_max", s.cell_sigma_max);
    v("lifetime_min", s.lifetime_min);
    v("lifetime_max", s.lifetime_max);
    v("speed_min", s.speed_min);
    v("speed_max", s.speed_max);
    v("wind_turn_sigma", s.wind_turn_sigma);
    v("api_decay", s.api_decay);
    v("trigger_threshold", s.trigger_threshold);
    v("steep_gradient", s.steep_gradient);
    v("paved_soil", s.paved_soil);
    v("seed", s.seed);
  }
};

/// One region's full record; rain starts at t_index 0.
struct RegionData {
  Region region;
  RainfallSequence rain;
  std::shared_ptr<const TerrainGrid> terrain;
};

struct Dataset {
  SynthConfig config;
  std::vector<RegionData> regions;
  EventTable events;

  const RegionData& region(const std::string& region_id) const;
};

/// Cells where a trigger can fire: steep normalized-elevation gradient on non-paved soil.
Grid<int> susceptibility(const TerrainGrid& terrain, const SynthConfig& cfg);

/// Events where API_t = w API_{t-1} + r_t crosses the threshold from below on a susceptible cell.
std::vector<Event> detect_events(const RegionData& data, const SynthConfig& cfg);

TerrainGrid synth_terrain(const Region& region, const SynthConfig& cfg, std::uint64_t region_index);
RainfallSequence synth_rain(const Region& region, const SynthConfig& cfg, std::uint64_t region_index);

Dataset synth_generate(const SynthConfig& cfg);

/// Directory layout: dataset.txt (manifest), <region>.rain, <region>.terrain, events.csv.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace lews
