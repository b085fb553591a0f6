// One training/evaluation unit: a 48-hour rainfall window over a region plus its terrain.
#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "lews/geogrid.hpp"

namespace lews {

inline constexpr int kObservedHours = 40;
inline constexpr int kLeadHours = 8;
inline constexpr int kWindowHours = kObservedHours + kLeadHours;

enum class RainSetting { ObservedRainfall, ForecastedRainfall };

std::string to_string(RainSetting s);
RainSetting parse_rain_setting(const std::string& s);

struct Sample {
  RainfallSequence rain;
  /// Shared, never modified: terrain is geographically anchored.
  std::shared_ptr<const TerrainGrid> terrain;
  /// Additive noise on the normalized elevation channel; empty when none.
  GridD elevation_perturbation;
  int label = 0;
  std::int64_t anchor_t = 0;
  std::string region_id;
  RainSetting setting = RainSetting::ObservedRainfall;

  /// Normalized elevation as seen by the model (perturbation applied).
  GridD model_elevation() const;

  /// Checks shapes, labels and the provenance pattern of the setting.
  /// Augmented frames are accepted anywhere (views of a sample).
  void validate() const;
};

}  // namespace lews
