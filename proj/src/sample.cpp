#include "lews/sample.hpp"

namespace lews {

std::string to_string(RainSetting s) {
  return s == RainSetting::ObservedRainfall ? "observed" : "forecast";
}

RainSetting parse_rain_setting(const std::string& s) {
  if (s == "observed") return RainSetting::ObservedRainfall;
  if (s == "forecast") return RainSetting::ForecastedRainfall;
  throw ValidationError("unknown rainfall setting '" + s + "' (expected observed|forecast)");
}

GridD Sample::model_elevation() const {
  if (elevation_perturbation.size() == 0) return terrain->elevation_normalized;
  return terrain->elevation_normalized + elevation_perturbation;
}

void Sample::validate() const {
  rain.validate();
  if (!terrain) throw ValidationError("sample has no terrain");
  if (!(terrain->region == rain.region())) throw ValidationError("sample terrain and rainfall regions differ");
  if (rain.region().region_id != region_id) throw ValidationError("sample region id does not match its rainfall");
  if (label != 0 && label != 1) throw ValidationError("sample label must be 0 or 1");
  if (elevation_perturbation.size() != 0 &&
      (elevation_perturbation.rows() != terrain->region.height_cells ||
       elevation_perturbation.cols() != terrain->region.width_cells)) {
    throw ValidationError("elevation perturbation shape mismatch");
  }
  const auto steps = static_cast<int>(rain.size());
  for (int t = 0; t < steps; ++t) {
    const Provenance p = rain[static_cast<std::size_t>(t)].provenance;
    if (p == Provenance::Augmented) continue;
    const bool lead = setting == RainSetting::ForecastedRainfall && t >= steps - kLeadHours;
    const Provenance expected = lead ? Provenance::Forecast : Provenance::Observed;
    if (p != expected) {
      throw ValidationError("sample step " + std::to_string(t) + " has provenance " + to_string(p) + ", expected " +
                            to_string(expected));
    }
  }
}

}  // namespace lews
