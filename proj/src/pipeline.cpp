#include "lews/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lews/nowcast.hpp"

namespace lews {

void SampleConfig::validate() const {
  if (!(rainy_threshold >= 0.0)) throw ValidationError("samples: rainy_threshold must be >= 0");
  if (rainy_lookback_hours < 1) throw ValidationError("samples: rainy_lookback_hours must be >= 1");
  if (min_history_hours < kObservedHours) {
    throw ValidationError("samples: min_history_hours must cover the 40 observed hours");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("samples: train_fraction must lie in (0, 1)");
}

int label_at(const EventTable& events, const std::string& region_id, std::int64_t t) {
  for (const auto& e : events.events) {
    if (e.region_id == region_id && e.t_index > t && e.t_index <= t + kLeadHours) return 1;
  }
  return 0;
}

std::vector<std::int64_t> anchor_hours(const RegionData& data, const SampleConfig& cfg) {
  cfg.validate();
  if (data.rain.empty()) return {};
  const std::int64_t first = data.rain.fields.front().t_index;
  const std::int64_t last = data.rain.fields.back().t_index;
  std::vector<float> region_max;
  region_max.reserve(data.rain.size());
  for (const auto& f : data.rain.fields) region_max.push_back(f.values.maxCoeff());

  std::vector<std::int64_t> anchors;
  for (std::int64_t t = first + cfg.min_history_hours; t + kLeadHours <= last; ++t) {
    bool rainy = false;
    for (std::int64_t k = t - cfg.rainy_lookback_hours + 1; k <= t && !rainy; ++k) {
      if (k >= first) rainy = region_max[static_cast<std::size_t>(k - first)] > cfg.rainy_threshold;
    }
    if (rainy) anchors.push_back(t);
  }
  return anchors;
}

Sample make_sample(const RegionData& data, const EventTable& events, std::int64_t anchor, RainSetting setting,
                   const FlowConfig& flow) {
  const std::int64_t first = data.rain.fields.front().t_index;
  const std::int64_t begin = anchor - kObservedHours + 1;
  if (begin - first < 2 && setting == RainSetting::ForecastedRainfall) {
    throw ValidationError("samples: anchor " + std::to_string(anchor) + " lacks the history for motion estimation");
  }
  if (begin < first || anchor + kLeadHours > data.rain.fields.back().t_index) {
    throw ValidationError("samples: anchor " + std::to_string(anchor) + " lacks history or lead time");
  }
  auto at = [&](std::int64_t t) -> const RainfallField& { return data.rain[static_cast<std::size_t>(t - first)]; };

  Sample s;
  s.terrain = data.terrain;
  s.anchor_t = anchor;
  s.region_id = data.region.region_id;
  s.setting = setting;
  s.label = label_at(events, s.region_id, anchor);
  s.rain.fields.reserve(kWindowHours);
  for (std::int64_t t = begin; t <= anchor; ++t) {
    s.rain.fields.push_back(at(t));
    s.rain.fields.back().provenance = Provenance::Observed;
  }
  if (setting == RainSetting::ObservedRainfall) {
    for (std::int64_t t = anchor + 1; t <= anchor + kLeadHours; ++t) {
      s.rain.fields.push_back(at(t));
      s.rain.fields.back().provenance = Provenance::Observed;
    }
  } else {
    const MotionField motion = estimate_flow(at(anchor - 2), at(anchor - 1), at(anchor), flow);
    for (auto& f : forecast(s.rain.fields.back(), motion, kLeadHours)) s.rain.fields.push_back(std::move(f));
  }
  return s;
}

std::vector<Sample> build_samples(const RegionData& data, const EventTable& events, RainSetting setting,
                                  const FlowConfig& flow, const SampleConfig& cfg) {
  std::vector<Sample> out;
  for (const std::int64_t t : anchor_hours(data, cfg)) out.push_back(make_sample(data, events, t, setting, flow));
  return out;
}

std::vector<Sample> build_dataset_samples(const Dataset& dataset, RainSetting setting, const FlowConfig& flow,
                                          const SampleConfig& cfg) {
  std::vector<Sample> out;
  for (const auto& region : dataset.regions) {
    auto part = build_samples(region, dataset.events, setting, flow, cfg);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

SplitIndices chrono_split_indices(std::span<const Sample> samples, double train_fraction) {
  if (samples.empty()) throw ValidationError("chrono_split: no samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("chrono_split: fraction must lie in (0, 1)");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (samples[a].anchor_t != samples[b].anchor_t) return samples[a].anchor_t < samples[b].anchor_t;
    return samples[a].region_id < samples[b].region_id;
  });
  // The small epsilon keeps e.g. 0.7 * 10 from flooring to 6.
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(samples.size()) + 1e-9));
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return out;
}

std::vector<Sample> select(std::span<const Sample> samples, std::span<const std::size_t> indices) {
  std::vector<Sample> out;
  out.reserve(indices.size());
  for (const std::size_t i : indices) out.push_back(samples[i]);
  return out;
}

Split chrono_split(std::span<const Sample> samples, double train_fraction) {
  const SplitIndices idx = chrono_split_indices(samples, train_fraction);
  return {select(samples, idx.train), select(samples, idx.test)};
}

double positive_rate(std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& s : samples) pos += s.label == 1 ? 1 : 0;
  return static_cast<double>(pos) / static_cast<double>(samples.size());
}

}  // namespace lews
