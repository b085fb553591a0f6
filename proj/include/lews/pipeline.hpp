// Sample construction and chronological splitting.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lews/motion.hpp"
#include "lews/sample.hpp"
#include "lews/synth.hpp"

namespace lews {

struct SampleConfig {
  /// An anchor is on a rainy day when the region maximum exceeds this
  /// intensity (mm/h) at some hour of the preceding `rainy_lookback_hours`.
  double rainy_threshold = 0.5;
  int rainy_lookback_hours = 24;
  /// Anchors need this many hours of history.
  int min_history_hours = kWindowHours;
  double train_fraction = 0.7;

  void validate() const;
  bool operator==(const SampleConfig&) const = default;

  template <class Self, class V>
  static void visit(Self& s, V& v) {
    v("rainy_threshold", s.rainy_threshold);
    v("rainy_lookback_hours", s.rainy_lookback_hours);
    v("min_history_hours", s.min_history_hours);
    v("train_fraction", s.train_fraction);
  }
};

/// 1 iff the table has an event in `region_id` with t_event in (t, t + 8].
int label_at(const EventTable& events, const std::string& region_id, std::int64_t t);

/// Anchor hours of a region that pass the history, horizon and rainy-day rules.
std::vector<std::int64_t> anchor_hours(const RegionData& data, const SampleConfig& cfg);

/// One sample per anchor: rain over (t-40, t+8], observed or with the last
/// eight hours replaced by an advection forecast from hours t-2..t.
Sample make_sample(const RegionData& data, const EventTable& events, std::int64_t anchor, RainSetting setting,
                   const FlowConfig& flow);

std::vector<Sample> build_samples(const RegionData& data, const EventTable& events, RainSetting setting,
                                  const FlowConfig& flow = {}, const SampleConfig& cfg = {});

/// Samples of every region, concatenated in region order.
std::vector<Sample> build_dataset_samples(const Dataset& dataset, RainSetting setting, const FlowConfig& flow = {},
                                          const SampleConfig& cfg = {});

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Orders samples by (anchor_t, region_id, input position) and puts the
/// first floor(train_fraction * n) into train. Index lists are in that order.
SplitIndices chrono_split_indices(std::span<const Sample> samples, double train_fraction = 0.7);

std::vector<Sample> select(std::span<const Sample> samples, std::span<const std::size_t> indices);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

Split chrono_split(std::span<const Sample> samples, double train_fraction = 0.7);

/// Fraction of label-1 samples; 0 for an empty list.
double positive_rate(std::span<const Sample> samples);

}  // namespace lews
