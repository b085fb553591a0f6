#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lews/pipeline.hpp"
#include "test_support.hpp"

namespace lews {
namespace {

using test::make_region;

// Linear ramp in x: normalized gradient 1/std(0..9) ~ 0.348 per cell away from the borders.
std::shared_ptr<const TerrainGrid> ramp_terrain(const Region& region, int soil_category) {
  const int h = region.height_cells, w = region.width_cells;
  Grid<int> soil = Grid<int>::Constant(h, w, soil_category);
  Grid<int> veg = Grid<int>::Zero(h, w), slope = Grid<int>::Zero(h, w);
  GridF elev(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) elev(r, c) = 100.0f * static_cast<float>(c);
  }
  return std::make_shared<const TerrainGrid>(TerrainGrid::from_categories(region, soil, veg, slope, elev));
}

RegionData constant_region(int hours, float value, const std::string& id = "r00") {
  RegionData d;
  d.region = make_region(10, 10, id);
  d.terrain = ramp_terrain(d.region, 3);
  for (int t = 0; t < hours; ++t) {
    RainfallField f;
    f.region = d.region;
    f.t_index = t;
    f.values = GridF::Constant(10, 10, value);
    d.rain.fields.push_back(std::move(f));
  }
  return d;
}

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_regions = 3;
  cfg.hours = 150;
  cfg.seed = seed;
  return cfg;
}

TEST(Synth, ZeroAmplitudeGivesNoRainAndNoEvents) {
  SynthConfig cfg = small_synth(1);
  cfg.amplitude_min = cfg.amplitude_max = 0.0;
  const Dataset ds = synth_generate(cfg);
  for (const auto& r : ds.regions) {
    for (const auto& f : r.rain.fields) EXPECT_EQ(f.values.maxCoeff(), 0.0f);
  }
  EXPECT_TRUE(ds.events.events.empty());
}

// API_t = A (1 - w^(t+1)) / (1 - w) for constant rain A from hour 0.
std::int64_t first_crossing(double amplitude, double w, double theta) {
  for (std::int64_t t = 0; t < 10000; ++t) {
    if (amplitude * (1.0 - std::pow(w, static_cast<double>(t + 1))) / (1.0 - w) >= theta) return t;
  }
  return -1;
}

TEST(Synth, StationaryHeavyCellTriggersOnce) {
  SynthConfig cfg;
  cfg.steep_gradient = 0.3;
  RegionData d = constant_region(200, 0.0f);
  ASSERT_EQ(susceptibility(*d.terrain, cfg)(5, 5), 1);
  const double amplitude = 1.2 * cfg.trigger_threshold * (1.0 - cfg.api_decay);
  for (auto& f : d.rain.fields) f.values(5, 5) = static_cast<float>(amplitude);
  const auto events = detect_events(d, cfg);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].y, 5);
  EXPECT_EQ(events[0].x, 5);
  EXPECT_EQ(events[0].t_index, first_crossing(static_cast<float>(amplitude), cfg.api_decay, cfg.trigger_threshold));

  for (auto& f : d.rain.fields) f.values(5, 5) = static_cast<float>(0.9 * cfg.trigger_threshold * (1.0 - cfg.api_decay));
  EXPECT_TRUE(detect_events(d, cfg).empty());
}

TEST(Synth, PavedOrGentleCellsNeverTrigger) {
  SynthConfig cfg;
  cfg.steep_gradient = 0.3;
  RegionData d = constant_region(100, 50.0f);
  d.terrain = ramp_terrain(d.region, cfg.paved_soil);
  EXPECT_TRUE(detect_events(d, cfg).empty());
  cfg.steep_gradient = 0.5;
  d.terrain = ramp_terrain(d.region, 3);
  EXPECT_TRUE(detect_events(d, cfg).empty());
}

TEST(Synth, OutputsAreValidAndEventsSitOnSusceptibleCells) {
  const SynthConfig cfg = small_synth(1);
  const Dataset ds = synth_generate(cfg);
  ASSERT_EQ(ds.regions.size(), 3u);
  std::vector<Region> regions;
  for (const auto& r : ds.regions) {
    EXPECT_NO_THROW(r.terrain->validate());
    EXPECT_NO_THROW(r.rain.validate());
    EXPECT_EQ(r.rain.size(), 150u);
    regions.push_back(r.region);
  }
  EXPECT_NO_THROW(ds.events.validate(regions, 0, 150));
  EXPECT_FALSE(ds.events.events.empty());
  for (const auto& e : ds.events.events) {
    EXPECT_EQ(susceptibility(*ds.region(e.region_id).terrain, cfg)(e.y, e.x), 1);
  }
}

TEST(Synth, SameSeedGivesByteIdenticalDirectories) {
  test::TempDir dir("pipeline");
  write_dataset(synth_generate(small_synth(7)), dir / "a");
  write_dataset(synth_generate(small_synth(7)), dir / "b");
  write_dataset(synth_generate(small_synth(8)), dir / "c");
  bool any_difference = false;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename().string();
    EXPECT_EQ(test::file_bytes(entry.path()), test::file_bytes(dir / "b" / name)) << name;
    any_difference = any_difference || test::file_bytes(entry.path()) != test::file_bytes(dir / "c" / name);
  }
  EXPECT_TRUE(any_difference);
}

TEST(Synth, DatasetRoundTrip) {
  test::TempDir dir("pipeline");
  const Dataset ds = synth_generate(small_synth(3));
  write_dataset(ds, dir.path());
  const Dataset back = read_dataset(dir.path());
  EXPECT_TRUE(back.config == ds.config);
  EXPECT_EQ(back.events.events, ds.events.events);
  ASSERT_EQ(back.regions.size(), ds.regions.size());
  for (std::size_t i = 0; i < ds.regions.size(); ++i) {
    EXPECT_TRUE(*back.regions[i].terrain == *ds.regions[i].terrain);
    for (std::size_t t = 0; t < ds.regions[i].rain.size(); ++t) {
      EXPECT_EQ(back.regions[i].rain[t].values, ds.regions[i].rain[t].values);
    }
  }
}

TEST(Synth, ConfigValidation) {
  SynthConfig cfg;
  cfg.api_decay = 1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = SynthConfig{};
  cfg.trigger_threshold = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(BuildSamples, NoEventsMeansAllNegative) {
  const RegionData d = constant_region(120, 1.0f);
  const auto samples = build_samples(d, EventTable{}, RainSetting::ObservedRainfall);
  ASSERT_FALSE(samples.empty());
  for (const auto& s : samples) EXPECT_EQ(s.label, 0);
}

TEST(BuildSamples, SingleEventLabelsEightAnchors) {
  const RegionData d = constant_region(1100, 1.0f);
  EventTable events;
  events.events.push_back({"r00", 1000, 4, 4});
  const auto samples = build_samples(d, events, RainSetting::ObservedRainfall);
  int positives = 0;
  for (const auto& s : samples) {
    const bool expected = s.anchor_t >= 992 && s.anchor_t <= 999;
    EXPECT_EQ(s.label, expected ? 1 : 0) << s.anchor_t;
    positives += s.label;
  }
  EXPECT_EQ(positives, 8);
  // Events of another region do not count.
  events.events[0].region_id = "r01";
  for (const auto& s : build_samples(d, events, RainSetting::ObservedRainfall)) EXPECT_EQ(s.label, 0);
}

TEST(BuildSamples, AnchorsRespectHistoryHorizonAndRainyDays) {
  RegionData d = constant_region(200, 0.0f);
  EXPECT_TRUE(build_samples(d, EventTable{}, RainSetting::ObservedRainfall).empty());
  d.rain.fields[100].values(2, 2) = 0.6f;
  const auto anchors = anchor_hours(d, SampleConfig{});
  ASSERT_EQ(anchors.size(), 24u);
  EXPECT_EQ(anchors.front(), 100);
  EXPECT_EQ(anchors.back(), 123);

  const RegionData wet = constant_region(100, 1.0f);
  const auto all = anchor_hours(wet, SampleConfig{});
  EXPECT_EQ(all.front(), 48);
  EXPECT_EQ(all.back(), 91);
}

TEST(BuildSamples, ObservedWindowMatchesSourceHours) {
  std::mt19937_64 rng(1);
  RegionData d;
  d.region = make_region();
  d.terrain = ramp_terrain(d.region, 2);
  d.rain = test::random_sequence(rng, d.region, 80, 0);
  const Sample s = make_sample(d, EventTable{}, 60, RainSetting::ObservedRainfall, FlowConfig{});
  ASSERT_EQ(s.rain.size(), 48u);
  EXPECT_EQ(s.rain[0].t_index, 21);
  EXPECT_EQ(s.rain[47].t_index, 68);
  for (std::size_t k = 0; k < 48; ++k) {
    EXPECT_EQ(s.rain[k].values, d.rain[21 + k].values);
    EXPECT_EQ(s.rain[k].provenance, Provenance::Observed);
  }
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW(make_sample(d, EventTable{}, 75, RainSetting::ObservedRainfall, FlowConfig{}), ValidationError);
}

TEST(BuildSamples, ForecastSamplesHaveFortyObservedAndEightForecastSteps) {
  const Dataset ds = synth_generate(small_synth(1));
  const auto obs = build_dataset_samples(ds, RainSetting::ObservedRainfall);
  const auto fc = build_dataset_samples(ds, RainSetting::ForecastedRainfall);
  ASSERT_EQ(obs.size(), fc.size());
  ASSERT_FALSE(fc.empty());
  bool any_difference = false;
  for (std::size_t i = 0; i < fc.size(); ++i) {
    EXPECT_EQ(fc[i].anchor_t, obs[i].anchor_t);
    EXPECT_EQ(fc[i].label, obs[i].label);
    for (std::size_t k = 0; k < 48; ++k) {
      EXPECT_EQ(fc[i].rain[k].provenance, k < 40 ? Provenance::Observed : Provenance::Forecast);
      EXPECT_EQ(fc[i].rain[k].t_index, obs[i].rain[k].t_index);
      if (k < 40) {
        EXPECT_EQ(fc[i].rain[k].values, obs[i].rain[k].values);
      }
      if (k >= 40) any_difference = any_difference || fc[i].rain[k].values != obs[i].rain[k].values;
    }
    EXPECT_NO_THROW(fc[i].validate());
  }
  EXPECT_TRUE(any_difference);
}

TEST(BuildSamples, LabelsMatchIndependentRescan) {
  const Dataset ds = synth_generate(small_synth(1));
  const auto samples = build_dataset_samples(ds, RainSetting::ObservedRainfall);
  for (const auto& s : samples) {
    int expected = 0;
    for (const auto& e : ds.events.events) {
      const std::int64_t lead = e.t_index - s.anchor_t;
      if (e.region_id == s.region_id && lead >= 1 && lead <= 8) expected = 1;
    }
    EXPECT_EQ(s.label, expected);
  }
}

std::vector<Sample> anchored(std::vector<std::int64_t> anchors) {
  std::vector<Sample> out;
  for (const auto t : anchors) {
    Sample s;
    s.anchor_t = t;
    s.region_id = "r00";
    out.push_back(s);
  }
  return out;
}

TEST(ChronoSplit, TenAnchorsSplitSevenThree) {
  const auto split = chrono_split(anchored({3, 9, 0, 5, 1, 8, 2, 7, 6, 4}));
  ASSERT_EQ(split.train.size(), 7u);
  ASSERT_EQ(split.test.size(), 3u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(split.train[i].anchor_t, static_cast<std::int64_t>(i));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(split.test[i].anchor_t, static_cast<std::int64_t>(7 + i));
}

TEST(ChronoSplit, EqualAnchorsUseDeterministicTieRule) {
  auto samples = anchored(std::vector<std::int64_t>(10, 42));
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].region_id = "r" + std::to_string(9 - i);
  const auto a = chrono_split_indices(samples);
  const auto b = chrono_split_indices(samples);
  EXPECT_EQ(a.train, b.train);
  ASSERT_EQ(a.train.size(), 7u);
  ASSERT_EQ(a.test.size(), 3u);
  // Region ids r0..r6 go to train.
  for (std::size_t k = 0; k < 7; ++k) EXPECT_EQ(samples[a.train[k]].region_id, "r" + std::to_string(k));
}

TEST(ChronoSplit, NoTestAnchorPrecedesATrainAnchor) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int64_t> anchors(static_cast<std::size_t>(5 + trial));
    std::iota(anchors.begin(), anchors.end(), std::int64_t{100});
    std::shuffle(anchors.begin(), anchors.end(), rng);
    const auto split = chrono_split(anchored(anchors));
    std::int64_t max_train = -1, min_test = 1 << 30;
    for (const auto& s : split.train) max_train = std::max(max_train, s.anchor_t);
    for (const auto& s : split.test) min_test = std::min(min_test, s.anchor_t);
    EXPECT_LT(max_train, min_test);
  }
  EXPECT_THROW(chrono_split(std::vector<Sample>{}), ValidationError);
}

}  // namespace
}  // namespace lews
