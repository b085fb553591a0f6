#include "lews/synth.hpp"

#include <cmath>
#include <numbers>

#include "lews/augment.hpp"
#include "lews/config_io.hpp"
#include "lews/motion.hpp"

namespace lews {

namespace {

constexpr std::uint64_t kTerrainStream = 1;
constexpr std::uint64_t kRainStream = 2;
constexpr double kBirthMargin = 3.0;  // cells outside the region where rain cells may be born
constexpr const char* kDatasetFormat = "lews.dataset";

struct RainCell {
  double y, x;
  double amplitude;
  double sigma;
  double lifetime;
  double age = 0.0;
};

// Category of the nearest of a few random seed points.
Grid<int> voronoi_categories(int h, int w, int seeds, const std::vector<int>& categories, Rng& rng) {
  std::uniform_real_distribution<double> py(0.0, h - 1.0), px(0.0, w - 1.0);
  std::vector<std::pair<double, double>> points;
  for (int i = 0; i < seeds; ++i) points.emplace_back(py(rng), px(rng));
  Grid<int> out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = (r - points[i].first) * (r - points[i].first) + (c - points[i].second) * (c - points[i].second);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      out(r, c) = categories[best];
    }
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_regions < 1) throw ValidationError("synth: n_regions must be >= 1");
  if (hours < 1) throw ValidationError("synth: hours must be >= 1");
  if (height < 3 || width < 3) throw ValidationError("synth: regions must be at least 3x3");
  if (!(cell_km > 0.0)) throw ValidationError("synth: cell_km must be positive");
  if (!(wet_start_prob >= 0.0 && wet_start_prob <= 1.0)) throw ValidationError("synth: wet_start_prob must lie in [0, 1]");
  if (!(wet_mean_hours >= 1.0)) throw ValidationError("synth: wet_mean_hours must be >= 1");
  if (!(birth_rate_wet >= 0.0 && birth_rate_dry >= 0.0)) throw ValidationError("synth: birth rates must be >= 0");
  if (!(amplitude_min >= 0.0 && amplitude_max >= amplitude_min)) {
    throw ValidationError("synth: need 0 <= amplitude_min <= amplitude_max");
  }
  if (!(cell_sigma_min > 0.0 && cell_sigma_max >= cell_sigma_min)) {
    throw ValidationError("synth: need 0 < cell_sigma_min <= cell_sigma_max");
  }
  if (!(lifetime_min >= 1.0 && lifetime_max >= lifetime_min)) {
    throw ValidationError("synth: need 1 <= lifetime_min <= lifetime_max");
  }
  if (!(speed_min >= 0.0 && speed_max >= speed_min)) throw ValidationError("synth: need 0 <= speed_min <= speed_max");
  if (!(wind_turn_sigma >= 0.0)) throw ValidationError("synth: wind_turn_sigma must be >= 0");
  if (!(api_decay > 0.0 && api_decay < 1.0)) throw ValidationError("synth: api_decay must lie in (0, 1)");
  if (!(trigger_threshold > 0.0)) throw ValidationError("synth: trigger_threshold must be positive");
  if (!(steep_gradient >= 0.0)) throw ValidationError("synth: steep_gradient must be >= 0");
  if (paved_soil < 0 || paved_soil >= kSoilCategories) throw ValidationError("synth: paved_soil is not a soil category");
}

const RegionData& Dataset::region(const std::string& region_id) const {
  for (const auto& r : regions) {
    if (r.region.region_id == region_id) return r;
  }
  throw ValidationError("dataset has no region '" + region_id + "'");
}

Grid<int> susceptibility(const TerrainGrid& terrain, const SynthConfig& cfg) {
  const auto [gx, gy] = spatial_gradients(terrain.elevation_normalized);
  Grid<int> out(gx.rows(), gx.cols());
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const bool steep = std::hypot(gx(r, c), gy(r, c)) >= cfg.steep_gradient;
      const bool paved = terrain.soil_category(static_cast<int>(r), static_cast<int>(c)) == cfg.paved_soil;
      out(r, c) = steep && !paved ? 1 : 0;
    }
  }
  return out;
}

std::vector<Event> detect_events(const RegionData& data, const SynthConfig& cfg) {
  const Grid<int> mask = susceptibility(*data.terrain, cfg);
  GridD api = GridD::Zero(mask.rows(), mask.cols());
  std::vector<Event> events;
  for (const auto& field : data.rain.fields) {
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
      for (Eigen::Index c = 0; c < mask.cols(); ++c) {
        const double before = api(r, c);
        api(r, c) = cfg.api_decay * before + static_cast<double>(field.values(r, c));
        if (mask(r, c) != 0 && before < cfg.trigger_threshold && api(r, c) >= cfg.trigger_threshold) {
          events.push_back({data.region.region_id, field.t_index, static_cast<int>(r), static_cast<int>(c)});
        }
      }
    }
  }
  return events;
}

TerrainGrid synth_terrain(const Region& region, const SynthConfig& cfg, std::uint64_t region_index) {
  Rng rng = derive_stream(cfg.seed, region_index, 0, kTerrainStream);
  const int h = region.height_cells;
  const int w = region.width_cells;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  GridD elev = GridD::Constant(h, w, uniform(50.0, 300.0));
  const double tilt_y = uniform(-30.0, 30.0), tilt_x = uniform(-30.0, 30.0);
  const int hills = 3 + static_cast<int>(unit(rng) * 4.0);
  for (int k = 0; k < hills; ++k) {
    const double cy = uniform(-2.0, h + 1.0), cx = uniform(-2.0, w + 1.0);
    const double amp = uniform(100.0, 800.0), sigma = uniform(1.5, 4.0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        elev(r, c) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
      }
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) elev(r, c) += tilt_y * r + tilt_x * c;
  }

  std::vector<int> soil_kinds, veg_kinds;
  for (int i = 0; i < 4; ++i) {
    soil_kinds.push_back(unit(rng) < 0.25 ? cfg.paved_soil
                                          : (cfg.paved_soil + 1 + static_cast<int>(unit(rng) * (kSoilCategories - 1))) %
                                                kSoilCategories);
    veg_kinds.push_back(static_cast<int>(unit(rng) * kVegetationCategories));
  }
  const Grid<int> soil = voronoi_categories(h, w, 4, soil_kinds, rng);
  const Grid<int> veg = voronoi_categories(h, w, 4, veg_kinds, rng);

  // Slope direction: downhill aspect quantized to eight sectors, 0 = east.
  const auto [gx, gy] = spatial_gradients(elev);
  Grid<int> aspect(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (gx(r, c) == 0.0 && gy(r, c) == 0.0) {
        aspect(r, c) = 0;
        continue;
      }
      const double angle = std::atan2(-gy(r, c), -gx(r, c));
      const long sector = std::lround(angle / (std::numbers::pi / 4.0));
      aspect(r, c) = static_cast<int>(((sector % kSlopeCategories) + kSlopeCategories) % kSlopeCategories);
    }
  }
  return TerrainGrid::from_categories(region, soil, veg, aspect, elev.cast<float>());
}

RainfallSequence synth_rain(const Region& region, const SynthConfig& cfg, std::uint64_t region_index) {
  Rng rng = derive_stream(cfg.seed, region_index, 0, kRainStream);
  const int h = region.height_cells;
  const int w = region.width_cells;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  bool wet = false;
  double heading = uniform(0.0, 2.0 * std::numbers::pi);
  double speed = uniform(cfg.speed_min, cfg.speed_max);
  std::vector<RainCell> cells;
  RainfallSequence seq;
  seq.fields.reserve(static_cast<std::size_t>(cfg.hours));
  GridD acc(h, w);
  for (int t = 0; t < cfg.hours; ++t) {
    if (wet) {
      if (unit(rng) < 1.0 / cfg.wet_mean_hours) wet = false;
    } else if (unit(rng) < cfg.wet_start_prob) {
      wet = true;
      heading = uniform(0.0, 2.0 * std::numbers::pi);
      speed = uniform(cfg.speed_min, cfg.speed_max);
    }
    heading += cfg.wind_turn_sigma * normal(rng);

    std::poisson_distribution<int> births(wet ? cfg.birth_rate_wet : cfg.birth_rate_dry);
    for (int b = births(rng); b > 0; --b) {
      RainCell cell;
      cell.y = uniform(-kBirthMargin, h - 1.0 + kBirthMargin);
      cell.x = uniform(-kBirthMargin, w - 1.0 + kBirthMargin);
      cell.amplitude = uniform(cfg.amplitude_min, cfg.amplitude_max);
      cell.sigma = uniform(cfg.cell_sigma_min, cfg.cell_sigma_max);
      cell.lifetime = uniform(cfg.lifetime_min, cfg.lifetime_max);
      cells.push_back(cell);
    }

    acc.setZero();
    for (const auto& cell : cells) {
      const double peak = cell.amplitude * std::sin(std::numbers::pi * std::min(1.0, (cell.age + 0.5) / cell.lifetime));
      if (peak <= 0.0) continue;
      const double inv = 1.0 / (2.0 * cell.sigma * cell.sigma);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const double d2 = (r - cell.y) * (r - cell.y) + (c - cell.x) * (c - cell.x);
          acc(r, c) += peak * std::exp(-d2 * inv);
        }
      }
    }
    RainfallField f;
    f.region = region;
    f.t_index = t;
    f.values = acc.cast<float>();
    seq.fields.push_back(std::move(f));

    const double u = speed * std::cos(heading), v = speed * std::sin(heading);
    for (auto& cell : cells) {
      cell.x += u;
      cell.y += v;
      cell.age += 1.0;
    }
    std::erase_if(cells, [](const RainCell& c) { return c.age >= c.lifetime; });
  }
  return seq;
}

Dataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  for (int i = 0; i < cfg.n_regions; ++i) {
    Region region;
    region.region_id = "r" + std::string(i < 10 ? "0" : "") + std::to_string(i);
    region.height_cells = cfg.height;
    region.width_cells = cfg.width;
    region.cell_size_km = cfg.cell_km;
    RegionData data;
    data.region = region;
    data.terrain = std::make_shared<const TerrainGrid>(synth_terrain(region, cfg, static_cast<std::uint64_t>(i)));
    data.rain = synth_rain(region, cfg, static_cast<std::uint64_t>(i));
    const auto events = detect_events(data, cfg);
    ds.events.events.insert(ds.events.events.end(), events.begin(), events.end());
    ds.regions.push_back(std::move(data));
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.set("format", kDatasetFormat);
  m.set("version", 1);
  write_config(dataset.config, m, "synth.");
  m.set("regions", static_cast<std::int64_t>(dataset.regions.size()));
  for (std::size_t i = 0; i < dataset.regions.size(); ++i) {
    const auto& r = dataset.regions[i];
    m.set("region." + std::to_string(i), r.region.region_id);
    write_rainfall_stack(r.rain, dir / (r.region.region_id + ".rain"));
    write_terrain(*r.terrain, dir / (r.region.region_id + ".terrain"));
  }
  m.set("events", "events.csv");
  write_events(dataset.events, dir / "events.csv");
  m.write(dir / "dataset.txt");
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const Manifest m = Manifest::read(dir / "dataset.txt");
  if (m.get("format") != kDatasetFormat || m.get_int("version") != 1) {
    throw IoError((dir / "dataset.txt").string() + ": not a dataset manifest");
  }
  Dataset ds;
  read_config(ds.config, m, "synth.");
  const auto n = m.get_int("regions");
  std::vector<Region> regions;
  std::int64_t t_end = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::string id = m.get("region." + std::to_string(i));
    RegionData data;
    data.rain = read_rainfall_stack(dir / (id + ".rain"));
    data.terrain = std::make_shared<const TerrainGrid>(read_terrain(dir / (id + ".terrain")));
    data.region = data.rain.region();
    if (data.region.region_id != id || !(data.terrain->region == data.region)) {
      throw IoError(dir.string() + ": files for region '" + id + "' disagree on the region");
    }
    t_end = std::max(t_end, data.rain.fields.back().t_index + 1);
    regions.push_back(data.region);
    ds.regions.push_back(std::move(data));
  }
  ds.events = read_events(dir / m.get("events"));
  ds.events.validate(regions, 0, t_end);
  return ds;
}

}  // namespace lews
