// Shared fixtures for the unit suites.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include <unistd.h>

#include "lews/geogrid.hpp"
#include "lews/sample.hpp"

namespace lews::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lews_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Region make_region(int h = 10, int w = 10, const std::string& id = "r00") {
  Region r;
  r.region_id = id;
  r.height_cells = h;
  r.width_cells = w;
  return r;
}

inline GridF random_grid(std::mt19937_64& rng, int h, int w, double max_value = 10.0) {
  std::uniform_real_distribution<double> dist(0.0, max_value);
  GridF g(h, w);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = static_cast<float>(dist(rng));
  return g;
}

inline RainfallSequence random_sequence(std::mt19937_64& rng, const Region& region, int steps,
                                        std::int64_t epoch = 100) {
  RainfallSequence seq;
  for (int t = 0; t < steps; ++t) {
    RainfallField f;
    f.region = region;
    f.t_index = epoch + t;
    f.values = random_grid(rng, region.height_cells, region.width_cells);
    seq.fields.push_back(std::move(f));
  }
  return seq;
}

inline TerrainGrid random_terrain(std::mt19937_64& rng, const Region& region) {
  const int h = region.height_cells;
  const int w = region.width_cells;
  Grid<int> soil(h, w), veg(h, w), slope(h, w);
  GridF elev(h, w);
  std::uniform_int_distribution<int> s(0, kSoilCategories - 1), v(0, kVegetationCategories - 1),
      d(0, kSlopeCategories - 1);
  std::uniform_real_distribution<double> e(50.0, 900.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      soil(r, c) = s(rng);
      veg(r, c) = v(rng);
      slope(r, c) = d(rng);
      elev(r, c) = static_cast<float>(e(rng));
    }
  }
  return TerrainGrid::from_categories(region, soil, veg, slope, elev);
}

inline Sample random_sample(std::mt19937_64& rng, const Region& region, int steps, int label) {
  Sample s;
  s.rain = random_sequence(rng, region, steps);
  s.terrain = std::make_shared<const TerrainGrid>(random_terrain(rng, region));
  s.label = label;
  s.anchor_t = s.rain.fields.back().t_index - kLeadHours;
  s.region_id = region.region_id;
  return s;
}

}  // namespace lews::test
