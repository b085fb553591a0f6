// Rainfall-motion augmentation: temporally correlated displacement of the
// rainfall sequence relative to fixed terrain, plus zero-mean noise.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "lews/geogrid.hpp"
#include "lews/sample.hpp"

namespace lews {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, sample index, view index) and an
/// optional extra discriminator (e.g. the epoch).
Rng derive_stream(std::uint64_t master_seed, std::uint64_t sample_index, std::uint64_t view_index,
                  std::uint64_t extra = 0);

/// Cumulative random walk in cells: offsets[t] = offsets[t-1] + increments[t].
struct DisplacementPath {
  std::vector<Eigen::Vector2d> offsets;     // (dx, dy)
  std::vector<Eigen::Vector2d> increments;  // (ex, ey)

  std::size_t size() const { return offsets.size(); }
};

struct AugmentConfig {
  double sigma_disp = 0.5;
  double sigma_rain_noise = 0.5;
  double sigma_terrain_noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;

  template <class Self, class V>
  static void visit(Self& s, V& v) {
    v("sigma_disp", s.sigma_disp);
    v("sigma_rain_noise", s.sigma_rain_noise);
    v("sigma_terrain_noise", s.sigma_terrain_noise);
  }
};

DisplacementPath sample_displacement_path(int steps, const AugmentConfig& cfg, Rng& rng);

/// Field t is resampled at x - offsets[t]; cells sourced from outside read `fill`.
RainfallSequence apply_displacement(const RainfallSequence& seq, const DisplacementPath& path, float fill = 0.0f);

/// Displaced rainfall with clamped noise, elevation noise; labels, terrain
/// and timing untouched.
Sample augment_sample(const Sample& sample, const AugmentConfig& cfg, Rng& rng);

/// Text form of a path: header `t,dx,dy,ex,ey`, one row per step.
std::string format_displacement_path(const DisplacementPath& path);

}  // namespace lews
