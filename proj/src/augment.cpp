#include "lews/augment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lews/interp.hpp"
#include "lews/manifest.hpp"

namespace lews {

Rng derive_stream(std::uint64_t master_seed, std::uint64_t sample_index, std::uint64_t view_index,
                  std::uint64_t extra) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xFFFFFFFFu); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(master_seed), hi(master_seed), lo(sample_index), hi(sample_index),
                    lo(view_index),  hi(view_index),  lo(extra),        hi(extra)};
  return Rng(seq);
}

void AugmentConfig::validate() const {
  for (double s : {sigma_disp, sigma_rain_noise, sigma_terrain_noise}) {
    if (!std::isfinite(s) || s < 0.0) throw ValidationError("augment: sigmas must be finite and >= 0");
  }
}

DisplacementPath sample_displacement_path(int steps, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (steps < 1) throw ValidationError("displacement path needs at least one step");
  DisplacementPath path;
  path.offsets.reserve(static_cast<std::size_t>(steps));
  path.increments.reserve(static_cast<std::size_t>(steps));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  for (int t = 0; t < steps; ++t) {
    Eigen::Vector2d inc = Eigen::Vector2d::Zero();
    if (cfg.sigma_disp > 0.0) {
      inc.x() = cfg.sigma_disp * normal(rng);
      inc.y() = cfg.sigma_disp * normal(rng);
    }
    offset += inc;
    path.increments.push_back(inc);
    path.offsets.push_back(offset);
  }
  return path;
}

RainfallSequence apply_displacement(const RainfallSequence& seq, const DisplacementPath& path, float fill) {
  if (path.size() != seq.size()) {
    throw ValidationError("apply_displacement: path has " + std::to_string(path.size()) + " steps, sequence has " +
                          std::to_string(seq.size()));
  }
  if (!std::isfinite(fill) || fill < 0.0f) throw ValidationError("apply_displacement: fill must be finite and >= 0");
  RainfallSequence out;
  out.fields.reserve(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const RainfallField& in = seq[t];
    const Eigen::Vector2d& off = path.offsets[t];
    RainfallField f;
    f.region = in.region;
    f.t_index = in.t_index;
    f.provenance = Provenance::Augmented;
    f.values.resize(in.values.rows(), in.values.cols());
    for (Eigen::Index r = 0; r < in.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < in.values.cols(); ++c) {
        const double v = sample_bilinear(in.values, static_cast<double>(r) - off.y(), static_cast<double>(c) - off.x(),
                                         static_cast<double>(fill));
        f.values(r, c) = static_cast<float>(std::max(0.0, v));
      }
    }
    out.fields.push_back(std::move(f));
  }
  return out;
}

Sample augment_sample(const Sample& sample, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  Sample out = sample;
  const auto path = sample_displacement_path(static_cast<int>(sample.rain.size()), cfg, rng);
  out.rain = apply_displacement(sample.rain, path);

  std::normal_distribution<double> normal(0.0, 1.0);
  if (cfg.sigma_rain_noise > 0.0) {
    for (auto& f : out.rain.fields) {
      for (Eigen::Index i = 0; i < f.values.size(); ++i) {
        float& v = f.values.data()[i];
        v = std::max(0.0f, v + static_cast<float>(cfg.sigma_rain_noise * normal(rng)));
      }
    }
  }
  if (cfg.sigma_terrain_noise > 0.0) {
    const Region& region = sample.terrain->region;
    GridD noise(region.height_cells, region.width_cells);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = cfg.sigma_terrain_noise * normal(rng);
    if (out.elevation_perturbation.size() == 0) {
      out.elevation_perturbation = noise;
    } else {
      out.elevation_perturbation += noise;
    }
  }
  return out;
}

std::string format_displacement_path(const DisplacementPath& path) {
  std::string out = "t,dx,dy,ex,ey\n";
  for (std::size_t t = 0; t < path.size(); ++t) {
    out += std::to_string(t) + "," + format_real(path.offsets[t].x()) + "," + format_real(path.offsets[t].y()) + "," +
           format_real(path.increments[t].x()) + "," + format_real(path.increments[t].y()) + "\n";
  }
  return out;
}

}  // namespace lews
