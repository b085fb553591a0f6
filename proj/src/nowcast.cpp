#include "lews/nowcast.hpp"

#include <cmath>

#include "lews/interp.hpp"

namespace lews {

RainfallField advect_step(const RainfallField& field, const MotionField& motion, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("advect_step: dt must be positive");
  const Region& region = field.region;
  if (!(motion.region == region) || motion.u.rows() != field.values.rows() || motion.u.cols() != field.values.cols() ||
      motion.v.rows() != field.values.rows() || motion.v.cols() != field.values.cols()) {
    throw ValidationError("advect_step: motion field does not match rainfall grid");
  }
  RainfallField out;
  out.region = region;
  out.t_index = field.t_index + std::llround(dt);
  out.provenance = Provenance::Forecast;
  out.values.resize(field.values.rows(), field.values.cols());
  for (Eigen::Index r = 0; r < field.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < field.values.cols(); ++c) {
      const double src_r = static_cast<double>(r) - dt * motion.v(r, c);
      const double src_c = static_cast<double>(c) - dt * motion.u(r, c);
      out.values(r, c) = static_cast<float>(std::max(0.0, sample_bilinear(field.values, src_r, src_c)));
    }
  }
  return out;
}

std::vector<RainfallField> forecast(const RainfallField& latest, const MotionField& motion, int horizon) {
  if (horizon < 1) throw ValidationError("forecast: horizon must be >= 1");
  std::vector<RainfallField> out;
  out.reserve(static_cast<std::size_t>(horizon));
  const RainfallField* prev = &latest;
  for (int k = 0; k < horizon; ++k) {
    out.push_back(advect_step(*prev, motion, 1.0));
    prev = &out.back();
  }
  return out;
}

}  // namespace lews
