// Advection nowcasting: extrapolate the latest rainfall field along a fixed motion field.
#pragma once

#include <vector>

#include "lews/geogrid.hpp"
#include "lews/motion.hpp"

namespace lews {

/// One backward semi-Lagrangian step: out(x) = in(x - dt * w(x)), bilinear,
/// zero inflow. t_index advances by round(dt).
RainfallField advect_step(const RainfallField& field, const MotionField& motion, double dt);

/// `horizon` hourly forecasts with the motion held constant.
std::vector<RainfallField> forecast(const RainfallField& latest, const MotionField& motion, int horizon = 8);

}  // namespace lews
