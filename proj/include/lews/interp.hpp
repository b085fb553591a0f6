// Bilinear sampling on row-major grids with a constant value outside the domain.
#pragma once

#include <cmath>

#include <Eigen/Core>

namespace lews {

/// Samples `g` at fractional (row, col). Neighbours outside the grid read `fill`.
/// Zero-weight neighbours are skipped, so integer positions return the stored
/// value exactly.
template <typename Derived>
double sample_bilinear(const Eigen::MatrixBase<Derived>& g, double row, double col, double fill = 0.0) {
  const double r0f = std::floor(row);
  const double c0f = std::floor(col);
  const double fr = row - r0f;
  const double fc = col - c0f;
  const auto r0 = static_cast<Eigen::Index>(r0f);
  const auto c0 = static_cast<Eigen::Index>(c0f);
  auto at = [&](Eigen::Index r, Eigen::Index c) -> double {
    if (r < 0 || c < 0 || r >= g.rows() || c >= g.cols()) return fill;
    return static_cast<double>(g(r, c));
  };
  double out = 0.0;
  const double w00 = (1.0 - fr) * (1.0 - fc);
  const double w01 = (1.0 - fr) * fc;
  const double w10 = fr * (1.0 - fc);
  const double w11 = fr * fc;
  if (w00 != 0.0) out += w00 * at(r0, c0);
  if (w01 != 0.0) out += w01 * at(r0, c0 + 1);
  if (w10 != 0.0) out += w10 * at(r0 + 1, c0);
  if (w11 != 0.0) out += w11 * at(r0 + 1, c0 + 1);
  return out;
}

}  // namespace lews
