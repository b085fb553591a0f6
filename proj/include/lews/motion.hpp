// Dense pyramidal Lucas-Kanade motion estimation over rainfall fields.
#pragma once

#include "lews/geogrid.hpp"

namespace lews {

/// Per-cell displacement velocity in cells/hour; +u is east (col+), +v is row+.
struct MotionField {
  Region region;
  GridD u;
  GridD v;

  static MotionField zero(const Region& region);
  static MotionField uniform(const Region& region, double u, double v);
};

struct FlowConfig {
  int window_radius = 2;
  int pyramid_levels = 2;
  double ridge_lambda = 1e-3;
  int iterations_per_level = 3;
  double max_speed = 5.0;

  void validate() const;

  template <class Self, class V>
  static void visit(Self& s, V& v) {
    v("window_radius", s.window_radius);
    v("pyramid_levels", s.pyramid_levels);
    v("ridge_lambda", s.ridge_lambda);
    v("iterations_per_level", s.iterations_per_level);
    v("max_speed", s.max_speed);
  }
};

struct FlowVector {
  double u = 0.0;
  double v = 0.0;
};

/// Ridge-regularized least squares over the (clamped) window centred on
/// (row, col): argmin sum (Ix*u + Iy*v + It)^2 + lambda*(u^2 + v^2).
FlowVector lk_solve_window(const GridD& ix, const GridD& iy, const GridD& it, int row, int col, const FlowConfig& cfg);

/// Central differences with replicated borders: returns d/dcol and d/drow.
std::pair<GridD, GridD> spatial_gradients(const GridD& g);

/// 2x box average; odd trailing rows/columns are dropped.
GridD downsample2(const GridD& g);

/// Resamples `g` at x - w(x) (zero outside the domain).
GridD warp_backward(const GridD& g, const GridD& u, const GridD& v);

/// Motion from three consecutive fields, coarse-to-fine. Both frame pairs
/// contribute equally to every refinement step.
MotionField estimate_flow(const RainfallField& f0, const RainfallField& f1, const RainfallField& f2,
                          const FlowConfig& cfg = {});

}  // namespace lews
