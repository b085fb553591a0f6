#include "lews/motion.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lews/interp.hpp"

namespace lews {

MotionField MotionField::zero(const Region& region) { return uniform(region, 0.0, 0.0); }

MotionField MotionField::uniform(const Region& region, double u, double v) {
  MotionField m;
  m.region = region;
  m.u = GridD::Constant(region.height_cells, region.width_cells, u);
  m.v = GridD::Constant(region.height_cells, region.width_cells, v);
  return m;
}

void FlowConfig::validate() const {
  if (window_radius < 1) throw ValidationError("flow: window_radius must be >= 1");
  if (pyramid_levels < 1) throw ValidationError("flow: pyramid_levels must be >= 1");
  if (!(ridge_lambda > 0.0)) throw ValidationError("flow: ridge_lambda must be > 0");
  if (iterations_per_level < 1) throw ValidationError("flow: iterations_per_level must be >= 1");
  if (!(max_speed > 0.0)) throw ValidationError("flow: max_speed must be > 0");
}

FlowVector lk_solve_window(const GridD& ix, const GridD& iy, const GridD& it, int row, int col, const FlowConfig& cfg) {
  const int rows = static_cast<int>(ix.rows());
  const int cols = static_cast<int>(ix.cols());
  const int r0 = std::max(0, row - cfg.window_radius);
  const int r1 = std::min(rows - 1, row + cfg.window_radius);
  const int c0 = std::max(0, col - cfg.window_radius);
  const int c1 = std::min(cols - 1, col + cfg.window_radius);

  double gxx = 0, gxy = 0, gyy = 0, bx = 0, by = 0;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double x = ix(r, c);
      const double y = iy(r, c);
      const double t = it(r, c);
      gxx += x * x;
      gxy += x * y;
      gyy += y * y;
      bx += x * t;
      by += y * t;
    }
  }
  Eigen::Matrix2d g;
  g << gxx + cfg.ridge_lambda, gxy, gxy, gyy + cfg.ridge_lambda;
  const Eigen::Vector2d w = g.ldlt().solve(Eigen::Vector2d(-bx, -by));
  return {w.x(), w.y()};
}

std::pair<GridD, GridD> spatial_gradients(const GridD& g) {
  const auto rows = g.rows();
  const auto cols = g.cols();
  GridD gx(rows, cols), gy(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto cl = std::max<Eigen::Index>(c - 1, 0);
      const auto cr = std::min<Eigen::Index>(c + 1, cols - 1);
      const auto ru = std::max<Eigen::Index>(r - 1, 0);
      const auto rd = std::min<Eigen::Index>(r + 1, rows - 1);
      gx(r, c) = 0.5 * (g(r, cr) - g(r, cl));
      gy(r, c) = 0.5 * (g(rd, c) - g(ru, c));
    }
  }
  return {gx, gy};
}

GridD downsample2(const GridD& g) {
  const auto rows = g.rows() / 2;
  const auto cols = g.cols() / 2;
  GridD out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = 0.25 * (g(2 * r, 2 * c) + g(2 * r, 2 * c + 1) + g(2 * r + 1, 2 * c) + g(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

GridD warp_backward(const GridD& g, const GridD& u, const GridD& v) {
  GridD out(g.rows(), g.cols());
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      out(r, c) = sample_bilinear(g, static_cast<double>(r) - v(r, c), static_cast<double>(c) - u(r, c));
    }
  }
  return out;
}

namespace {

GridD upsample2(const GridD& coarse, Eigen::Index rows, Eigen::Index cols) {
  GridD out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = 2.0 * coarse(std::min(r / 2, coarse.rows() - 1), std::min(c / 2, coarse.cols() - 1));
    }
  }
  return out;
}

std::vector<GridD> build_pyramid(const GridF& field, int levels) {
  std::vector<GridD> pyr{field.cast<double>()};
  while (static_cast<int>(pyr.size()) < levels && pyr.back().rows() / 2 >= 3 && pyr.back().cols() / 2 >= 3) {
    pyr.push_back(downsample2(pyr.back()));
  }
  return pyr;
}

}  // namespace

MotionField estimate_flow(const RainfallField& f0, const RainfallField& f1, const RainfallField& f2,
                          const FlowConfig& cfg) {
  cfg.validate();
  for (const auto* f : {&f0, &f1, &f2}) f->validate();
  if (!(f0.region == f1.region) || !(f1.region == f2.region)) {
    throw ValidationError("estimate_flow: fields belong to different regions");
  }
  if (f1.t_index != f0.t_index + 1 || f2.t_index != f1.t_index + 1) {
    throw ValidationError("estimate_flow: fields are not consecutive hours");
  }

  const std::vector<std::vector<GridD>> pyramids{build_pyramid(f0.values, cfg.pyramid_levels),
                                                 build_pyramid(f1.values, cfg.pyramid_levels),
                                                 build_pyramid(f2.values, cfg.pyramid_levels)};
  const int top = static_cast<int>(pyramids[0].size()) - 1;

  GridD u = GridD::Zero(pyramids[0][top].rows(), pyramids[0][top].cols());
  GridD v = u;
  for (int level = top; level >= 0; --level) {
    const Eigen::Index rows = pyramids[0][level].rows();
    const Eigen::Index cols = pyramids[0][level].cols();
    if (level < top) {
      u = upsample2(u, rows, cols);
      v = upsample2(v, rows, cols);
    }
    const double limit = cfg.max_speed / static_cast<double>(1 << level);
    for (int iter = 0; iter < cfg.iterations_per_level; ++iter) {
      GridD du = GridD::Zero(rows, cols);
      GridD dv = GridD::Zero(rows, cols);
      for (int pair = 0; pair < 2; ++pair) {
        const GridD& prev = pyramids[pair][level];
        const GridD& next = pyramids[pair + 1][level];
        const GridD warped = warp_backward(prev, u, v);
        const GridD mid = 0.5 * (warped + next);
        const auto [ix, iy] = spatial_gradients(mid);
        const GridD it = next - warped;
        for (Eigen::Index r = 0; r < rows; ++r) {
          for (Eigen::Index c = 0; c < cols; ++c) {
            const FlowVector w = lk_solve_window(ix, iy, it, static_cast<int>(r), static_cast<int>(c), cfg);
            du(r, c) += 0.5 * w.u;
            dv(r, c) += 0.5 * w.v;
          }
        }
      }
      u = (u + du).cwiseMax(-limit).cwiseMin(limit);
      v = (v + dv).cwiseMax(-limit).cwiseMin(limit);
    }
  }

  MotionField out;
  out.region = f0.region;
  out.u = u;
  out.v = v;
  return out;
}

}  // namespace lews
