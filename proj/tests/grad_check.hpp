// Central-difference gradient checking in double precision.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace lews::test {

using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true
/// gradient is zero from dividing rounding noise by zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Largest relative error between `analytic` and central differences of
/// `loss` w.r.t. `x`. When `max_entries` > 0 only that many randomly chosen
/// entries are probed. `x` is restored on return.
template <typename Loss>
double max_grad_error(MatD& x, const MatD& analytic, Loss&& loss, double step = 1e-5, int max_entries = 0,
                      std::uint64_t seed = 1) {
  std::vector<Eigen::Index> entries(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) entries[static_cast<std::size_t>(i)] = i;
  if (max_entries > 0 && static_cast<Eigen::Index>(entries.size()) > max_entries) {
    std::mt19937_64 rng(seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(static_cast<std::size_t>(max_entries));
  }
  double worst = 0.0;
  for (const Eigen::Index i : entries) {
    const double saved = x.data()[i];
    x.data()[i] = saved + step;
    const double up = loss();
    x.data()[i] = saved - step;
    const double down = loss();
    x.data()[i] = saved;
    worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2.0 * step)));
  }
  return worst;
}

/// Loss value together with the on/off pattern of every ReLU it passed through.
struct PiecewiseProbe {
  double value = 0.0;
  std::vector<bool> pattern;
};

struct PiecewiseCheck {
  double worst = 0.0;
  int checked = 0;
  int skipped = 0;
};

/// As max_grad_error for piecewise-smooth losses: entries whose +/- step
/// evaluations switch any ReLU are skipped, since the loss has a kink
/// between them and the central difference does not estimate the gradient.
template <typename Probe>
PiecewiseCheck piecewise_grad_error(MatD& x, const MatD& analytic, Probe&& probe, double step, int max_entries,
                                    std::uint64_t seed, double floor) {
  std::vector<Eigen::Index> entries(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) entries[static_cast<std::size_t>(i)] = i;
  if (max_entries > 0 && static_cast<Eigen::Index>(entries.size()) > max_entries) {
    std::mt19937_64 rng(seed);
    std::shuffle(entries.begin(), entries.end(), rng);
    entries.resize(static_cast<std::size_t>(max_entries));
  }
  const std::vector<bool> base = probe().pattern;
  PiecewiseCheck out;
  for (const Eigen::Index i : entries) {
    const double saved = x.data()[i];
    x.data()[i] = saved + step;
    const PiecewiseProbe up = probe();
    x.data()[i] = saved - step;
    const PiecewiseProbe down = probe();
    x.data()[i] = saved;
    if (up.pattern != base || down.pattern != base) {
      ++out.skipped;
      continue;
    }
    ++out.checked;
    out.worst = std::max(out.worst, relative_error(analytic.data()[i], (up.value - down.value) / (2.0 * step), floor));
  }
  return out;
}

inline MatD random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace lews::test
