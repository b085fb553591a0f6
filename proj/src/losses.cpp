#include "lews/losses.hpp"

#include <algorithm>
#include <cmath>

#include "lews/geogrid.hpp"

namespace lews {

using nn::Matrix;
using nn::Vector;

template <typename S>
void ContrastiveBatch<S>::validate() const {
  if (!(temperature > S(0))) throw ValidationError("rmcl: temperature must be positive");
  if (embeddings.cols() < 2) throw ValidationError("rmcl: batch needs at least two embeddings");
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.cols()) {
    throw ValidationError("rmcl: label count does not match embedding count");
  }
  if (!embeddings.allFinite()) throw ValidationError("rmcl: embeddings must be finite");
}

template <typename S>
RmclResult<S> rmcl_loss(const ContrastiveBatch<S>& batch, bool with_grad) {
  batch.validate();
  const Eigen::Index n = batch.embeddings.cols();
  const S tau = batch.temperature;

  Vector<S> norms = batch.embeddings.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(norms(i) > S(0))) throw ValidationError("rmcl: zero-length embedding has no cosine similarity");
  }
  const Matrix<S> unit = batch.embeddings.array().rowwise() / norms.transpose().array();
  const Matrix<S> sim = unit.transpose() * unit;

  RmclResult<S> out;
  // dL/dsim accumulated before the 1/anchors factor.
  Matrix<S> dsim = Matrix<S>::Zero(n, n);
  S total = S(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int positives = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && batch.labels[static_cast<std::size_t>(j)] == batch.labels[static_cast<std::size_t>(i)]) {
        ++positives;
      }
    }
    if (positives == 0) continue;
    ++out.anchors_used;

    S max_logit = -std::numeric_limits<S>::infinity();
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) max_logit = std::max(max_logit, sim(i, a) / tau);
    }
    S denom = S(0);
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(sim(i, a) / tau - max_logit);
    }
    const S log_denom = max_logit + std::log(denom);
    S anchor = S(0);
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p != i && batch.labels[static_cast<std::size_t>(p)] == batch.labels[static_cast<std::size_t>(i)]) {
        anchor -= sim(i, p) / tau - log_denom;
      }
    }
    total += anchor / static_cast<S>(positives);

    if (with_grad) {
      for (Eigen::Index a = 0; a < n; ++a) {
        if (a == i) continue;
        const S softmax = std::exp(sim(i, a) / tau - log_denom);
        const bool pos = batch.labels[static_cast<std::size_t>(a)] == batch.labels[static_cast<std::size_t>(i)];
        dsim(i, a) += (softmax - (pos ? S(1) / static_cast<S>(positives) : S(0))) / tau;
      }
    }
  }

  if (out.anchors_used == 0) {
    out.all_skipped = true;
    if (with_grad) out.grad = Matrix<S>::Zero(batch.embeddings.rows(), n);
    return out;
  }
  const S inv_anchors = S(1) / static_cast<S>(out.anchors_used);
  out.loss = total * inv_anchors;

  if (with_grad) {
    dsim *= inv_anchors;
    // sim = U^T U, so dU = U (dsim + dsim^T).
    const Matrix<S> dunit = unit * (dsim + dsim.transpose());
    out.grad.resize(batch.embeddings.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = unit.col(i);
      out.grad.col(i) = (dunit.col(i) - u * u.dot(dunit.col(i))) / norms(i);
    }
  }
  return out;
}

void FocalConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("focal: alpha must lie in (0, 1)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("focal: gamma must be >= 0");
  if (!(clamp > 0.0 && clamp < 0.5)) throw ValidationError("focal: clamp must lie in (0, 0.5)");
}

template <typename S>
S focal_loss(S y_hat, int y, const FocalConfig& cfg) {
  cfg.validate();
  if (y != 0 && y != 1) throw ValidationError("focal: label must be 0 or 1");
  const S lo = static_cast<S>(cfg.clamp);
  const S p = std::clamp(y_hat, lo, S(1) - lo);
  const S alpha = static_cast<S>(cfg.alpha);
  const S gamma = static_cast<S>(cfg.gamma);
  if (y == 1) return -alpha * std::pow(S(1) - p, gamma) * std::log(p);
  return -(S(1) - alpha) * std::pow(p, gamma) * std::log(S(1) - p);
}

template <typename S>
S focal_loss_grad_logit(S logit, int y, const FocalConfig& cfg) {
  cfg.validate();
  if (y != 0 && y != 1) throw ValidationError("focal: label must be 0 or 1");
  const S p = nn::sigmoid(logit);
  const S lo = static_cast<S>(cfg.clamp);
  if (p < lo || p > S(1) - lo) return S(0);
  const S alpha = static_cast<S>(cfg.alpha);
  const S gamma = static_cast<S>(cfg.gamma);
  const S q = S(1) - p;
  // Derivatives w.r.t. p, then dp/dlogit = p q.
  S dldp;
  if (y == 1) {
    const S dmod = gamma == S(0) ? S(0) : -gamma * std::pow(q, gamma - S(1));
    dldp = -alpha * (dmod * std::log(p) + std::pow(q, gamma) / p);
  } else {
    const S dmod = gamma == S(0) ? S(0) : gamma * std::pow(p, gamma - S(1));
    dldp = -(S(1) - alpha) * (dmod * std::log(q) - std::pow(p, gamma) / q);
  }
  return dldp * p * q;
}

template <typename S>
S focal_loss_mean(std::span<const S> y_hat, std::span<const int> y, const FocalConfig& cfg) {
  if (y_hat.size() != y.size() || y.empty()) throw ValidationError("focal: prediction/label sizes differ or are empty");
  S total = S(0);
  for (std::size_t i = 0; i < y.size(); ++i) total += focal_loss(y_hat[i], y[i], cfg);
  return total / static_cast<S>(y.size());
}

template struct ContrastiveBatch<float>;
template struct ContrastiveBatch<double>;
template RmclResult<float> rmcl_loss<float>(const ContrastiveBatch<float>&, bool);
template RmclResult<double> rmcl_loss<double>(const ContrastiveBatch<double>&, bool);
template float focal_loss<float>(float, int, const FocalConfig&);
template double focal_loss<double>(double, int, const FocalConfig&);
template float focal_loss_grad_logit<float>(float, int, const FocalConfig&);
template double focal_loss_grad_logit<double>(double, int, const FocalConfig&);
template float focal_loss_mean<float>(std::span<const float>, std::span<const int>, const FocalConfig&);
template double focal_loss_mean<double>(std::span<const double>, std::span<const int>, const FocalConfig&);

}  // namespace lews
