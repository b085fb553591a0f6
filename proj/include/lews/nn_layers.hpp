// Layer primitives with hand-written backward passes.
//
// Activations are column-per-item matrices: a feature map with C channels
// over F frames of an H x W grid is a (C, F*H*W) matrix whose column
// f*H*W + r*W + c holds cell (r, c) of frame f. Token sequences are (d, T).
// Biases and gains are (n, 1) matrices. Backward functions accumulate into
// the parameter gradients they are given.
#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace lews::nn {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// 3x3 convolution, stride 1, zero padding, frames never mix.

template <typename S>
Matrix<S> im2col3x3(const Matrix<S>& x, int height, int width) {
  const Eigen::Index channels = x.rows();
  const Eigen::Index hw = static_cast<Eigen::Index>(height) * width;
  const Eigen::Index frames = x.cols() / hw;
  Matrix<S> cols(channels * 9, x.cols());
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const Eigen::Index col = f * hw + r * width + c;
        S* dst = cols.col(col).data();
        for (Eigen::Index ci = 0; ci < channels; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            const int rr = r + ky - 1;
            for (int kx = 0; kx < 3; ++kx) {
              const int cc = c + kx - 1;
              const bool inside = rr >= 0 && rr < height && cc >= 0 && cc < width;
              dst[ci * 9 + ky * 3 + kx] = inside ? x(ci, f * hw + rr * width + cc) : S(0);
            }
          }
        }
      }
    }
  }
  return cols;
}

template <typename S>
Matrix<S> col2im3x3(const Matrix<S>& cols, Eigen::Index channels, int height, int width) {
  const Eigen::Index hw = static_cast<Eigen::Index>(height) * width;
  const Eigen::Index frames = cols.cols() / hw;
  Matrix<S> x = Matrix<S>::Zero(channels, cols.cols());
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const Eigen::Index col = f * hw + r * width + c;
        const S* src = cols.col(col).data();
        for (Eigen::Index ci = 0; ci < channels; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            const int rr = r + ky - 1;
            if (rr < 0 || rr >= height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int cc = c + kx - 1;
              if (cc < 0 || cc >= width) continue;
              x(ci, f * hw + rr * width + cc) += src[ci * 9 + ky * 3 + kx];
            }
          }
        }
      }
    }
  }
  return x;
}

/// weight: (out, in*9); bias: (out, 1). `cols` receives the patch matrix.
template <typename S>
Matrix<S> conv3x3_forward(const Matrix<S>& x, int height, int width, const Matrix<S>& weight, const Matrix<S>& bias,
                          Matrix<S>& cols) {
  cols = im2col3x3(x, height, width);
  Matrix<S> y = weight * cols;
  y.colwise() += bias.col(0);
  return y;
}

template <typename S>
void conv3x3_backward(const Matrix<S>& dy, const Matrix<S>& cols, int height, int width, const Matrix<S>& weight,
                      Matrix<S>& dweight, Matrix<S>& dbias, Matrix<S>* dx) {
  dweight.noalias() += dy * cols.transpose();
  dbias += dy.rowwise().sum();
  if (dx != nullptr) {
    const Matrix<S> dcols = weight.transpose() * dy;
    *dx = col2im3x3(dcols, weight.cols() / 9, height, width);
  }
}

// ---------------------------------------------------------------------------
// Dense layers and pointwise functions.

template <typename S>
Matrix<S> linear_forward(const Matrix<S>& x, const Matrix<S>& weight, const Matrix<S>& bias) {
  Matrix<S> y = weight * x;
  y.colwise() += bias.col(0);
  return y;
}

template <typename S>
void linear_backward(const Matrix<S>& dy, const Matrix<S>& x, const Matrix<S>& weight, Matrix<S>& dweight,
                     Matrix<S>& dbias, Matrix<S>* dx) {
  dweight.noalias() += dy * x.transpose();
  dbias += dy.rowwise().sum();
  if (dx != nullptr) *dx = weight.transpose() * dy;
}

template <typename S>
Matrix<S> relu(const Matrix<S>& x) {
  return x.cwiseMax(S(0));
}

/// Gradient through ReLU given its output.
template <typename S>
Matrix<S> relu_backward(const Matrix<S>& dy, const Matrix<S>& y) {
  return (y.array() > S(0)).select(dy.array(), S(0)).matrix();
}

template <typename S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <typename S>
S sigmoid_backward(S dy, S y) {
  return dy * y * (S(1) - y);
}

/// Row-wise softmax with max subtraction.
template <typename S>
Matrix<S> softmax_rows(const Matrix<S>& x) {
  Matrix<S> y = (x.colwise() - x.rowwise().maxCoeff()).array().exp().matrix();
  const Vector<S> sums = y.rowwise().sum();
  return y.array().colwise() / sums.array();
}

template <typename S>
Matrix<S> softmax_rows_backward(const Matrix<S>& dy, const Matrix<S>& y) {
  const Vector<S> dots = (dy.array() * y.array()).rowwise().sum();
  return y.array() * (dy.array().colwise() - dots.array());
}

// ---------------------------------------------------------------------------
// Layer normalization over the feature dimension (rows) of each column.

template <typename S>
struct LayerNormCache {
  Matrix<S> xhat;
  Eigen::Matrix<S, 1, Eigen::Dynamic> inv_std;
};

template <typename S>
Matrix<S> layer_norm_forward(const Matrix<S>& x, const Matrix<S>& gamma, const Matrix<S>& beta, S eps,
                             LayerNormCache<S>& cache) {
  const S d = static_cast<S>(x.rows());
  const Eigen::Matrix<S, 1, Eigen::Dynamic> mean = x.colwise().sum() / d;
  Matrix<S> centered = x.rowwise() - mean;
  const Eigen::Matrix<S, 1, Eigen::Dynamic> var = centered.array().square().colwise().sum() / d;
  cache.inv_std = (var.array() + eps).rsqrt();
  cache.xhat = centered.array().rowwise() * cache.inv_std.array();
  Matrix<S> y = cache.xhat.array().colwise() * gamma.col(0).array();
  y.colwise() += beta.col(0);
  return y;
}

template <typename S>
Matrix<S> layer_norm_backward(const Matrix<S>& dy, const Matrix<S>& gamma, const LayerNormCache<S>& cache,
                              Matrix<S>& dgamma, Matrix<S>& dbeta) {
  const S d = static_cast<S>(dy.rows());
  dgamma += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
  dbeta += dy.rowwise().sum();
  const Matrix<S> dxhat = dy.array().colwise() * gamma.col(0).array();
  const Eigen::Matrix<S, 1, Eigen::Dynamic> sum1 = dxhat.colwise().sum();
  const Eigen::Matrix<S, 1, Eigen::Dynamic> sum2 = (dxhat.array() * cache.xhat.array()).colwise().sum();
  Matrix<S> dx = (d * dxhat).rowwise() - sum1;
  dx.array() -= cache.xhat.array().rowwise() * sum2.array();
  dx.array().rowwise() *= cache.inv_std.array() / d;
  return dx;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention over the columns of x (d, T).

template <typename S>
struct AttentionParams {
  const Matrix<S>& wq;
  const Matrix<S>& bq;
  const Matrix<S>& wk;
  const Matrix<S>& bk;
  const Matrix<S>& wv;
  const Matrix<S>& bv;
  const Matrix<S>& wo;
  const Matrix<S>& bo;
};

template <typename S>
struct AttentionGrads {
  Matrix<S>& wq;
  Matrix<S>& bq;
  Matrix<S>& wk;
  Matrix<S>& bk;
  Matrix<S>& wv;
  Matrix<S>& bv;
  Matrix<S>& wo;
  Matrix<S>& bo;
};

template <typename S>
struct AttentionCache {
  Matrix<S> x, q, k, v, concat;
  std::vector<Matrix<S>> probs;  // per head, (T, T), rows are queries
};

template <typename S>
Matrix<S> attention_forward(const Matrix<S>& x, const AttentionParams<S>& p, int heads, AttentionCache<S>& cache) {
  const Eigen::Index d = x.rows();
  const Eigen::Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  cache.x = x;
  cache.q = linear_forward(x, p.wq, p.bq);
  cache.k = linear_forward(x, p.wk, p.bk);
  cache.v = linear_forward(x, p.wv, p.bv);
  cache.concat.resize(d, x.cols());
  cache.probs.resize(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const auto qh = cache.q.middleRows(h * dh, dh);
    const auto kh = cache.k.middleRows(h * dh, dh);
    const auto vh = cache.v.middleRows(h * dh, dh);
    const Matrix<S> scores = (qh.transpose() * kh) * scale;
    cache.probs[static_cast<std::size_t>(h)] = softmax_rows(scores);
    cache.concat.middleRows(h * dh, dh).noalias() = vh * cache.probs[static_cast<std::size_t>(h)].transpose();
  }
  return linear_forward(cache.concat, p.wo, p.bo);
}

template <typename S>
Matrix<S> attention_backward(const Matrix<S>& dy, const AttentionCache<S>& cache, const AttentionParams<S>& p,
                             int heads, AttentionGrads<S>& g) {
  const Eigen::Index d = cache.x.rows();
  const Eigen::Index dh = d / heads;
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));
  Matrix<S> dconcat;
  linear_backward(dy, cache.concat, p.wo, g.wo, g.bo, &dconcat);
  Matrix<S> dq(d, cache.x.cols()), dk(d, cache.x.cols()), dv(d, cache.x.cols());
  for (int h = 0; h < heads; ++h) {
    const Matrix<S>& a = cache.probs[static_cast<std::size_t>(h)];
    const auto qh = cache.q.middleRows(h * dh, dh);
    const auto kh = cache.k.middleRows(h * dh, dh);
    const auto vh = cache.v.middleRows(h * dh, dh);
    const auto doh = dconcat.middleRows(h * dh, dh);
    dv.middleRows(h * dh, dh).noalias() = doh * a;
    const Matrix<S> da = doh.transpose() * vh;
    const Matrix<S> ds = softmax_rows_backward(da, a) * scale;
    dq.middleRows(h * dh, dh).noalias() = kh * ds.transpose();
    dk.middleRows(h * dh, dh).noalias() = qh * ds;
  }
  Matrix<S> dx, tmp;
  linear_backward(dq, cache.x, p.wq, g.wq, g.bq, &dx);
  linear_backward(dk, cache.x, p.wk, g.wk, g.bk, &tmp);
  dx += tmp;
  linear_backward(dv, cache.x, p.wv, g.wv, g.bv, &tmp);
  dx += tmp;
  return dx;
}

// ---------------------------------------------------------------------------
// Pooling.

/// Mean over columns: (d, N) -> (d, 1).
template <typename S>
Matrix<S> mean_pool(const Matrix<S>& x) {
  return x.rowwise().mean();
}

template <typename S>
Matrix<S> mean_pool_backward(const Matrix<S>& dy, Eigen::Index n) {
  return dy.col(0).replicate(1, n) / static_cast<S>(n);
}

/// Spatial mean per frame: (C, F*HW) -> (C, F).
template <typename S>
Matrix<S> frame_mean_pool(const Matrix<S>& x, Eigen::Index hw) {
  const Eigen::Index frames = x.cols() / hw;
  Matrix<S> y(x.rows(), frames);
  for (Eigen::Index f = 0; f < frames; ++f) y.col(f) = x.middleCols(f * hw, hw).rowwise().mean();
  return y;
}

template <typename S>
Matrix<S> frame_mean_pool_backward(const Matrix<S>& dy, Eigen::Index hw) {
  Matrix<S> dx(dy.rows(), dy.cols() * hw);
  for (Eigen::Index f = 0; f < dy.cols(); ++f) {
    dx.middleCols(f * hw, hw) = (dy.col(f) / static_cast<S>(hw)).replicate(1, hw);
  }
  return dx;
}

/// Sinusoidal position codes, (d, T): sin on even rows, cos on odd rows.
template <typename S>
Matrix<S> positional_encoding(Eigen::Index d, Eigen::Index steps) {
  Matrix<S> pe(d, steps);
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(t) * freq;
      pe(i, t) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

}  // namespace lews::nn
