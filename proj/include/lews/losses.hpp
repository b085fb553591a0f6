// Supervised contrastive loss over rainfall-motion views, and binary focal loss.
#pragma once

#include <span>
#include <vector>

#include "lews/nn_layers.hpp"

namespace lews {

/// Embeddings are the columns of a (d, n) matrix.
template <typename S>
struct ContrastiveBatch {
  nn::Matrix<S> embeddings;
  std::vector<int> labels;
  S temperature = S(0.1);

  void validate() const;
};

template <typename S>
struct RmclResult {
  S loss = S(0);
  /// True when no anchor had a same-label partner; `loss` is then 0.
  bool all_skipped = false;
  int anchors_used = 0;
  /// d(loss)/d(embeddings), same shape as the batch; empty unless requested.
  nn::Matrix<S> grad;
};

/// Mean over anchors with at least one positive of
///   -1/|P(i)| sum_{p in P(i)} log( exp(s_ip/tau) / sum_{a != i} exp(s_ia/tau) ),
/// with s the cosine similarity of the (possibly unnormalized) columns.
template <typename S>
RmclResult<S> rmcl_loss(const ContrastiveBatch<S>& batch, bool with_grad = false);

struct FocalConfig {
  double alpha = 0.25;
  double gamma = 2.0;
  double clamp = 1e-7;

  void validate() const;
};

/// -a (1-p)^g y log p - (1-a) p^g (1-y) log(1-p), p clamped to [clamp, 1-clamp].
template <typename S>
S focal_loss(S y_hat, int y, const FocalConfig& cfg = {});

/// d(focal_loss)/d(logit) where y_hat = sigmoid(logit); zero inside the clamp.
template <typename S>
S focal_loss_grad_logit(S logit, int y, const FocalConfig& cfg = {});

/// Mean focal loss over a batch.
template <typename S>
S focal_loss_mean(std::span<const S> y_hat, std::span<const int> y, const FocalConfig& cfg = {});

}  // namespace lews
