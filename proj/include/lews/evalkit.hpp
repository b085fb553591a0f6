// Precision-recall analysis, precision at a recall target, and the
// observed/forecast robustness ablation report.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lews/neural.hpp"
#include "lews/sample.hpp"
#include "lews/training.hpp"

namespace lews {

/// Confusion counts when predicting positive for score >= threshold.
struct PRPoint {
  double threshold = 0.0;
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  double precision() const { return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return static_cast<double>(tp) / static_cast<double>(tp + fn); }
};

/// One point per distinct score, thresholds ascending (recall non-increasing).
struct PRCurve {
  std::vector<PRPoint> points;
  std::int64_t positives = 0;
  std::int64_t total = 0;
};

PRCurve pr_curve(std::span<const double> scores, std::span<const int> labels);

/// Highest-threshold point with recall >= target.
const PRPoint& operating_point(const PRCurve& curve, double target = 0.8);
double precision_at_recall(const PRCurve& curve, double target = 0.8);

struct AblationCell {
  TrainMode mode = TrainMode::RMCL;
  RainSetting setting = RainSetting::ObservedRainfall;
  PRPoint point;
  double precision = 0.0;
  double recall = 0.0;
};

struct AblationReport {
  double target_recall = 0.8;
  /// Rows ordered by mode, then setting (observed first).
  std::vector<AblationCell> cells;

  const AblationCell& cell(TrainMode mode, RainSetting setting) const;
  /// (p_observed - p_forecast) / p_observed.
  double degradation(TrainMode mode) const;

  /// `mode,setting,precision_at_recall80,recall_achieved,threshold,tp,fp,fn`.
  std::string to_csv() const;
  std::string to_text() const;
};

/// Scores every model on both test sets. The sets must hold the same anchors in the same order.
AblationReport robustness_ablation(const std::map<TrainMode, ModelParams<float>>& models,
                                   std::span<const Sample> observed_test, std::span<const Sample> forecast_test,
                                   double target_recall = 0.8);

}  // namespace lews
