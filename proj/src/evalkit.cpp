#include "lews/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lews/manifest.hpp"

namespace lews {

PRCurve pr_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("pr_curve: score and label counts differ");
  PRCurve curve;
  curve.total = static_cast<std::int64_t>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("pr_curve: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw ValidationError("pr_curve: scores must be finite");
    curve.positives += labels[i];
  }
  if (curve.positives == 0) throw ValidationError("pr_curve: no positive labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // Sweep from the highest score down; each distinct score closes one group.
  std::int64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      (labels[order[k]] == 1 ? tp : fp) += 1;
      ++k;
    }
    PRPoint p;
    p.threshold = s;
    p.tp = tp;
    p.fp = fp;
    p.fn = curve.positives - tp;
    p.tn = curve.total - curve.positives - fp;
    curve.points.push_back(p);
  }
  std::reverse(curve.points.begin(), curve.points.end());
  return curve;
}

const PRPoint& operating_point(const PRCurve& curve, double target) {
  if (!(target > 0.0 && target <= 1.0)) throw ValidationError("precision_at_recall: target must lie in (0, 1]");
  if (curve.points.empty()) throw ValidationError("precision_at_recall: empty curve");
  for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
    if (it->recall() >= target) return *it;
  }
  // The lowest threshold predicts everything positive, so recall 1 is always reached.
  return curve.points.front();
}

double precision_at_recall(const PRCurve& curve, double target) { return operating_point(curve, target).precision(); }

const AblationCell& AblationReport::cell(TrainMode mode, RainSetting setting) const {
  for (const auto& c : cells) {
    if (c.mode == mode && c.setting == setting) return c;
  }
  throw ValidationError("ablation report has no cell for " + to_string(mode) + "/" + to_string(setting));
}

double AblationReport::degradation(TrainMode mode) const {
  const double obs = cell(mode, RainSetting::ObservedRainfall).precision;
  const double fc = cell(mode, RainSetting::ForecastedRainfall).precision;
  return obs > 0.0 ? (obs - fc) / obs : 0.0;
}

std::string AblationReport::to_csv() const {
  std::string out = "mode,setting,precision_at_recall80,recall_achieved,threshold,tp,fp,fn\n";
  for (const auto& c : cells) {
    out += to_string(c.mode) + "," + to_string(c.setting) + "," + format_real(c.precision) + "," +
           format_real(c.recall) + "," + format_real(c.point.threshold) + "," + std::to_string(c.point.tp) + "," +
           std::to_string(c.point.fp) + "," + std::to_string(c.point.fn) + "\n";
  }
  return out;
}

std::string AblationReport::to_text() const {
  auto fixed = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::string out = "precision at recall >= " + fixed(target_recall) + "\n";
  out += "mode                  observed  forecast  degradation\n";
  std::vector<TrainMode> modes;
  for (const auto& c : cells) {
    if (std::find(modes.begin(), modes.end(), c.mode) == modes.end()) modes.push_back(c.mode);
  }
  for (const TrainMode m : modes) {
    std::string name = to_string(m);
    name.resize(22, ' ');
    out += name + fixed(cell(m, RainSetting::ObservedRainfall).precision) + "    " +
           fixed(cell(m, RainSetting::ForecastedRainfall).precision) + "    " + fixed(degradation(m)) + "\n";
  }
  return out;
}

AblationReport robustness_ablation(const std::map<TrainMode, ModelParams<float>>& models,
                                   std::span<const Sample> observed_test, std::span<const Sample> forecast_test,
                                   double target_recall) {
  if (observed_test.size() != forecast_test.size()) throw ValidationError("ablation: test sets differ in size");
  for (std::size_t i = 0; i < observed_test.size(); ++i) {
    const auto& a = observed_test[i];
    const auto& b = forecast_test[i];
    if (a.anchor_t != b.anchor_t || a.region_id != b.region_id || a.label != b.label ||
        a.setting != RainSetting::ObservedRainfall || b.setting != RainSetting::ForecastedRainfall) {
      throw ValidationError("ablation: test sets must pair observed and forecast samples of the same anchors");
    }
  }
  for (const TrainMode m : {TrainMode::RMCL, TrainMode::EndToEnd, TrainMode::EndToEndForecast}) {
    if (!models.contains(m)) throw ValidationError("ablation: missing model for " + to_string(m));
  }
  std::vector<int> labels;
  for (const auto& s : observed_test) labels.push_back(s.label);

  AblationReport report;
  report.target_recall = target_recall;
  for (const TrainMode m : {TrainMode::RMCL, TrainMode::EndToEnd, TrainMode::EndToEndForecast}) {
    for (const RainSetting setting : {RainSetting::ObservedRainfall, RainSetting::ForecastedRainfall}) {
      const auto& set = setting == RainSetting::ObservedRainfall ? observed_test : forecast_test;
      const auto scores = score_samples(models.at(m), set);
      const PRCurve curve = pr_curve(scores, labels);
      AblationCell c;
      c.mode = m;
      c.setting = setting;
      c.point = operating_point(curve, target_recall);
      c.precision = c.point.precision();
      c.recall = c.point.recall();
      report.cells.push_back(c);
    }
  }
  return report;
}

}  // namespace lews
