#include "jointrait/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jointrait/error.hpp"

namespace jointrait {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void validate_records(const std::vector<EvalRecord>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string f = "records[" + std::to_string(i) + "]";
    if (!(r.risk >= 0.0 && r.risk <= 1.0)) throw DataError(f + ".risk", "predicted risk must lie in [0, 1]");
    if (!std::isfinite(r.time) || r.time < 0.0) throw DataError(f + ".time", "time must be finite and >= 0");
    if (r.event != 0 && r.event != 1) throw DataError(f + ".event", "event indicator must be 0 or 1");
  }
}

// Product-limit estimate over event times s <= t_tilde using the records
// selected by `include`.
template <typename Include>
double product_limit(const std::vector<EvalRecord>& records, double t_tilde, Include include) {
  std::vector<double> times;
  for (std::size_t j = 0; j < records.size(); ++j)
    if (include(j) && records[j].event == 1 && records[j].time <= t_tilde) times.push_back(records[j].time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double surv = 1.0;
  for (double s : times) {
    double at_risk = 0.0, events = 0.0;
    for (std::size_t j = 0; j < records.size(); ++j) {
      if (!include(j)) continue;
      if (records[j].time >= s) at_risk += 1.0;
      if (records[j].time == s && records[j].event == 1) events += 1.0;
    }
    if (at_risk > 0.0) surv *= 1.0 - events / at_risk;
  }
  return surv;
}

}  // namespace

void EvalConfig::validate() const {
  if (!(std::isfinite(landmark) && std::isfinite(horizon) && landmark < horizon))
    throw ConfigError("evaluation needs a finite landmark below the horizon");
  if (!(bandwidth > 0.0)) throw ConfigError("kernel bandwidth must be positive");
  if (grid < 3 || grid % 2 == 0) throw ConfigError("cutpoint grid must be odd and at least 3");
}

double kernel_km(const std::vector<EvalRecord>& records, std::size_t target, double t_tilde, double bandwidth) {
  if (records.empty() || target >= records.size()) throw ConfigError("kernel_km needs a target inside the records");
  const double centre = records[target].risk;
  auto in_window = [&](std::size_t j) { return j != target && std::abs(records[j].risk - centre) <= bandwidth; };
  bool any = false;
  for (std::size_t j = 0; j < records.size() && !any; ++j) any = in_window(j);
  if (!any) return product_limit(records, t_tilde, [&](std::size_t j) { return j != target; });
  return product_limit(records, t_tilde, in_window);
}

CensoringWeight censoring_weight(const EvalRecord& record, double landmark, double horizon, double surv_at_horizon,
                                 double surv_at_time) {
  CensoringWeight w;
  if (record.time <= landmark || record.time > horizon) return w;
  if (record.event == 1) {
    w.weight = 1.0;
    return w;
  }
  if (!(surv_at_time > 0.0)) {
    w.degenerate = true;
    return w;
  }
  w.weight = std::clamp(1.0 - surv_at_horizon / surv_at_time, 0.0, 1.0);
  return w;
}

RocResult roc_auc(const std::vector<EvalRecord>& records, const EvalConfig& config) {
  config.validate();
  validate_records(records);
  RocResult out;
  std::vector<double> risk, w;
  int degenerate = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!(r.time > config.landmark)) continue;
    double s_h = 1.0, s_t = 1.0;
    if (r.event == 0 && r.time <= config.horizon) {
      s_h = kernel_km(records, i, config.horizon, config.bandwidth);
      s_t = kernel_km(records, i, r.time, config.bandwidth);
    }
    const auto cw = censoring_weight(r, config.landmark, config.horizon, s_h, s_t);
    if (cw.degenerate) ++degenerate;
    risk.push_back(r.risk);
    w.push_back(cw.weight);
  }
  if (degenerate > 0)
    out.warnings.push_back(std::to_string(degenerate) + " censored subject(s) had zero conditional survival; weight set to 0");

  double cases = 0.0, controls = 0.0;
  for (double x : w) {
    cases += x;
    controls += 1.0 - x;
  }
  auto point = [&](double c) {
    double tp = 0.0, tn = 0.0;
    for (std::size_t i = 0; i < risk.size(); ++i) {
      if (risk[i] > c)
        tp += w[i];
      else
        tn += 1.0 - w[i];
    }
    return RocPoint{c, tp / cases, tn / controls};
  };
  if (!(cases > 0.0) || !(controls > 0.0)) {
    out.defined = false;
    out.auc = kNaN;
    out.warnings.push_back(cases > 0.0 ? "no controls at risk; AUC undefined" : "no cases in the window; AUC undefined");
    return out;
  }
  for (int g = 0; g < config.grid; ++g) out.points.push_back(point(static_cast<double>(g) / (config.grid - 1)));

  // Vertices of the empirical ROC polygon: every grid cutoff plus every
  // distinct risk, walked from high to low cutoff so both coordinates grow.
  std::vector<double> cuts(risk);
  for (const auto& p : out.points) cuts.push_back(p.cutoff);
  std::sort(cuts.begin(), cuts.end(), std::greater<>());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double fpr_prev = 0.0, tpr_prev = 0.0, area = 0.0;
  auto simpson = [&](double fpr, double tpr) {
    const double mid = 0.5 * (tpr_prev + tpr);
    area += (fpr - fpr_prev) / 6.0 * (tpr_prev + 4.0 * mid + tpr);
    fpr_prev = fpr;
    tpr_prev = tpr;
  };
  for (double c : cuts) {
    const auto p = point(c);
    simpson(1.0 - p.specificity, p.sensitivity);
  }
  simpson(1.0, 1.0);
  out.auc = std::clamp(area, 0.0, 1.0);
  return out;
}

double km_survival(const std::vector<EvalRecord>& records, double t, bool censoring) {
  if (!censoring) return product_limit(records, t, [](std::size_t) { return true; });
  std::vector<EvalRecord> flipped(records);
  for (auto& r : flipped) r.event = 1 - r.event;
  return product_limit(flipped, t, [](std::size_t) { return true; });
}

BrierResult brier(const std::vector<EvalRecord>& records, const EvalConfig& config) {
  config.validate();
  validate_records(records);
  BrierResult out;
  const bool censoring = config.brier_km == BrierKm::censoring;
  const double s_landmark = km_survival(records, config.landmark, censoring);
  double total = 0.0;
  int degenerate = 0;
  for (const auto& r : records) {
    if (!(r.time > config.landmark)) continue;
    ++out.at_risk;
    double g = 0.0, d = 0.0;
    if (r.time > config.horizon) {
      const double s = km_survival(records, config.horizon, censoring);
      if (s > 0.0) g = s_landmark / s;
      else ++degenerate;
    } else if (r.event == 1) {
      d = 1.0;
      const double s = km_survival(records, r.time, censoring);
      if (s > 0.0) g = s_landmark / s;
      else ++degenerate;
    }
    total += g * (d - r.risk) * (d - r.risk);
  }
  if (degenerate > 0)
    out.warnings.push_back(std::to_string(degenerate) + " subject(s) had zero Kaplan-Meier survival; weight set to 0");
  if (out.at_risk == 0) {
    out.defined = false;
    out.score = kNaN;
    out.warnings.push_back("no subjects at risk at the landmark");
    return out;
  }
  out.score = total / out.at_risk;
  return out;
}

}  // namespace jointrait
