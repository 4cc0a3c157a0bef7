#pragma once

#include <string>
#include <vector>

namespace jointrait {

struct EvalRecord {
  std::string id;
  double risk = 0.0;  // predicted π̂_i(t'|t)
  double time = 0.0;  // observed t_i
  int event = 0;      // δ_i
};

enum class BrierKm { censoring, event };

struct EvalConfig {
  double landmark = 0.0;
  double horizon = 0.0;
  double bandwidth = 0.10;
  int grid = 201;
  BrierKm brier_km = BrierKm::censoring;

  void validate() const;
};

/// Leave-one-out, uniform-kernel weighted product-limit estimate of
/// P{T ≥ t̃ | π̂_target}. Falls back to the unweighted estimate over all
/// other records when the kernel neighbourhood is empty.
double kernel_km(const std::vector<EvalRecord>& records, std::size_t target, double t_tilde, double bandwidth);

struct CensoringWeight {
  double weight = 0.0;
  bool degenerate = false;  // zero denominator survival
};

/// Ŵ_i(t, t'): 1 for an event in (t, t'], 1 - S(t')/S(t_i) for a censoring
/// in (t, t'], 0 otherwise.
CensoringWeight censoring_weight(const EvalRecord& record, double landmark, double horizon, double surv_at_horizon,
                                 double surv_at_time);

struct RocPoint {
  double cutoff = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // on the uniform cutoff grid
  double auc = 0.0;
  bool defined = true;
  std::vector<std::string> warnings;
};

/// Censoring-weighted time-dependent ROC among subjects at risk at the
/// landmark. The AUC integrates the empirical ROC polygon, whose vertices are
/// the operating points at every grid cutoff and every distinct predicted
/// risk, applying Simpson's rule on each linear piece.
RocResult roc_auc(const std::vector<EvalRecord>& records, const EvalConfig& config);

/// Product-limit survival curve evaluated at `t` (Π over s ≤ t).
/// `censoring` switches to the censoring distribution (indicator 1 - δ).
double km_survival(const std::vector<EvalRecord>& records, double t, bool censoring);

struct BrierResult {
  double score = 0.0;
  int at_risk = 0;
  bool defined = true;
  std::vector<std::string> warnings;
};

/// Inverse-probability-of-censoring-weighted dynamic Brier score BS(t, t').
BrierResult brier(const std::vector<EvalRecord>& records, const EvalConfig& config);

}  // namespace jointrait
