#pragma once

#include <vector>

namespace jointrait {

/// Classic (non-split) Gelman–Rubin potential scale reduction for m ≥ 2
/// chains of equal length n ≥ 2:
///
///   W = mean of within-chain sample variances
///   B = n/(m-1) Σ_j (mean_j - grand mean)²
///   V = (n-1)/n W + (m+1)/(m n) B
///   R̂ = sqrt(V / W)
///
/// Returns +∞ when W = 0 < B and 1 when both vanish. Throws
/// std::invalid_argument on ragged or too-short input.
double gelman_rubin(const std::vector<std::vector<double>>& chains);

}  // namespace jointrait
