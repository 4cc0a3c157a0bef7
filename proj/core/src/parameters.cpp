#include "jointrait/parameters.hpp"

#include <cmath>

#include "jointrait/error.hpp"

namespace jointrait {

int corr_index(int j, int k, int q) {
  // Row-major upper triangle: row j holds q-1-j entries.
  return j * (2 * q - j - 1) / 2 + (k - j - 1);
}

Eigen::MatrixXd ParameterDraw::covariance() const {
  const int q = static_cast<int>(re_sd.size());
  Eigen::MatrixXd sigma(q, q);
  for (int j = 0; j < q; ++j) {
    sigma(j, j) = re_sd[j] * re_sd[j];
    for (int k = j + 1; k < q; ++k) {
      const double c = re_corr[corr_index(j, k, q)] * re_sd[j] * re_sd[k];
      sigma(j, k) = c;
      sigma(k, j) = c;
    }
  }
  return sigma;
}

ParameterDraw ParameterDraw::zeros(const ModelSpec& spec) {
  ParameterDraw d;
  const int K = spec.n_outcomes();
  d.a.resize(K);
  d.b.assign(K, 1.0);
  d.sigma_eps.assign(K, 1.0);
  for (int k = 0; k < K; ++k) {
    const int n = spec.outcomes[k].n_thresholds();
    d.a[k].resize(n);
    for (int l = 0; l < n; ++l) d.a[k][l] = spec.outcomes[k].kind == OutcomeKind::ordinal ? l : 0.0;
  }
  const auto& design = spec.design;
  d.beta.assign(design.p(), 0.0);
  d.re_sd.assign(design.q(), 1.0);
  d.re_corr.assign(design.q() * (design.q() - 1) / 2, 0.0);
  d.zeta.assign(design.theta_knots.size(), 0.0);
  d.gamma.assign(design.survival.size(), 0.0);
  d.assoc.assign(spec.assoc_dim(), 0.0);
  d.xi.assign(design.effective_hazard_knots().size(), 0.0);
  return d;
}

void check_dimensions(const ParameterDraw& draw, const ModelSpec& spec) {
  auto fail = [](const std::string& what) { throw ConfigError("parameter draw dimension mismatch: " + what); };
  const int K = spec.n_outcomes();
  if (static_cast<int>(draw.a.size()) != K || static_cast<int>(draw.b.size()) != K ||
      static_cast<int>(draw.sigma_eps.size()) != K)
    fail("outcomes");
  for (int k = 0; k < K; ++k)
    if (static_cast<int>(draw.a[k].size()) != spec.outcomes[k].n_thresholds()) fail("thresholds of " + spec.outcomes[k].name);
  const auto& design = spec.design;
  const int q = design.q();
  if (static_cast<int>(draw.beta.size()) != design.p()) fail("beta");
  if (static_cast<int>(draw.re_sd.size()) != q) fail("random-effect scales");
  if (static_cast<int>(draw.re_corr.size()) != q * (q - 1) / 2) fail("random-effect correlations");
  if (draw.zeta.size() != design.theta_knots.size()) fail("zeta");
  if (draw.gamma.size() != design.survival.size()) fail("gamma");
  if (static_cast<int>(draw.assoc.size()) != spec.assoc_dim()) fail("association");
  if (draw.xi.size() != design.effective_hazard_knots().size()) fail("xi");
}

std::string invariant_violation(const ParameterDraw& draw, const ModelSpec& spec) {
  try {
    check_dimensions(draw, spec);
  } catch (const ConfigError& e) {
    return e.what();
  }
  auto finite = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  for (int k = 0; k < spec.n_outcomes(); ++k) {
    const auto& o = spec.outcomes[k];
    const auto& a = draw.a[k];
    if (!finite(a) || !std::isfinite(draw.b[k])) return "non-finite measurement parameter for " + o.name;
    if (!(draw.b[k] > 0.0)) return "loading of " + o.name + " is not positive";
    for (std::size_t l = 1; l < a.size(); ++l)
      if (!(a[l] > a[l - 1])) return "thresholds of " + o.name + " are not strictly increasing";
    if (o.is_anchor && (a[0] != 0.0 || draw.b[k] != 1.0)) return "anchor constraint violated for " + o.name;
    if (o.kind == OutcomeKind::continuous && !(draw.sigma_eps[k] > 0.0 && std::isfinite(draw.sigma_eps[k])))
      return "residual scale of " + o.name + " is not positive";
  }
  if (!finite(draw.beta) || !finite(draw.zeta) || !finite(draw.gamma) || !finite(draw.assoc) || !finite(draw.xi) ||
      !std::isfinite(draw.eta0) || !std::isfinite(draw.eta1))
    return "non-finite regression parameter";
  for (double s : draw.re_sd)
    if (!(s > 0.0) || !std::isfinite(s)) return "random-effect scale is not positive";
  for (double r : draw.re_corr)
    if (!(r > -1.0 && r < 1.0)) return "correlation outside (-1, 1)";
  if (!(draw.sigma_zeta > 0.0) || !std::isfinite(draw.sigma_zeta)) return "sigma_zeta is not positive";
  if (!(draw.sigma_xi > 0.0) || !std::isfinite(draw.sigma_xi)) return "sigma_xi is not positive";
  if (spec.design.q() > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(draw.covariance());
    if (llt.info() != Eigen::Success) return "random-effects covariance is not positive definite";
  }
  return {};
}

}  // namespace jointrait
