#include "jointrait/posterior.hpp"

#include <cmath>
#include <limits>

#include "jointrait/error.hpp"
#include "jointrait/longitudinal.hpp"
#include "jointrait/survival.hpp"

namespace jointrait {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<std::string> assoc_labels(const ModelSpec& spec) {
  switch (spec.association) {
    case AssociationForm::shared_latent: return {"nu"};
    case AssociationForm::latent_and_slope: return {"nu[theta]", "nu[slope]"};
    case AssociationForm::random_effects: {
      std::vector<std::string> out;
      for (const auto& t : spec.design.random) out.push_back("nu[" + t.to_string() + "]");
      return out;
    }
  }
  return {};
}

}  // namespace

ParameterCodec::ParameterCodec(const ModelSpec& spec, bool fix_association)
    : spec_(spec), fix_association_(fix_association) {
  spec_.validate();
  auto add = [&](const std::string& name) {
    names_.push_back(name);
    return static_cast<int>(names_.size()) - 1;
  };
  for (const auto& o : spec_.outcomes) {
    OutcomeSlots slot{size(), 0};
    const std::string tag = "[" + o.name + "]";
    switch (o.kind) {
      case OutcomeKind::continuous:
        add("a" + tag);
        add("log_b" + tag);
        add("log_var_eps" + tag);
        columns_.insert(columns_.end(), {"a" + tag, "b" + tag, "sigma_eps" + tag});
        break;
      case OutcomeKind::binary:
        add("a" + tag);
        add("log_b" + tag);
        columns_.insert(columns_.end(), {"a" + tag, "b" + tag});
        break;
      case OutcomeKind::ordinal:
        if (!o.is_anchor) {
          add("a" + tag + "[1]");
          columns_.push_back("a" + tag + "[1]");
        }
        for (int l = 2; l <= o.n_thresholds(); ++l) {
          add("log_delta" + tag + "[" + std::to_string(l) + "]");
          columns_.push_back("a" + tag + "[" + std::to_string(l) + "]");
        }
        if (!o.is_anchor) {
          add("log_b" + tag);
          columns_.push_back("b" + tag);
        }
        break;
    }
    slot.size = size() - slot.offset;
    outcome_slots_.push_back(slot);
  }
  const auto& d = spec_.design;
  beta_ = size();
  for (const auto& t : d.fixed) add("beta[" + t.to_string() + "]");
  for (const auto& t : d.fixed) columns_.push_back("beta[" + t.to_string() + "]");
  for (const auto& t : d.random) columns_.push_back("sigma_u[" + t.to_string() + "]");
  for (int j = 0; j < d.q(); ++j)
    for (int k = j + 1; k < d.q(); ++k)
      columns_.push_back("rho[" + d.random[j].to_string() + "," + d.random[k].to_string() + "]");
  zeta_ = size();
  for (std::size_t r = 0; r < d.theta_knots.size(); ++r) {
    add("zeta[" + std::to_string(r + 1) + "]");
    columns_.push_back("zeta[" + std::to_string(r + 1) + "]");
  }
  if (!d.theta_knots.empty()) {
    log_var_zeta_ = add("log_var_zeta");
    columns_.push_back("sigma_zeta");
  }
  gamma_ = size();
  for (const auto& t : d.survival) {
    add("gamma[" + t.to_string() + "]");
    columns_.push_back("gamma[" + t.to_string() + "]");
  }
  const auto nu = assoc_labels(spec_);
  if (!fix_association_) {
    assoc_ = size();
    for (const auto& n : nu) add(n);
  }
  columns_.insert(columns_.end(), nu.begin(), nu.end());
  eta0_ = add("eta0");
  columns_.push_back("eta0");
  if (d.baseline_slope) {
    eta1_ = add("eta1");
    columns_.push_back("eta1");
  }
  const auto& hk = d.effective_hazard_knots();
  xi_ = size();
  for (std::size_t r = 0; r < hk.size(); ++r) {
    add("xi[" + std::to_string(r + 1) + "]");
    columns_.push_back("xi[" + std::to_string(r + 1) + "]");
  }
  if (!hk.empty()) {
    log_var_xi_ = add("log_var_xi");
    columns_.push_back("sigma_xi");
  }
  re_log_var_ = size();
  for (const auto& t : d.random) add("log_var_u[" + t.to_string() + "]");
  re_atanh_ = size();
  for (int j = 0; j < d.q(); ++j)
    for (int k = j + 1; k < d.q(); ++k)
      add("atanh_rho[" + d.random[j].to_string() + "," + d.random[k].to_string() + "]");
}

Eigen::VectorXd ParameterCodec::encode(const ParameterDraw& draw) const {
  check_dimensions(draw, spec_);
  Eigen::VectorXd x(size());
  for (int k = 0; k < spec_.n_outcomes(); ++k) {
    const auto& o = spec_.outcomes[k];
    int i = outcome_slots_[k].offset;
    const auto& a = draw.a[k];
    switch (o.kind) {
      case OutcomeKind::continuous:
        x(i++) = a[0];
        x(i++) = std::log(draw.b[k]);
        x(i++) = 2.0 * std::log(draw.sigma_eps[k]);
        break;
      case OutcomeKind::binary:
        x(i++) = a[0];
        x(i++) = std::log(draw.b[k]);
        break;
      case OutcomeKind::ordinal:
        if (!o.is_anchor) x(i++) = a[0];
        for (std::size_t l = 1; l < a.size(); ++l) x(i++) = std::log(a[l] - a[l - 1]);
        if (!o.is_anchor) x(i++) = std::log(draw.b[k]);
        break;
    }
  }
  const auto& d = spec_.design;
  for (int j = 0; j < d.p(); ++j) x(beta_ + j) = draw.beta[j];
  for (std::size_t r = 0; r < draw.zeta.size(); ++r) x(zeta_ + static_cast<int>(r)) = draw.zeta[r];
  if (log_var_zeta_ >= 0) x(log_var_zeta_) = 2.0 * std::log(draw.sigma_zeta);
  for (std::size_t j = 0; j < draw.gamma.size(); ++j) x(gamma_ + static_cast<int>(j)) = draw.gamma[j];
  if (assoc_ >= 0)
    for (std::size_t j = 0; j < draw.assoc.size(); ++j) x(assoc_ + static_cast<int>(j)) = draw.assoc[j];
  x(eta0_) = draw.eta0;
  if (eta1_ >= 0) x(eta1_) = draw.eta1;
  for (std::size_t r = 0; r < draw.xi.size(); ++r) x(xi_ + static_cast<int>(r)) = draw.xi[r];
  if (log_var_xi_ >= 0) x(log_var_xi_) = 2.0 * std::log(draw.sigma_xi);
  const int q = d.q();
  for (int j = 0; j < q; ++j) x(re_log_var_ + j) = 2.0 * std::log(draw.re_sd[j]);
  for (int c = 0; c < q * (q - 1) / 2; ++c) x(re_atanh_ + c) = std::atanh(draw.re_corr[c]);
  return x;
}

void ParameterCodec::decode_into(const Eigen::VectorXd& x, ParameterDraw& draw) const {
  for (int k = 0; k < spec_.n_outcomes(); ++k) {
    const auto& o = spec_.outcomes[k];
    int i = outcome_slots_[k].offset;
    auto& a = draw.a[k];
    switch (o.kind) {
      case OutcomeKind::continuous:
        a[0] = x(i++);
        draw.b[k] = std::exp(x(i++));
        draw.sigma_eps[k] = std::exp(0.5 * x(i++));
        break;
      case OutcomeKind::binary:
        a[0] = x(i++);
        draw.b[k] = std::exp(x(i++));
        break;
      case OutcomeKind::ordinal:
        a[0] = o.is_anchor ? 0.0 : x(i++);
        for (std::size_t l = 1; l < a.size(); ++l) a[l] = a[l - 1] + std::exp(x(i++));
        draw.b[k] = o.is_anchor ? 1.0 : std::exp(x(i++));
        break;
    }
  }
  const auto& d = spec_.design;
  for (int j = 0; j < d.p(); ++j) draw.beta[j] = x(beta_ + j);
  for (std::size_t r = 0; r < draw.zeta.size(); ++r) draw.zeta[r] = x(zeta_ + static_cast<int>(r));
  if (log_var_zeta_ >= 0) draw.sigma_zeta = std::exp(0.5 * x(log_var_zeta_));
  for (std::size_t j = 0; j < draw.gamma.size(); ++j) draw.gamma[j] = x(gamma_ + static_cast<int>(j));
  if (assoc_ >= 0)
    for (std::size_t j = 0; j < draw.assoc.size(); ++j) draw.assoc[j] = x(assoc_ + static_cast<int>(j));
  draw.eta0 = x(eta0_);
  if (eta1_ >= 0) draw.eta1 = x(eta1_);
  for (std::size_t r = 0; r < draw.xi.size(); ++r) draw.xi[r] = x(xi_ + static_cast<int>(r));
  if (log_var_xi_ >= 0) draw.sigma_xi = std::exp(0.5 * x(log_var_xi_));
  const int q = d.q();
  for (int j = 0; j < q; ++j) draw.re_sd[j] = std::exp(0.5 * x(re_log_var_ + j));
  for (int c = 0; c < q * (q - 1) / 2; ++c) draw.re_corr[c] = std::tanh(x(re_atanh_ + c));
}

double ParameterCodec::log_jacobian(const ParameterDraw& draw) const {
  double j = 0.0;
  for (int k = 0; k < spec_.n_outcomes(); ++k) {
    const auto& o = spec_.outcomes[k];
    const auto& a = draw.a[k];
    if (!(o.kind == OutcomeKind::ordinal && o.is_anchor)) j += std::log(draw.b[k]);
    if (o.kind == OutcomeKind::continuous) j += 2.0 * std::log(draw.sigma_eps[k]);
    if (o.kind == OutcomeKind::ordinal)
      for (std::size_t l = 1; l < a.size(); ++l) j += std::log(a[l] - a[l - 1]);
  }
  if (log_var_zeta_ >= 0) j += 2.0 * std::log(draw.sigma_zeta);
  if (log_var_xi_ >= 0) j += 2.0 * std::log(draw.sigma_xi);
  for (double s : draw.re_sd) j += 2.0 * std::log(s);
  for (double r : draw.re_corr) j += std::log1p(-r * r);
  return j;
}

ParameterCodec::ConstrainedGradient ParameterCodec::ConstrainedGradient::zeros(const ModelSpec& spec) {
  ConstrainedGradient g;
  const int K = spec.n_outcomes();
  g.a.resize(K);
  for (int k = 0; k < K; ++k) g.a[k].assign(spec.outcomes[k].n_thresholds(), 0.0);
  g.b.assign(K, 0.0);
  g.var_eps.assign(K, 0.0);
  const auto& d = spec.design;
  g.beta = Eigen::VectorXd::Zero(d.p());
  g.sigma = Eigen::MatrixXd::Zero(d.q(), d.q());
  g.zeta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.theta_knots.size()));
  g.gamma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.survival.size()));
  g.assoc = Eigen::VectorXd::Zero(spec.assoc_dim());
  g.xi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.effective_hazard_knots().size()));
  return g;
}

Eigen::VectorXd ParameterCodec::to_unconstrained_gradient(const ConstrainedGradient& g,
                                                          const ParameterDraw& draw) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
  for (int k = 0; k < spec_.n_outcomes(); ++k) {
    const auto& o = spec_.outcomes[k];
    int i = outcome_slots_[k].offset;
    const auto& a = draw.a[k];
    switch (o.kind) {
      case OutcomeKind::continuous: {
        out(i++) = g.a[k][0];
        out(i++) = draw.b[k] * g.b[k] + 1.0;
        const double v = draw.sigma_eps[k] * draw.sigma_eps[k];
        out(i++) = v * g.var_eps[k] + 1.0;
        break;
      }
      case OutcomeKind::binary:
        out(i++) = g.a[k][0];
        out(i++) = draw.b[k] * g.b[k] + 1.0;
        break;
      case OutcomeKind::ordinal: {
        const int n = static_cast<int>(a.size());
        // a_l = a_1 + Σ_{m ≤ l} Δ_m, so ∂/∂Δ_m collects every threshold at or above m.
        std::vector<double> tail(n + 1, 0.0);
        for (int l = n - 1; l >= 0; --l) tail[l] = tail[l + 1] + g.a[k][l];
        if (!o.is_anchor) out(i++) = tail[0];
        for (int m = 1; m < n; ++m) out(i++) = (a[m] - a[m - 1]) * tail[m] + 1.0;
        if (!o.is_anchor) out(i++) = draw.b[k] * g.b[k] + 1.0;
        break;
      }
    }
  }
  const auto& d = spec_.design;
  out.segment(beta_, d.p()) = g.beta;
  out.segment(zeta_, g.zeta.size()) = g.zeta;
  if (log_var_zeta_ >= 0) out(log_var_zeta_) = draw.sigma_zeta * draw.sigma_zeta * g.var_zeta + 1.0;
  out.segment(gamma_, g.gamma.size()) = g.gamma;
  if (assoc_ >= 0) out.segment(assoc_, g.assoc.size()) = g.assoc;
  out(eta0_) = g.eta0;
  if (eta1_ >= 0) out(eta1_) = g.eta1;
  out.segment(xi_, g.xi.size()) = g.xi;
  if (log_var_xi_ >= 0) out(log_var_xi_) = draw.sigma_xi * draw.sigma_xi * g.var_xi + 1.0;

  // Σ_jj = v_j, Σ_jk = ρ_jk σ_j σ_k; G treats every entry as a free variable.
  const int q = d.q();
  for (int j = 0; j < q; ++j) {
    const double sj = draw.re_sd[j];
    double dv = g.sigma(j, j);
    for (int k = 0; k < q; ++k) {
      if (k == j) continue;
      const double rho = draw.re_corr[corr_index(std::min(j, k), std::max(j, k), q)];
      dv += (g.sigma(j, k) + g.sigma(k, j)) * rho * draw.re_sd[k] / (2.0 * sj);
    }
    out(re_log_var_ + j) = sj * sj * dv + 1.0;
  }
  for (int j = 0; j < q; ++j)
    for (int k = j + 1; k < q; ++k) {
      const int c = corr_index(j, k, q);
      const double rho = draw.re_corr[c];
      const double drho = (g.sigma(j, k) + g.sigma(k, j)) * draw.re_sd[j] * draw.re_sd[k];
      out(re_atanh_ + c) = (1.0 - rho * rho) * drho - 2.0 * rho;
    }
  return out;
}

std::vector<double> ParameterCodec::flatten(const ParameterDraw& draw) const {
  std::vector<double> v;
  v.reserve(columns_.size());
  for (int k = 0; k < spec_.n_outcomes(); ++k) {
    const auto& o = spec_.outcomes[k];
    const auto& a = draw.a[k];
    switch (o.kind) {
      case OutcomeKind::continuous: v.insert(v.end(), {a[0], draw.b[k], draw.sigma_eps[k]}); break;
      case OutcomeKind::binary: v.insert(v.end(), {a[0], draw.b[k]}); break;
      case OutcomeKind::ordinal:
        for (std::size_t l = o.is_anchor ? 1 : 0; l < a.size(); ++l) v.push_back(a[l]);
        if (!o.is_anchor) v.push_back(draw.b[k]);
        break;
    }
  }
  v.insert(v.end(), draw.beta.begin(), draw.beta.end());
  v.insert(v.end(), draw.re_sd.begin(), draw.re_sd.end());
  v.insert(v.end(), draw.re_corr.begin(), draw.re_corr.end());
  v.insert(v.end(), draw.zeta.begin(), draw.zeta.end());
  if (log_var_zeta_ >= 0) v.push_back(draw.sigma_zeta);
  v.insert(v.end(), draw.gamma.begin(), draw.gamma.end());
  v.insert(v.end(), draw.assoc.begin(), draw.assoc.end());
  v.push_back(draw.eta0);
  if (eta1_ >= 0) v.push_back(draw.eta1);
  v.insert(v.end(), draw.xi.begin(), draw.xi.end());
  if (log_var_xi_ >= 0) v.push_back(draw.sigma_xi);
  return v;
}

ParameterDraw ParameterCodec::unflatten(std::span<const double> values) const {
  if (values.size() != columns_.size()) throw ConfigError("parameter row has the wrong number of columns");
  ParameterDraw d = ParameterDraw::zeros(spec_);
  std::size_t i = 0;
  auto next = [&] { return values[i++]; };
  auto fill = [&](std::vector<double>& target) {
    for (double& x : target) x = next();
  };
  for (int k = 0; k < spec_.n_outcomes(); ++k) {
    const auto& o = spec_.outcomes[k];
    auto& a = d.a[k];
    switch (o.kind) {
      case OutcomeKind::continuous:
        a[0] = next();
        d.b[k] = next();
        d.sigma_eps[k] = next();
        break;
      case OutcomeKind::binary:
        a[0] = next();
        d.b[k] = next();
        break;
      case OutcomeKind::ordinal:
        if (o.is_anchor) a[0] = 0.0;
        for (std::size_t l = o.is_anchor ? 1 : 0; l < a.size(); ++l) a[l] = next();
        d.b[k] = o.is_anchor ? 1.0 : next();
        break;
    }
  }
  fill(d.beta);
  fill(d.re_sd);
  fill(d.re_corr);
  fill(d.zeta);
  if (log_var_zeta_ >= 0) d.sigma_zeta = next();
  fill(d.gamma);
  fill(d.assoc);
  d.eta0 = next();
  if (eta1_ >= 0) d.eta1 = next();
  fill(d.xi);
  if (log_var_xi_ >= 0) d.sigma_xi = next();
  return d;
}

double subject_longitudinal_loglik(const ModelSpec& spec, const PreparedSubject& subject, const ParameterDraw& draw,
                                   const Eigen::VectorXd& u) {
  const auto lt = LinearTrait::from(subject.rows, draw.beta, u);
  const auto& knots = spec.design.theta_knots;
  double total = 0.0;
  int last_visit = -1;
  double theta = 0.0;
  for (const auto& obs : subject.observations) {
    if (obs.visit != last_visit) {
      theta = lt.at(subject.visit_times[obs.visit], draw.zeta, knots);
      last_visit = obs.visit;
    }
    const int k = obs.outcome;
    total += observation_log_prob(spec.outcomes[k], draw.a[k], draw.b[k], draw.sigma_eps[k], theta, obs.value);
  }
  return total;
}

double subject_survival_loglik(const ModelSpec& spec, const PreparedSubject& subject, const ParameterDraw& draw,
                               const Eigen::VectorXd& u) {
  const HazardModel model(spec, subject.rows, draw, u);
  double v = -model.cumulative(0.0, subject.observed_time);
  if (subject.event) v += model.log_hazard(subject.observed_time);
  return v;
}

double spline_penalty(const ModelSpec& spec, const ParameterDraw& draw) {
  double v = 0.0;
  if (!spec.design.theta_knots.empty()) {
    double ss = 0.0;
    for (double z : draw.zeta) ss += z * z;
    v += -ss / (draw.sigma_zeta * draw.sigma_zeta) - static_cast<double>(draw.zeta.size()) * std::log(draw.sigma_zeta);
  }
  if (!spec.design.effective_hazard_knots().empty()) {
    double ss = 0.0;
    for (double x : draw.xi) ss += x * x;
    v += -ss / (draw.sigma_xi * draw.sigma_xi) - static_cast<double>(draw.xi.size()) * std::log(draw.sigma_xi);
  }
  return v;
}

double log_prior(const ModelSpec& spec, const ParameterDraw& draw, const PriorSpec& priors) {
  double lp = 0.0;
  for (int k = 0; k < spec.n_outcomes(); ++k) {
    const auto& o = spec.outcomes[k];
    const auto& a = draw.a[k];
    switch (o.kind) {
      case OutcomeKind::continuous:
        lp += priors.log_location(a[0]) + priors.log_loading(draw.b[k]) +
              priors.log_variance(draw.sigma_eps[k] * draw.sigma_eps[k]);
        break;
      case OutcomeKind::binary: lp += priors.log_location(a[0]) + priors.log_loading(draw.b[k]); break;
      case OutcomeKind::ordinal:
        if (!o.is_anchor) lp += priors.log_location(a[0]) + priors.log_loading(draw.b[k]);
        for (std::size_t l = 1; l < a.size(); ++l) lp += priors.log_increment(a[l] - a[l - 1]);
        break;
    }
  }
  for (double x : draw.beta) lp += priors.log_location(x);
  for (double x : draw.gamma) lp += priors.log_location(x);
  for (double x : draw.assoc) lp += priors.log_location(x);
  lp += priors.log_location(draw.eta0);
  if (spec.design.baseline_slope) lp += priors.log_location(draw.eta1);
  if (!spec.design.theta_knots.empty()) lp += priors.log_variance(draw.sigma_zeta * draw.sigma_zeta);
  if (!spec.design.effective_hazard_knots().empty()) lp += priors.log_variance(draw.sigma_xi * draw.sigma_xi);
  for (double s : draw.re_sd) lp += priors.log_variance(s * s);
  for (double r : draw.re_corr) lp += priors.log_correlation(r);
  return lp;
}

double random_effects_log_density(const Eigen::MatrixXd& sigma, const std::vector<Eigen::VectorXd>& effects) {
  const auto q = sigma.rows();
  if (q == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) return kNegInf;
  const Eigen::MatrixXd l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const double norm = -0.5 * (static_cast<double>(q) * kLog2Pi + log_det);
  double total = 0.0;
  for (const auto& u : effects) {
    const Eigen::VectorXd z = llt.matrixL().solve(u);
    total += norm - 0.5 * z.squaredNorm();
  }
  return total;
}

double log_posterior(const PreparedData& data, const ParameterDraw& draw, const std::vector<Eigen::VectorXd>& effects,
                     const PriorSpec& priors) {
  const auto& spec = data.spec;
  if (!invariant_violation(draw, spec).empty()) return kNegInf;
  if (effects.size() != data.subjects.size()) throw ConfigError("one effects vector per subject is required");
  double lp = log_prior(spec, draw, priors);
  if (!std::isfinite(lp)) return kNegInf;
  lp += spline_penalty(spec, draw);
  const double re = random_effects_log_density(draw.covariance(), effects);
  if (!std::isfinite(re)) return kNegInf;
  lp += re;
  try {
    for (int i = 0; i < data.n(); ++i) {
      lp += subject_longitudinal_loglik(spec, data.subjects[i], draw, effects[i]);
      lp += subject_survival_loglik(spec, data.subjects[i], draw, effects[i]);
    }
  } catch (const HazardOverflow&) {
    return kNegInf;
  }
  return std::isnan(lp) ? kNegInf : lp;
}

Eigen::VectorXd stack_unconstrained(const ParameterCodec& codec, const ParameterDraw& draw,
                                    const std::vector<Eigen::VectorXd>& effects) {
  const int q = codec.spec().design.q();
  Eigen::VectorXd x(codec.size() + q * static_cast<int>(effects.size()));
  x.head(codec.size()) = codec.encode(draw);
  for (std::size_t i = 0; i < effects.size(); ++i) x.segment(codec.size() + q * static_cast<int>(i), q) = effects[i];
  return x;
}

double log_posterior_unconstrained(const PreparedData& data, const ParameterCodec& codec, const ParameterDraw& base,
                                   const Eigen::VectorXd& x, const PriorSpec& priors) {
  ParameterDraw draw = base;
  codec.decode_into(x.head(codec.size()), draw);
  const int q = data.spec.design.q();
  std::vector<Eigen::VectorXd> effects(data.subjects.size());
  for (int i = 0; i < data.n(); ++i) effects[i] = x.segment(codec.size() + q * i, q);
  const double lp = log_posterior(data, draw, effects, priors);
  if (!std::isfinite(lp)) return lp;
  return lp + codec.log_jacobian(draw);
}

namespace {

using Gradient = ParameterCodec::ConstrainedGradient;

// ∂ log h(s)/∂p is affine in s on any interval free of knots: c0 + c1 s.
// Adds w0 c0 + w1 c1 to every parameter's gradient. `active_theta[r]` and
// `active_hazard[r]` mark the knots whose hinge is switched on.
struct HazardGradientContext {
  const ModelSpec& spec;
  const PreparedSubject& subject;
  const ParameterDraw& draw;
  const Eigen::VectorXd& u;
  LinearTrait trait;
  double nu_theta = 0.0;
  double nu_slope = 0.0;

  void add(double w0, double w1, const std::vector<bool>& active_theta, const std::vector<bool>& active_hazard,
           Gradient& g, Eigen::Ref<Eigen::VectorXd> gu) const {
    const auto& rows = subject.rows;
    const auto& d = spec.design;
    g.eta0 += w0;
    if (d.baseline_slope) g.eta1 += w1;
    for (Eigen::Index j = 0; j < rows.w.size(); ++j) g.gamma(j) += w0 * rows.w(j);
    const auto& hk = d.effective_hazard_knots();
    for (std::size_t r = 0; r < hk.size(); ++r)
      if (active_hazard[r]) g.xi(static_cast<Eigen::Index>(r)) += -w0 * hk[r] + w1;

    const auto& tk = d.theta_knots;
    double theta0 = trait.intercept, theta1 = trait.slope;
    for (std::size_t r = 0; r < tk.size(); ++r)
      if (active_theta[r]) {
        theta0 -= draw.zeta[r] * tk[r];
        theta1 += draw.zeta[r];
      }
    switch (spec.association) {
      case AssociationForm::shared_latent: g.assoc(0) += w0 * theta0 + w1 * theta1; break;
      case AssociationForm::latent_and_slope:
        g.assoc(0) += w0 * theta0 + w1 * theta1;
        g.assoc(1) += w0 * theta1;
        break;
      case AssociationForm::random_effects:
        for (Eigen::Index j = 0; j < u.size(); ++j) {
          g.assoc(j) += w0 * u(j);
          gu(j) += w0 * draw.assoc[j];
        }
        break;
    }
    if (nu_theta == 0.0 && nu_slope == 0.0) return;
    for (Eigen::Index j = 0; j < rows.x_const.size(); ++j)
      g.beta(j) += w0 * (nu_theta * rows.x_const(j) + nu_slope * rows.x_slope(j)) + w1 * nu_theta * rows.x_slope(j);
    for (Eigen::Index j = 0; j < rows.z_const.size(); ++j)
      gu(j) += w0 * (nu_theta * rows.z_const(j) + nu_slope * rows.z_slope(j)) + w1 * nu_theta * rows.z_slope(j);
    for (std::size_t r = 0; r < tk.size(); ++r)
      if (active_theta[r]) g.zeta(static_cast<Eigen::Index>(r)) += w0 * (-nu_theta * tk[r] + nu_slope) + w1 * nu_theta;
  }
};

// (z cosh z - sinh z) / z², odd in z.
double centred_moment_factor(double z) {
  if (std::abs(z) < 1e-3) {
    const double z2 = z * z;
    return z / 3.0 + z * z2 / 30.0;
  }
  return (z * std::cosh(z) - std::sinh(z)) / (z * z);
}

void accumulate_subject(const ModelSpec& spec, const PreparedSubject& s, const ParameterDraw& draw,
                        const Eigen::VectorXd& u, Gradient& g, Eigen::Ref<Eigen::VectorXd> gu) {
  const auto& d = spec.design;
  const auto& tk = d.theta_knots;
  const auto trait = LinearTrait::from(s.rows, draw.beta, u);

  for (const auto& obs : s.observations) {
    const double t = s.visit_times[obs.visit];
    const int k = obs.outcome;
    const double theta = trait.at(t, draw.zeta, tk);
    const auto term = observation_term(spec.outcomes[k], draw.a[k], draw.b[k], draw.sigma_eps[k], theta, obs.value);
    if (spec.outcomes[k].kind == OutcomeKind::ordinal) {
      if (term.a_lo_index >= 0) g.a[k][term.a_lo_index] += term.d_a_lo;
      if (term.a_hi_index >= 0) g.a[k][term.a_hi_index] += term.d_a_hi;
    } else {
      g.a[k][0] += term.d_a;
    }
    g.b[k] += term.d_b;
    g.var_eps[k] += term.d_var;
    for (Eigen::Index j = 0; j < s.rows.x_const.size(); ++j)
      g.beta(j) += term.d_theta * (s.rows.x_const(j) + s.rows.x_slope(j) * t);
    for (Eigen::Index j = 0; j < s.rows.z_const.size(); ++j)
      gu(j) += term.d_theta * (s.rows.z_const(j) + s.rows.z_slope(j) * t);
    for (std::size_t r = 0; r < tk.size(); ++r)
      if (t > tk[r]) g.zeta(static_cast<Eigen::Index>(r)) += term.d_theta * (t - tk[r]);
  }

  HazardGradientContext ctx{spec, s, draw, u, trait};
  if (spec.association != AssociationForm::random_effects) ctx.nu_theta = draw.assoc[0];
  if (spec.association == AssociationForm::latent_and_slope) ctx.nu_slope = draw.assoc[1];
  const auto& hk = d.effective_hazard_knots();
  std::vector<bool> at_theta(tk.size()), at_hazard(hk.size());

  const double T = s.observed_time;
  if (s.event) {
    for (std::size_t r = 0; r < tk.size(); ++r) at_theta[r] = T > tk[r];
    for (std::size_t r = 0; r < hk.size(); ++r) at_hazard[r] = T > hk[r];
    ctx.add(1.0, T, at_theta, at_hazard, g, gu);
  }

  const HazardModel model(spec, s.rows, draw, u);
  for (const auto& seg : model.segments(0.0, T)) {
    const double i0 = segment_integral(seg);
    const double h = 0.5 * (seg.t_hi - seg.t_lo);
    const double mid = seg.t_lo + h;
    const double i1 =
        mid * i0 + std::exp(seg.intercept + seg.slope * mid) * 2.0 * h * h * centred_moment_factor(seg.slope * h);
    for (std::size_t r = 0; r < tk.size(); ++r) at_theta[r] = tk[r] <= seg.t_lo;
    for (std::size_t r = 0; r < hk.size(); ++r) at_hazard[r] = hk[r] <= seg.t_lo;
    ctx.add(-i0, -i1, at_theta, at_hazard, g, gu);
  }
}

}  // namespace

Eigen::VectorXd grad_log_posterior(const PreparedData& data, const ParameterCodec& codec, const ParameterDraw& draw,
                                   const std::vector<Eigen::VectorXd>& effects, const PriorSpec& priors) {
  const auto& spec = data.spec;
  const auto& d = spec.design;
  const int q = d.q();
  const int n = data.n();
  auto g = Gradient::zeros(spec);
  Eigen::VectorXd gu = Eigen::VectorXd::Zero(q * n);

  for (int i = 0; i < n; ++i) accumulate_subject(spec, data.subjects[i], draw, effects[i], g, gu.segment(q * i, q));

  // Random effects: ∂/∂u_i = -Σ⁻¹u_i, ∂/∂Σ = ½(Σ⁻¹ S Σ⁻¹ - n Σ⁻¹).
  if (q > 0) {
    const Eigen::MatrixXd sigma = draw.covariance();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(q, q);
    for (int i = 0; i < n; ++i) {
      gu.segment(q * i, q) -= inv * effects[i];
      scatter += effects[i] * effects[i].transpose();
    }
    g.sigma += 0.5 * (inv * scatter * inv - static_cast<double>(n) * inv);
    for (int j = 0; j < q; ++j) {
      const double v = draw.re_sd[j] * draw.re_sd[j];
      g.sigma(j, j) += -(priors.ig_shape + 1.0) / v + priors.ig_scale / (v * v);
    }
  }

  // Priors and penalties on the constrained scale.
  const double loc = 1.0 / priors.location_variance;
  for (int k = 0; k < spec.n_outcomes(); ++k) {
    const auto& o = spec.outcomes[k];
    if (!(o.kind == OutcomeKind::ordinal && o.is_anchor)) g.a[k][0] -= draw.a[k][0] * loc;
    if (o.kind == OutcomeKind::continuous) {
      const double v = draw.sigma_eps[k] * draw.sigma_eps[k];
      g.var_eps[k] += -(priors.ig_shape + 1.0) / v + priors.ig_scale / (v * v);
    }
  }
  for (int j = 0; j < d.p(); ++j) g.beta(j) -= draw.beta[j] * loc;
  for (Eigen::Index j = 0; j < g.gamma.size(); ++j) g.gamma(j) -= draw.gamma[j] * loc;
  for (Eigen::Index j = 0; j < g.assoc.size(); ++j) g.assoc(j) -= draw.assoc[j] * loc;
  g.eta0 -= draw.eta0 * loc;
  if (d.baseline_slope) g.eta1 -= draw.eta1 * loc;
  auto penalty = [&](const std::vector<double>& coef, double sd, Eigen::VectorXd& gc, double& gv) {
    if (coef.empty()) return;
    const double v = sd * sd;
    double ss = 0.0;
    for (std::size_t r = 0; r < coef.size(); ++r) {
      gc(static_cast<Eigen::Index>(r)) -= 2.0 * coef[r] / v;
      ss += coef[r] * coef[r];
    }
    gv += ss / (v * v) - 0.5 * static_cast<double>(coef.size()) / v;
    gv += -(priors.ig_shape + 1.0) / v + priors.ig_scale / (v * v);
  };
  penalty(draw.zeta, draw.sigma_zeta, g.zeta, g.var_zeta);
  penalty(draw.xi, draw.sigma_xi, g.xi, g.var_xi);

  Eigen::VectorXd out(codec.size() + q * n);
  out.head(codec.size()) = codec.to_unconstrained_gradient(g, draw);
  // Half-normal increment prior, applied directly to log Δ.
  for (int k = 0; k < spec.n_outcomes(); ++k) {
    const auto& o = spec.outcomes[k];
    if (o.kind != OutcomeKind::ordinal) continue;
    int i = codec.outcome_slots()[k].offset + (o.is_anchor ? 0 : 1);
    const auto& a = draw.a[k];
    for (std::size_t l = 1; l < a.size(); ++l, ++i) {
      const double delta = a[l] - a[l - 1];
      out(i) -= delta * delta / priors.increment_variance;
    }
  }
  out.tail(q * n) = gu;
  return out;
}

}  // namespace jointrait
