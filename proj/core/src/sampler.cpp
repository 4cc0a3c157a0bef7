#include "jointrait/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

#include "jointrait/diagnostics.hpp"
#include "jointrait/error.hpp"
#include "jointrait/longitudinal.hpp"
#include "jointrait/posterior.hpp"
#include "jointrait/prepared.hpp"
#include "jointrait/stats.hpp"
#include "jointrait/survival.hpp"

namespace jointrait {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Outcome blocks only touch their own observations at cached θ, so extra
// steps are cheap; thresholds otherwise lag the rest of the sweep.
constexpr int kOutcomeRepeats = 5;
constexpr double kLog2Pi = 1.8378770664093454836;

// Asymptotically optimal random-walk acceptance rates by block dimension.
double acceptance_target(int dim) {
  static constexpr double table[] = {0.44, 0.44, 0.35, 0.31, 0.28};
  return dim < 5 ? table[dim] : 0.234;
}

// Random-walk proposal for one block. During burn-in the proposal covariance
// is refreshed every `window` iterations from the second half of the block's
// history so far, and its scale follows a Robbins-Monro recursion towards the
// target acceptance rate. Both freeze once burn-in ends.
class Adapter {
 public:
  Adapter() = default;
  explicit Adapter(int dim) : dim_(dim), target_(acceptance_target(dim)) {
    log_scale_ = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
    chol_ = Eigen::MatrixXd::Identity(dim, dim);
  }

  int dim() const { return dim_; }
  bool ready() const { return ready_; }

  void set_covariance(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) chol_ = llt.matrixL();
    ready_ = true;
  }

  Eigen::VectorXd step(Rng& rng) const {
    std::normal_distribution<double> n01;
    Eigen::VectorXd z(dim_);
    for (int j = 0; j < dim_; ++j) z(j) = n01(rng);
    return std::exp(log_scale_) * (chol_ * z);
  }

  void record(bool accepted, const Eigen::VectorXd& state, int iteration, bool adapting, int window) {
    if (!adapting) {
      ++tries_;
      if (accepted) ++accepts_;
      if (!history_.empty()) std::vector<Eigen::VectorXd>().swap(history_);
      return;
    }
    history_.push_back(state);
    ++adapt_steps_;
    const double gain = 1.0 / std::pow(static_cast<double>(adapt_steps_), 0.6);
    log_scale_ += gain * ((accepted ? 1.0 : 0.0) - target_);
    log_scale_ = std::clamp(log_scale_, -30.0, 10.0);
    if ((iteration + 1) % window == 0) refresh();
  }

  double acceptance() const { return tries_ == 0 ? 0.0 : static_cast<double>(accepts_) / static_cast<double>(tries_); }
  long tries() const { return tries_; }
  long accepts() const { return accepts_; }

 private:
  void refresh() {
    const std::size_t total = history_.size();
    const std::size_t start = total / 2;
    const std::size_t count = total - start;
    if (count < static_cast<std::size_t>(std::max(2 * dim_ + 2, 10))) return;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
    for (std::size_t s = start; s < total; ++s) m += history_[s];
    m /= static_cast<double>(count);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim_, dim_);
    for (std::size_t s = start; s < total; ++s) {
      const Eigen::VectorXd d = history_[s] - m;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(count - 1);
    const double ridge = 1e-10 * (cov.trace() / dim_) + 1e-12;
    cov.diagonal().array() += ridge;
    if (cov.diagonal().maxCoeff() <= 1e-11) return;  // never moved; keep the old shape
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) return;
    chol_ = llt.matrixL();
  }

  int dim_ = 0;
  double target_ = 0.44;
  double log_scale_ = 0.0;
  Eigen::MatrixXd chol_;
  bool ready_ = false;
  std::vector<Eigen::VectorXd> history_;
  long adapt_steps_ = 0;
  long tries_ = 0;
  long accepts_ = 0;
};

// Proposal covariance from the curvature of `f` at `x`: the inverse of the
// negative finite-difference Hessian when it is positive definite, otherwise a
// diagonal fallback.
Eigen::MatrixXd curvature_covariance(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
  const int d = static_cast<int>(x.size());
  const double h = 1e-3;
  const double f0 = f(x);
  Eigen::MatrixXd H(d, d);
  bool ok = std::isfinite(f0);
  Eigen::VectorXd xp = x;
  for (int i = 0; i < d && ok; ++i) {
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    ok = std::isfinite(H(i, i));
    for (int j = 0; j < i && ok; ++j) {
      double v[4];
      const int si[4] = {1, 1, -1, -1}, sj[4] = {1, -1, 1, -1};
      for (int c = 0; c < 4; ++c) {
        xp(i) = x(i) + si[c] * h;
        xp(j) = x(j) + sj[c] * h;
        v[c] = f(xp);
      }
      xp(i) = x(i);
      xp(j) = x(j);
      H(i, j) = H(j, i) = (v[0] - v[1] - v[2] + v[3]) / (4.0 * h * h);
      ok = std::isfinite(H(i, j));
    }
  }
  if (ok) {
    const Eigen::MatrixXd neg = -H;
    Eigen::LLT<Eigen::MatrixXd> llt(neg);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
      if (cov.allFinite() && cov.diagonal().maxCoeff() < 1e6) return cov;
    }
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const double c = ok ? -H(i, i) : 0.0;
    cov(i, i) = c > 1e-2 ? 1.0 / c : 0.1;
  }
  return cov;
}

struct ChainResult {
  std::vector<ParameterDraw> draws;
  std::vector<double> effects;
  std::map<std::string, std::pair<long, long>> acceptance;  // block -> (accepts, tries)
};

class Chain {
 public:
  Chain(const PreparedData& data, const ParameterCodec& codec, const PriorSpec& priors, const ChainConfig& config,
        int index)
      : data_(data),
        spec_(data.spec),
        codec_(codec),
        priors_(priors),
        config_(config),
        index_(index),
        rng_(make_rng(config.seed, static_cast<std::uint64_t>(index))) {
    n_ = data.n();
    q_ = spec_.design.q();
    K_ = spec_.n_outcomes();
    visit_offset_.resize(n_ + 1, 0);
    for (int i = 0; i < n_; ++i)
      visit_offset_[i + 1] = visit_offset_[i] + static_cast<int>(data.subjects[i].visit_times.size());
    theta_.assign(visit_offset_[n_], 0.0);
    ly_.assign(static_cast<std::size_t>(n_) * K_, 0.0);
    ls_.assign(n_, 0.0);
    u_.assign(n_, Eigen::VectorXd::Zero(q_));
    setup_shift();
    for (int k = 0; k < K_; ++k)
      if (spec_.outcomes[k].is_anchor) anchor_ = k;
    for (int j = 0; j < spec_.design.p(); ++j)
      if (spec_.design.fixed[j].covariate.empty() && !spec_.design.fixed[j].times_time) intercept_ = j;
  }

  ChainResult run(const ProgressFn& progress) {
    initialize();
    ChainResult result;
    const int n_keep = (config_.n_iter - config_.n_burnin + config_.thin - 1) / config_.thin;
    result.draws.reserve(n_keep);
    result.effects.reserve(static_cast<std::size_t>(n_keep) * n_ * q_);
    for (int it = 0; it < config_.n_iter; ++it) {
      const bool adapting = it < config_.n_burnin;
      iterate(it, adapting);
      if (!adapting && (it - config_.n_burnin) % config_.thin == 0) {
        result.draws.push_back(draw_);
        for (int i = 0; i < n_; ++i)
          for (int j = 0; j < q_; ++j) result.effects.push_back(u_[i](j));
      }
      if (progress) progress(index_, it + 1);
    }
    auto tally = [&](const std::string& name, const Adapter& a) {
      auto& slot = result.acceptance[name];
      slot.first += a.accepts();
      slot.second += a.tries();
    };
    for (int k = 0; k < K_; ++k)
      if (spec_.outcomes[k].kind != OutcomeKind::continuous) tally("outcome[" + spec_.outcomes[k].name + "]", outcome_[k]);
    tally("beta", beta_);
    if (zeta_.dim() > 0) tally("zeta", zeta_);
    tally("survival", survival_);
    if (xi_.dim() > 0) tally("xi", xi_);
    if (q_ > 0) {
      for (const auto& a : subject_) tally("u", a);
      tally("sigma_u", sigma_);
      if (!shift_terms_.empty() && spec_.association == AssociationForm::random_effects)
        result.acceptance["shift"] = {shift_accepts_, shift_tries_};
    }
    if (anchor_ >= 0) {
      if (intercept_ >= 0) result.acceptance["trait_location"] = {location_step_.accepts, location_step_.tries};
      result.acceptance["trait_scale"] = {scale_step_.accepts, scale_step_.tries};
    }
    return result;
  }

 private:
  // ---- likelihood caches -------------------------------------------------

  // Recomputes θ, per-outcome log-likelihood and survival log-likelihood of
  // subject i into the given buffers. False when the hazard overflows.
  bool evaluate_subject(int i, const ParameterDraw& d, const Eigen::VectorXd& u, double* theta, double* ly,
                        double& ls, bool with_survival = true) const {
    const auto& s = data_.subjects[i];
    const auto& knots = spec_.design.theta_knots;
    const auto lt = LinearTrait::from(s.rows, d.beta, u);
    for (std::size_t j = 0; j < s.visit_times.size(); ++j) theta[j] = lt.at(s.visit_times[j], d.zeta, knots);
    std::fill(ly, ly + K_, 0.0);
    for (const auto& obs : s.observations) {
      const int k = obs.outcome;
      ly[k] += observation_log_prob(spec_.outcomes[k], d.a[k], d.b[k], d.sigma_eps[k], theta[obs.visit], obs.value);
    }
    if (!with_survival) return true;
    try {
      ls = subject_survival_loglik(spec_, s, d, u);
    } catch (const HazardOverflow&) {
      return false;
    }
    return std::isfinite(ls);
  }

  double survival_only(int i, const ParameterDraw& d, const Eigen::VectorXd& u) const {
    try {
      return subject_survival_loglik(spec_, data_.subjects[i], d, u);
    } catch (const HazardOverflow&) {
      return kNegInf;
    }
  }

  double parameter_terms(const ParameterDraw& d) const {
    const double lp = log_prior(spec_, d, priors_);
    if (!std::isfinite(lp)) return kNegInf;
    return lp + spline_penalty(spec_, d) + codec_.log_jacobian(d);
  }

  double total_ly() const {
    double s = 0.0;
    for (double v : ly_) s += v;
    return s;
  }
  double total_ls() const {
    double s = 0.0;
    for (double v : ls_) s += v;
    return s;
  }

  void refresh_all() {
    for (int i = 0; i < n_; ++i) {
      if (!evaluate_subject(i, draw_, u_[i], &theta_[visit_offset_[i]], &ly_[static_cast<std::size_t>(i) * K_], ls_[i]))
        throw ConfigError("initial state has an overflowing hazard");
    }
  }

  void refresh_sigma() {
    if (q_ == 0) return;
    Eigen::LLT<Eigen::MatrixXd> llt(draw_.covariance());
    sigma_chol_ = llt.matrixL();
    sigma_log_norm_ = -0.5 * (q_ * kLog2Pi) - sigma_chol_.diagonal().array().log().sum();
  }

  double re_density(const Eigen::VectorXd& u) const {
    if (q_ == 0) return 0.0;
    const Eigen::VectorXd z = sigma_chol_.triangularView<Eigen::Lower>().solve(u);
    return sigma_log_norm_ - 0.5 * z.squaredNorm();
  }

  // ---- initialization ----------------------------------------------------

  void initialize() {
    draw_ = ParameterDraw::zeros(spec_);
    Eigen::VectorXd x = codec_.encode(draw_);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    // Coefficients of covariate columns are jittered by ±1 on the linear
    // predictor scale, i.e. divided by the column's root mean square.
    std::vector<double> scale(codec_.size(), 1.0);
    auto rms = [&](auto column) {
      double ss = 0.0;
      for (const auto& s : data_.subjects) ss += column(s) * column(s);
      return n_ > 0 ? std::sqrt(ss / n_) : 1.0;
    };
    const auto& design = spec_.design;
    for (int j = 0; j < design.p(); ++j) {
      const double r = rms([&](const PreparedSubject& s) {
        // Visits span roughly the follow-up window; use the observed time as a proxy for t.
        return design.fixed[j].times_time ? s.rows.x_slope(j) * s.observed_time : s.rows.x_const(j);
      });
      if (r > 0.0) scale[codec_.beta_offset() + j] = 1.0 / r;
    }
    for (int j = 0; j < static_cast<int>(design.survival.size()); ++j) {
      const double r = rms([&](const PreparedSubject& s) { return s.rows.w(j); });
      if (r > 0.0) scale[codec_.gamma_offset() + j] = 1.0 / r;
    }
    for (int c = 0; c < codec_.size(); ++c) x(c) += jitter(rng_) * scale[c];
    codec_.decode_into(x, draw_);
    for (int attempt = 0;; ++attempt) {
      try {
        refresh_all();
        break;
      } catch (const ConfigError&) {
        if (attempt > 50) throw ConfigError("could not find an initial state with a finite hazard");
        draw_.eta0 -= 1.0;
      }
    }
    refresh_sigma();

    for (int k = 0; k < K_; ++k) {
      const auto& slot = codec_.outcome_slots()[k];
      outcome_.emplace_back(slot.size);
    }
    beta_ = Adapter(design.p());
    zeta_ = Adapter(static_cast<int>(design.theta_knots.size()));
    survival_ = Adapter(survival_size());
    xi_ = Adapter(static_cast<int>(design.effective_hazard_knots().size()));
    sigma_ = Adapter(q_ + q_ * (q_ - 1) / 2);
    subject_.assign(n_, Adapter(q_));
  }

  int survival_size() const {
    const int last = codec_.eta1_index() >= 0 ? codec_.eta1_index() : codec_.eta0_index();
    return last - codec_.gamma_offset() + 1;
  }

  // ---- one sweep ---------------------------------------------------------

  void iterate(int it, bool adapting) {
    for (int k = 0; k < K_; ++k) {
      if (spec_.outcomes[k].kind == OutcomeKind::continuous)
        gibbs_continuous(k);
      else
        for (int r = 0; r < kOutcomeRepeats; ++r) update_outcome(k, it, adapting);
    }
    update_beta(it, adapting);
    if (zeta_.dim() > 0) {
      update_zeta(it, adapting);
      draw_.sigma_zeta = gibbs_penalty_scale(draw_.zeta);
    }
    update_survival(it, adapting);
    if (xi_.dim() > 0) {
      update_xi(it, adapting);
      draw_.sigma_xi = gibbs_penalty_scale(draw_.xi);
    }
    if (q_ > 0) {
      for (int i = 0; i < n_; ++i) update_subject(i, it, adapting);
      if (!shift_terms_.empty()) location_shift();
    }
    if (anchor_ >= 0) {
      if (intercept_ >= 0) trait_move(location_step_, false, it, adapting);
      trait_move(scale_step_, true, it, adapting);
    }
    if (q_ > 0) update_sigma(it, adapting);
  }

  // Generic random-walk step on codec coordinates [offset, offset + dim).
  // `likelihood` returns the block-relevant log-likelihood of a candidate draw
  // and stages any cache it wants to commit; `commit` installs it.
  void block_step(Adapter& adapter, int offset, int it, bool adapting, double current_likelihood,
                  const std::function<double(const ParameterDraw&)>& likelihood, const std::function<void()>& commit) {
    const int dim = adapter.dim();
    Eigen::VectorXd x = codec_.encode(draw_);
    auto target_at = [&](const Eigen::VectorXd& block) {
      Eigen::VectorXd y = x;
      y.segment(offset, dim) = block;
      ParameterDraw cand = draw_;
      codec_.decode_into(y, cand);
      const double pt = parameter_terms(cand);
      if (!std::isfinite(pt)) return kNegInf;
      return pt + likelihood(cand);
    };
    if (!adapter.ready()) {
      // Curvature-based starting shape; staging from these evaluations is discarded.
      adapter.set_covariance(curvature_covariance(target_at, x.segment(offset, dim)));
    }
    const double current = parameter_terms(draw_) + current_likelihood;
    const Eigen::VectorXd proposal_block = x.segment(offset, dim) + adapter.step(rng_);
    const double proposed = target_at(proposal_block);
    const bool accept = std::isfinite(proposed) && std::log(unif_(rng_)) < proposed - current;
    if (accept) {
      x.segment(offset, dim) = proposal_block;
      codec_.decode_into(x, draw_);
      commit();
    }
    adapter.record(accept, x.segment(offset, dim), it, adapting, config_.adapt_window);
  }

  // Exact conditional updates of (a_k, b_k, 1/σ²) for a continuous outcome
  // given θ, with the N(0, location_variance) prior on a_k, the uniform prior
  // on b_k and the inverse-gamma prior on σ².
  void gibbs_continuous(int k) {
    ContinuousStats stats;
    for (int i = 0; i < n_; ++i) {
      const auto& s = data_.subjects[i];
      const double* th = &theta_[visit_offset_[i]];
      for (const auto& obs : s.observations)
        if (obs.outcome == k) stats.add(th[obs.visit], obs.value);
    }
    auto& a = draw_.a[k][0];
    auto& b = draw_.b[k];
    const double var = draw_.sigma_eps[k] * draw_.sigma_eps[k];
    a = sample_continuous_intercept(rng_, stats, b, var, priors_);
    b = sample_continuous_loading(rng_, stats, a, var, priors_);
    draw_.sigma_eps[k] = std::sqrt(sample_continuous_variance(rng_, stats, a, b, var, priors_));

    for (int i = 0; i < n_; ++i) {
      const auto& s = data_.subjects[i];
      const double* th = &theta_[visit_offset_[i]];
      double v = 0.0;
      for (const auto& obs : s.observations)
        if (obs.outcome == k)
          v += observation_log_prob(spec_.outcomes[k], draw_.a[k], b, draw_.sigma_eps[k], th[obs.visit], obs.value);
      ly_[static_cast<std::size_t>(i) * K_ + k] = v;
    }
  }

  // v ~ IG(a + R/2, b + ζ'ζ) under the penalty -ζ'ζ/v - (R/2) log v.
  double gibbs_penalty_scale(const std::vector<double>& coef) {
    double ss = 0.0;
    for (double c : coef) ss += c * c;
    std::gamma_distribution<double> g(priors_.ig_shape + 0.5 * static_cast<double>(coef.size()),
                                      1.0 / (priors_.ig_scale + ss));
    const double precision = g(rng_);
    return 1.0 / std::sqrt(precision);
  }

  void update_outcome(int k, int it, bool adapting) {
    std::vector<double> staged(n_);
    const auto& o = spec_.outcomes[k];
    auto lik = [&](const ParameterDraw& d) {
      double total = 0.0;
      for (int i = 0; i < n_; ++i) {
        const auto& s = data_.subjects[i];
        const double* th = &theta_[visit_offset_[i]];
        double v = 0.0;
        for (const auto& obs : s.observations)
          if (obs.outcome == k) v += observation_log_prob(o, d.a[k], d.b[k], d.sigma_eps[k], th[obs.visit], obs.value);
        staged[i] = v;
        total += v;
      }
      return total;
    };
    double current = 0.0;
    for (int i = 0; i < n_; ++i) current += ly_[static_cast<std::size_t>(i) * K_ + k];
    block_step(outcome_[k], codec_.outcome_slots()[k].offset, it, adapting, current, lik, [&] {
      for (int i = 0; i < n_; ++i) ly_[static_cast<std::size_t>(i) * K_ + k] = staged[i];
    });
  }

  // Blocks that move θ: every cache is recomputed for the candidate.
  void update_theta_block(Adapter& adapter, int offset, int it, bool adapting) {
    std::vector<double> theta(theta_.size()), ly(ly_.size()), ls(ls_.size());
    auto lik = [&](const ParameterDraw& d) {
      double total = 0.0;
      for (int i = 0; i < n_; ++i) {
        const bool with_survival = spec_.association != AssociationForm::random_effects;
        double* lyi = &ly[static_cast<std::size_t>(i) * K_];
        if (!evaluate_subject(i, d, u_[i], &theta[visit_offset_[i]], lyi, ls[i], with_survival)) return kNegInf;
        if (!with_survival) ls[i] = ls_[i];
        for (int k = 0; k < K_; ++k) total += lyi[k];
        total += ls[i];
      }
      return total;
    };
    block_step(adapter, offset, it, adapting, total_ly() + total_ls(), lik, [&] {
      theta_.swap(theta);
      ly_.swap(ly);
      ls_.swap(ls);
    });
  }

  void update_beta(int it, bool adapting) { update_theta_block(beta_, codec_.beta_offset(), it, adapting); }
  void update_zeta(int it, bool adapting) { update_theta_block(zeta_, codec_.zeta_offset(), it, adapting); }

  void update_survival_block(Adapter& adapter, int offset, int it, bool adapting) {
    std::vector<double> ls(ls_.size());
    auto lik = [&](const ParameterDraw& d) {
      double total = 0.0;
      for (int i = 0; i < n_; ++i) {
        ls[i] = survival_only(i, d, u_[i]);
        if (!std::isfinite(ls[i])) return kNegInf;
        total += ls[i];
      }
      return total;
    };
    block_step(adapter, offset, it, adapting, total_ls(), lik, [&] { ls_.swap(ls); });
  }

  void update_survival(int it, bool adapting) { update_survival_block(survival_, codec_.gamma_offset(), it, adapting); }
  void update_xi(int it, bool adapting) { update_survival_block(xi_, codec_.xi_offset(), it, adapting); }

  void update_subject(int i, int it, bool adapting) {
    Adapter& adapter = subject_[i];
    const auto& s = data_.subjects[i];
    const std::size_t nv = s.visit_times.size();
    std::vector<double> theta(nv);
    std::vector<double> ly(K_);
    double ls = 0.0;
    auto target = [&](const Eigen::VectorXd& u) {
      if (!evaluate_subject(i, draw_, u, theta.data(), ly.data(), ls)) return kNegInf;
      double t = ls + re_density(u);
      for (double v : ly) t += v;
      return t;
    };
    if (!adapter.ready()) adapter.set_covariance(curvature_covariance(target, u_[i]));
    double current = ls_[i] + re_density(u_[i]);
    for (int k = 0; k < K_; ++k) current += ly_[static_cast<std::size_t>(i) * K_ + k];
    const Eigen::VectorXd proposal = u_[i] + adapter.step(rng_);
    const double proposed = target(proposal);
    const bool accept = std::isfinite(proposed) && std::log(unif_(rng_)) < proposed - current;
    if (accept) {
      u_[i] = proposal;
      std::copy(theta.begin(), theta.end(), theta_.begin() + visit_offset_[i]);
      std::copy(ly.begin(), ly.end(), ly_.begin() + static_cast<std::ptrdiff_t>(i) * K_);
      ls_[i] = ls;
    }
    adapter.record(accept, u_[i], it, adapting, config_.adapt_window);
  }

  void update_sigma(int it, bool adapting) {
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(q_, q_);
    for (const auto& u : u_) scatter += u * u.transpose();
    auto lik = [&](const ParameterDraw& d) {
      Eigen::LLT<Eigen::MatrixXd> llt(d.covariance());
      if (llt.info() != Eigen::Success) return kNegInf;
      const Eigen::MatrixXd l = llt.matrixL();
      const double log_det = 2.0 * l.diagonal().array().log().sum();
      const double trace = llt.solve(scatter).trace();
      return -0.5 * n_ * (q_ * kLog2Pi + log_det) - 0.5 * trace;
    };
    block_step(sigma_, codec_.re_log_var_offset(), it, adapting, lik(draw_), lik, [&] { refresh_sigma(); });
  }

  // ---- location shift ----------------------------------------------------
  //
  // β_j += δ_j and u_ik -= c_ij δ_j leave every θ_i(t) unchanged whenever
  // fixed term j and random term k share a power of t and term k has no
  // covariate. Conditional on everything else δ is Gaussian; under the
  // random-effects association the survival likelihood also moves, and the
  // Gaussian draw is accepted with the survival likelihood ratio.

  void setup_shift() {
    const auto& d = spec_.design;
    for (int j = 0; j < d.p(); ++j)
      for (int k = 0; k < d.q(); ++k)
        if (d.random[k].covariate.empty() && d.random[k].times_time == d.fixed[j].times_time) {
          shift_terms_.push_back(j);
          shift_partner_.push_back(k);
          break;
        }
  }

  Eigen::MatrixXd shift_matrix(int i) const {
    const auto& rows = data_.subjects[i].rows;
    const int m = static_cast<int>(shift_terms_.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(q_, m);
    for (int c = 0; c < m; ++c) {
      const int j = shift_terms_[c];
      M(shift_partner_[c], c) = spec_.design.fixed[j].times_time ? rows.x_slope(j) : rows.x_const(j);
    }
    return M;
  }

  void location_shift() {
    const int m = static_cast<int>(shift_terms_.size());
    const Eigen::MatrixXd sigma = draw_.covariance();
    Eigen::LLT<Eigen::MatrixXd> sllt(sigma);
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(m, m) / priors_.location_variance;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(m);
    for (int c = 0; c < m; ++c) h(c) = -draw_.beta[shift_terms_[c]] / priors_.location_variance;
    std::vector<Eigen::MatrixXd> mats(n_);
    for (int i = 0; i < n_; ++i) {
      mats[i] = shift_matrix(i);
      const Eigen::MatrixXd sm = sllt.solve(mats[i]);
      P += mats[i].transpose() * sm;
      h += sm.transpose() * u_[i];
    }
    Eigen::LLT<Eigen::MatrixXd> pllt(P);
    if (pllt.info() != Eigen::Success) return;
    const Eigen::VectorXd mean = pllt.solve(h);
    std::normal_distribution<double> n01;
    Eigen::VectorXd z(m);
    for (int c = 0; c < m; ++c) z(c) = n01(rng_);
    const Eigen::VectorXd delta = mean + pllt.matrixU().solve(z);

    std::vector<Eigen::VectorXd> u_new(n_);
    for (int i = 0; i < n_; ++i) u_new[i] = u_[i] - mats[i] * delta;
    ParameterDraw cand = draw_;
    for (int c = 0; c < m; ++c) cand.beta[shift_terms_[c]] += delta(c);

    if (spec_.association == AssociationForm::random_effects) {
      std::vector<double> ls(n_);
      double diff = 0.0;
      for (int i = 0; i < n_; ++i) {
        ls[i] = survival_only(i, cand, u_new[i]);
        if (!std::isfinite(ls[i])) {
          diff = kNegInf;
          break;
        }
        diff += ls[i] - ls_[i];
      }
      ++shift_tries_;
      if (!(std::isfinite(diff) && std::log(unif_(rng_)) < diff)) return;
      ++shift_accepts_;
      ls_.swap(ls);
    }
    draw_.beta = cand.beta;
    u_.swap(u_new);
  }

  // ---- trait reparameterization -----------------------------------------
  //
  // Mapping θ to cθ + δ is absorbed by every parameter except the anchor
  // outcome, whose first threshold and loading are pinned. Moving the other
  // anchor thresholds along with θ leaves only the first threshold's logit
  // (location) or the logistic noise scale (scale) changed. The slow
  // directions of the blockwise sweep, all thresholds drifting together with
  // β₀ or the overall θ scale, become single moves. Location and log-scale
  // are separate one-parameter groups proposed by random walk. In sampler
  // coordinates the scale map has Jacobian c^(p + nq + R - dim ν) and the
  // location map Δ₂/(Δ₂ + δ) through the anchor's first log-increment.

  struct StepSize {
    double log_step = std::log(0.05);
    long accepts = 0, tries = 0;
    void record(bool accepted, int it, bool adapting) {
      ++tries;
      if (accepted) ++accepts;
      if (adapting) log_step += ((accepted ? 1.0 : 0.0) - 0.44) / std::pow(it + 1.0, 0.6);
    }
  };

  // Returns the log-Jacobian in sampler coordinates, or -inf when the image
  // leaves the parameter space.
  double transform(double log_c, double delta, ParameterDraw& d, std::vector<Eigen::VectorXd>& u) const {
    const double c = std::exp(log_c);
    double log_jac = 0.0;
    for (auto& b : d.beta) b *= c;
    if (intercept_ >= 0) d.beta[intercept_] += delta;
    for (auto& z : d.zeta) z *= c;
    d.sigma_zeta *= c;
    for (auto& s : d.re_sd) s *= c;
    for (auto& v : u) v *= c;
    for (int k = 0; k < K_; ++k) {
      auto& a = d.a[k];
      if (k == anchor_) {
        if (a.size() < 2) continue;
        const double inc = a[1] - a[0];
        for (std::size_t l = 1; l < a.size(); ++l) a[l] = a[0] + c * (a[l] - a[0]) + delta;
        const double inc_new = a[1] - a[0];
        if (!(inc_new > 0.0)) return kNegInf;
        log_jac += std::log(inc) - std::log(inc_new) + log_c;
        continue;
      }
      const double shift = d.b[k] * delta / c;
      if (spec_.outcomes[k].kind == OutcomeKind::ordinal)
        for (auto& v : a) v += shift;
      else
        a[0] -= shift;
      d.b[k] /= c;
    }
    if (spec_.association != AssociationForm::random_effects && !d.assoc.empty()) d.eta0 -= d.assoc[0] * delta / c;
    for (auto& v : d.assoc) v /= c;
    const int free_assoc = codec_.fix_association() ? 0 : static_cast<int>(d.assoc.size());
    const int scaled = spec_.design.p() + n_ * q_ + static_cast<int>(d.zeta.size()) - free_assoc;
    return log_jac + scaled * log_c;
  }

  void trait_move(StepSize& step, bool scale, int it, bool adapting) {
    std::normal_distribution<double> n01;
    const double e = std::exp(step.log_step) * n01(rng_);
    ParameterDraw cand = draw_;
    std::vector<Eigen::VectorXd> u(u_);
    double proposed = transform(scale ? e : 0.0, scale ? 0.0 : e, cand, u);
    if (std::isfinite(proposed)) proposed += parameter_terms(cand);
    std::vector<double> theta(theta_.size()), ly(ly_.size()), ls(ls_.size());
    Eigen::MatrixXd chol;
    double log_norm = 0.0;
    if (q_ > 0 && std::isfinite(proposed)) {
      Eigen::LLT<Eigen::MatrixXd> llt(cand.covariance());
      if (llt.info() != Eigen::Success) proposed = kNegInf;
      chol = llt.matrixL();
      log_norm = -0.5 * (q_ * kLog2Pi) - chol.diagonal().array().log().sum();
    }
    for (int i = 0; i < n_ && std::isfinite(proposed); ++i) {
      double* lyi = &ly[static_cast<std::size_t>(i) * K_];
      if (!evaluate_subject(i, cand, u[i], &theta[visit_offset_[i]], lyi, ls[i])) {
        proposed = kNegInf;
        break;
      }
      for (int k = 0; k < K_; ++k) proposed += lyi[k];
      proposed += ls[i];
      if (q_ > 0) proposed += log_norm - 0.5 * chol.triangularView<Eigen::Lower>().solve(u[i]).squaredNorm();
    }
    double current = parameter_terms(draw_) + total_ly() + total_ls();
    for (int i = 0; i < n_; ++i) current += re_density(u_[i]);

    const bool accept = std::isfinite(proposed) && std::log(unif_(rng_)) < proposed - current;
    if (accept) {
      draw_ = std::move(cand);
      u_.swap(u);
      theta_.swap(theta);
      ly_.swap(ly);
      ls_.swap(ls);
      refresh_sigma();
    }
    step.record(accept, it, adapting);
  }

  const PreparedData& data_;
  const ModelSpec& spec_;
  const ParameterCodec& codec_;
  const PriorSpec& priors_;
  const ChainConfig& config_;
  int index_;
  Rng rng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};

  int n_ = 0, q_ = 0, K_ = 0;
  ParameterDraw draw_;
  std::vector<Eigen::VectorXd> u_;
  std::vector<int> visit_offset_;
  std::vector<double> theta_;
  std::vector<double> ly_;  // subject-major n x K
  std::vector<double> ls_;
  Eigen::MatrixXd sigma_chol_;
  double sigma_log_norm_ = 0.0;

  std::vector<Adapter> outcome_;
  Adapter beta_, zeta_, survival_, xi_, sigma_;
  std::vector<Adapter> subject_;

  std::vector<int> shift_terms_, shift_partner_;
  long shift_tries_ = 0, shift_accepts_ = 0;

  int anchor_ = -1, intercept_ = -1;
  StepSize location_step_, scale_step_;
};

}  // namespace

void ContinuousStats::add(double theta, double y) {
  n += 1.0;
  sy += y;
  st += theta;
  stt += theta * theta;
  sty += theta * y;
  syy += y * y;
}

double sample_continuous_intercept(Rng& rng, const ContinuousStats& s, double b, double var, const PriorSpec& priors) {
  std::normal_distribution<double> n01;
  const double prec = s.n / var + 1.0 / priors.location_variance;
  const double mean = ((s.sy - b * s.st) / var) / prec;
  return mean + n01(rng) / std::sqrt(prec);
}

double sample_continuous_loading(Rng& rng, const ContinuousStats& s, double a, double var, const PriorSpec& priors) {
  if (!(s.stt > 0.0)) {
    std::uniform_real_distribution<double> ub(0.0, priors.loading_upper);
    return ub(rng);
  }
  const double mean = (s.sty - a * s.st) / s.stt;
  double b = sample_truncated_normal(rng, mean, std::sqrt(var / s.stt), 0.0, priors.loading_upper);
  if (!(b > 0.0)) b = std::numeric_limits<double>::min();
  if (!(b < priors.loading_upper)) b = std::nextafter(priors.loading_upper, 0.0);
  return b;
}

double sample_continuous_variance(Rng& rng, const ContinuousStats& s, double a, double b, double current,
                                  const PriorSpec& priors) {
  const double ss = s.syy - 2.0 * a * s.sy - 2.0 * b * s.sty + a * a * s.n + 2.0 * a * b * s.st + b * b * s.stt;
  std::gamma_distribution<double> g(priors.ig_shape + 0.5 * s.n, 1.0 / (priors.ig_scale + 0.5 * std::max(ss, 0.0)));
  const double precision = g(rng);
  if (!(precision > 0.0) || !std::isfinite(precision)) return current;
  return 1.0 / precision;
}

PosteriorArchive fit(const Dataset& data, const ModelSpec& spec, const PriorSpec& priors, const ChainConfig& config,
                     const ProgressFn& progress) {
  spec.validate();
  priors.validate();
  config.validate();
  validate_dataset(data, spec);
  int with_visits = 0;
  for (const auto& s : data.subjects)
    if (!s.visits.empty()) ++with_visits;
  if (with_visits < 2) throw ConfigError("fitting needs at least two subjects with at least one visit");

  const auto prepared = PreparedData::build(data, spec);
  const ParameterCodec codec(spec, config.fix_association);

  std::vector<ChainResult> results(config.n_chains);
  auto run_one = [&](int c) {
    Chain chain(prepared, codec, priors, config, c);
    results[c] = chain.run(progress);
  };
  if (config.parallel && config.n_chains > 1) {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(config.n_chains);
    for (int c = 0; c < config.n_chains; ++c)
      threads.emplace_back([&, c] {
        try {
          run_one(c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (int c = 0; c < config.n_chains; ++c) run_one(c);
  }

  PosteriorArchive archive;
  archive.spec = spec;
  archive.priors = priors;
  archive.config = config;
  archive.q = spec.design.q();
  for (const auto& s : data.subjects) archive.subject_ids.push_back(s.id);
  for (int c = 0; c < config.n_chains; ++c) {
    auto& r = results[c];
    for (auto& d : r.draws) {
      archive.draws.push_back(std::move(d));
      archive.chain.push_back(c);
    }
    archive.effects.insert(archive.effects.end(), r.effects.begin(), r.effects.end());
  }

  auto& diag = archive.diagnostics;
  diag.parameters = codec.column_names();
  const std::size_t per_chain = results.front().draws.size();
  diag.rhat.assign(diag.parameters.size(), 1.0);
  diag.max_rhat = 1.0;
  if (config.n_chains >= 2 && per_chain >= 2) {
    std::vector<std::vector<std::vector<double>>> columns(diag.parameters.size(),
                                                          std::vector<std::vector<double>>(config.n_chains));
    for (int m = 0; m < archive.n_draws(); ++m) {
      const auto row = codec.flatten(archive.draws[m]);
      for (std::size_t p = 0; p < row.size(); ++p) columns[p][archive.chain[m]].push_back(row[p]);
    }
    for (std::size_t p = 0; p < columns.size(); ++p) {
      diag.rhat[p] = gelman_rubin(columns[p]);
      diag.max_rhat = std::max(diag.max_rhat, diag.rhat[p]);
    }
  }
  std::map<std::string, std::pair<long, long>> totals;
  for (const auto& r : results)
    for (const auto& [name, counts] : r.acceptance) {
      totals[name].first += counts.first;
      totals[name].second += counts.second;
    }
  bool first = true;
  for (const auto& [name, counts] : totals) {
    if (counts.second == 0) continue;
    const double rate = static_cast<double>(counts.first) / static_cast<double>(counts.second);
    diag.acceptance[name] = rate;
    diag.min_acceptance = first ? rate : std::min(diag.min_acceptance, rate);
    diag.max_acceptance = first ? rate : std::max(diag.max_acceptance, rate);
    first = false;
  }
  bool any_event = false;
  for (const auto& s : data.subjects) any_event = any_event || s.event == 1;
  if (!any_event) diag.warnings.push_back("no events observed; survival parameters are driven by the priors");
  if (diag.max_rhat >= 1.1) diag.warnings.push_back("max R-hat >= 1.1; chains have not converged");

  archive.id = archive.compute_id();
  return archive;
}

}  // namespace jointrait
