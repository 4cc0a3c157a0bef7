#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace jointrait::fixtures {

namespace fs = std::filesystem;

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  // Kolmogorov limiting distribution with the Stephens small-sample correction.
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  if (lambda < 1e-3) {
    p = 1.0;
  } else {
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
      const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
      p += term;
      if (std::abs(term) < 1e-16) break;
      sign = -sign;
    }
    p = std::clamp(2.0 * p, 0.0, 1.0);
  }
  return {d, p};
}

double quadrature_cumulative(const std::function<double(double)>& log_h, double lo, double hi,
                             std::vector<double> breaks) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = std::max(lo, breaks[s]), b = std::min(hi, breaks[s + 1]);
    if (!(b > a)) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double t) { return std::exp(log_h(t)); }, a, b, 15, 1e-14);
  }
  return total;
}

ModelSpec scenario_spec(AssociationForm form) {
  auto spec = SimScenario::model_spec();
  spec.association = form;
  return spec;
}

PosteriorArchive make_archive(const ModelSpec& spec, std::vector<ParameterDraw> draws) {
  PosteriorArchive a;
  a.spec = spec;
  a.draws = std::move(draws);
  a.chain.assign(a.draws.size(), 0);
  a.q = spec.design.q();
  a.id = a.compute_id();
  return a;
}

ParameterDraw constant_hazard_truth() {
  auto t = SimScenario::standard().truth;
  t.assoc = {0.0};
  t.gamma = {0.0};
  t.eta0 = std::log(0.1);
  return t;
}

ParameterDraw random_draw(const ModelSpec& spec, Rng& rng) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto d = ParameterDraw::zeros(spec);
  for (int k = 0; k < spec.n_outcomes(); ++k) {
    const auto& o = spec.outcomes[k];
    auto& a = d.a[k];
    if (o.kind == OutcomeKind::ordinal) {
      a[0] = o.is_anchor ? 0.0 : n01(rng);
      for (std::size_t l = 1; l < a.size(); ++l) a[l] = a[l - 1] + 0.3 + unif(rng);
    } else {
      a[0] = 2.0 * n01(rng);
    }
    d.b[k] = o.is_anchor ? 1.0 : 0.5 + 1.5 * unif(rng);
    d.sigma_eps[k] = 0.5 + 1.5 * unif(rng);
  }
  // terms multiplied by time are kept small: over 24 months they compound,
  // and a log hazard near 20 makes the posterior ~1e9 and finite differences useless
  for (std::size_t j = 0; j < d.beta.size(); ++j)
    d.beta[j] = (spec.design.fixed[j].times_time ? 0.05 : 0.3) * n01(rng);
  for (std::size_t j = 0; j < d.re_sd.size(); ++j)
    d.re_sd[j] = spec.design.random[j].times_time ? 0.05 + 0.15 * unif(rng) : 0.2 + 0.8 * unif(rng);
  for (auto& x : d.re_corr) x = -0.5 + unif(rng);
  for (auto& x : d.zeta) x = 0.05 * n01(rng);
  d.sigma_zeta = 0.5 + 1.5 * unif(rng);
  for (auto& x : d.gamma) x = 0.3 * n01(rng);
  for (auto& x : d.assoc) x = 0.3 * n01(rng);
  d.eta0 = std::log(0.1) + 0.5 * n01(rng);
  d.eta1 = spec.design.baseline_slope ? 0.02 * n01(rng) : 0.0;
  for (auto& x : d.xi) x = 0.05 * n01(rng);
  d.sigma_xi = 0.5 + 1.5 * unif(rng);
  return d;
}

Dataset random_dataset(const ModelSpec& spec, const ParameterDraw& draw, int n, Rng& rng,
                       std::vector<Eigen::VectorXd>* effects) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int q = spec.design.q();
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(draw.covariance()).matrixL();
  Dataset data;
  for (int i = 0; i < n; ++i) {
    SubjectRecord s;
    s.id = "s" + std::to_string(i + 1);
    s.covariates = {{"x1", unif(rng) < 0.5 ? 0.0 : 1.0}, {"x2", unif(rng)}};
    Eigen::VectorXd z(q);
    for (int j = 0; j < q; ++j) z(j) = n01(rng);
    const Eigen::VectorXd u = chol * z;
    s.observed_time = 1.0 + 23.0 * unif(rng);
    s.event = unif(rng) < 0.5 ? 1 : 0;
    const SubjectEffects e{u};
    for (double t = 0.0; t <= s.observed_time; t += 3.0) {
      const double theta = latent_trait(s.covariates, t, draw, e, spec.design).theta;
      Visit v{t, {}};
      for (int k = 0; k < spec.n_outcomes(); ++k) {
        const auto dist = outcome_distribution(spec, k, theta, draw);
        switch (dist.kind) {
          case OutcomeKind::continuous: v.values.push_back(dist.mean + dist.sd * n01(rng)); break;
          case OutcomeKind::binary: v.values.push_back(unif(rng) < dist.p_one ? 1.0 : 0.0); break;
          case OutcomeKind::ordinal: {
            double w = unif(rng);
            int l = 0;
            while (l + 1 < static_cast<int>(dist.category_probs.size()) && w >= dist.category_probs[l])
              w -= dist.category_probs[l++];
            v.values.push_back(l + 1.0);
            break;
          }
        }
      }
      s.visits.push_back(std::move(v));
    }
    if (effects) effects->push_back(u);
    data.subjects.push_back(std::move(s));
  }
  return data;
}

ModelSpec rich_spec(AssociationForm form) {
  auto spec = SimScenario::model_spec();
  spec.outcomes.push_back({"yb", OutcomeKind::binary, 0, false});
  spec.association = form;
  spec.design.theta_knots = {3, 9};
  spec.design.hazard_knots = std::vector<double>{4, 12};
  spec.design.baseline_slope = true;
  return spec;
}

double gradient_max_relative_error(std::uint64_t seed) {
  static constexpr AssociationForm forms[] = {AssociationForm::shared_latent, AssociationForm::latent_and_slope,
                                              AssociationForm::random_effects};
  const auto spec = rich_spec(forms[seed % 3]);
  Rng rng = make_rng(seed, 77);
  const auto draw = random_draw(spec, rng);
  std::vector<Eigen::VectorXd> effects;
  const auto data = PreparedData::build(random_dataset(spec, draw, 5, rng, &effects), spec);
  const ParameterCodec codec(spec);
  const PriorSpec priors;
  const Eigen::VectorXd x = stack_unconstrained(codec, draw, effects);
  const Eigen::VectorXd g = grad_log_posterior(data, codec, draw, effects, priors);
  double worst = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x(j)));
    Eigen::VectorXd hi = x, lo = x;
    hi(j) += h;
    lo(j) -= h;
    const double fd = (log_posterior_unconstrained(data, codec, draw, hi, priors) -
                       log_posterior_unconstrained(data, codec, draw, lo, priors)) /
                      (2.0 * h);
    worst = std::max(worst, std::abs(g(j) - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

double prior_recovery_min_pvalue(std::uint64_t seed) {
  constexpr int kDraws = 2000;
  const auto spec = SimScenario::model_spec();
  const auto truth = SimScenario::standard().truth;
  const auto archive = make_archive(spec, std::vector<ParameterDraw>(kDraws, truth));
  PredictionRequest r;
  r.covariates = {{"x1", 1}, {"x2", 60}};
  r.landmark = 0.0;
  r.horizons = {12.0};
  r.seed = seed;
  const auto sampled = sample_subject_effects(r, archive);

  Rng rng = make_rng(seed, 99);
  std::normal_distribution<double> n01;
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(truth.covariance()).matrixL();
  const int q = spec.design.q();
  std::vector<std::vector<double>> a(q), b(q);
  for (int m = 0; m < kDraws; ++m) {
    Eigen::VectorXd z(q);
    for (int j = 0; j < q; ++j) z(j) = n01(rng);
    const Eigen::VectorXd u = chol * z;
    for (int j = 0; j < q; ++j) {
      a[j].push_back(sampled[m](j));
      b[j].push_back(u(j));
    }
  }
  double p = 1.0;
  for (int j = 0; j < q; ++j) p = std::min(p, ks_two_sample(a[j], b[j]).p_value);
  return p;
}

std::vector<EvalRecord> uncensored_fixture(int n, std::uint64_t seed) {
  Rng rng = make_rng(seed, 31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (;;) {
    std::vector<EvalRecord> out;
    int cases = 0, controls = 0;
    for (int i = 0; i < n; ++i) {
      EvalRecord r{std::to_string(i), unif(rng), 20.0 * unif(rng), 1};
      if (r.time > 2.0) (r.time <= 10.0 ? cases : controls)++;
      out.push_back(r);
    }
    if (cases > 0 && controls > 0) return out;
  }
}

double brute_force_concordance(const std::vector<EvalRecord>& records, double landmark, double horizon) {
  double hits = 0.0, pairs = 0.0;
  for (const auto& c : records) {
    if (!(c.time > landmark && c.time <= horizon)) continue;
    for (const auto& k : records) {
      if (!(k.time > horizon)) continue;
      pairs += 1.0;
      hits += c.risk > k.risk ? 1.0 : (c.risk == k.risk ? 0.5 : 0.0);
    }
  }
  return hits / pairs;
}

std::vector<EvalRecord> brier_fixture() {
  return {{"1", 0.8, 4, 1}, {"2", 0.3, 5, 0}, {"3", 0.6, 6, 1},
          {"4", 0.2, 9, 0}, {"5", 0.1, 12, 1}, {"6", 0.5, 1, 0}};
}

TempDir::TempDir() {
  static int counter = 0;
  const auto base = fs::temp_directory_path();
  for (;;) {
    const auto p = base / ("jointrait_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    if (fs::create_directory(p)) {
      path_ = p.string();
      return;
    }
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace jointrait::fixtures
