#include "jointrait/prediction.hpp"

#include <cmath>
#include <limits>

#include "jointrait/error.hpp"
#include "jointrait/longitudinal.hpp"
#include "jointrait/posterior.hpp"
#include "jointrait/prepared.hpp"
#include "jointrait/stats.hpp"
#include "jointrait/survival.hpp"

namespace jointrait {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

SubjectRecord as_record(const PredictionRequest& r) {
  SubjectRecord s;
  s.id = r.id;
  s.covariates = r.covariates;
  s.visits = r.visits;
  s.observed_time = r.landmark;
  s.event = 0;
  return s;
}

Band summarize(const std::vector<double>& values) {
  Band b;
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, nan};
  }
  b.mean = mean(values);
  b.median = quantile(values, 0.5);
  b.lower = quantile(values, 0.025);
  b.upper = quantile(values, 0.975);
  return b;
}

void check_effects(const PredictionRequest& request, const PosteriorArchive& archive,
                   const std::vector<Eigen::VectorXd>& effects) {
  if (effects.size() != selected_draws(archive.n_draws(), request.m_use).size())
    throw ConfigError("effects do not align with the selected archive draws");
}

}  // namespace

void validate_request(const PredictionRequest& request, const ModelSpec& spec, bool past_horizons) {
  if (!std::isfinite(request.landmark) || request.landmark < 0.0)
    throw DataError("landmark", "landmark must be finite and >= 0");
  validate_subject(as_record(request), spec, false);
  for (std::size_t j = 0; j < request.visits.size(); ++j)
    if (request.visits[j].time > request.landmark)
      throw DataError("visits[" + std::to_string(j) + "].time", "visit is after the landmark");
  if (request.horizons.empty()) throw DataError("horizons", "at least one horizon is required");
  for (std::size_t h = 0; h < request.horizons.size(); ++h) {
    const double t = request.horizons[h];
    const std::string field = "horizons[" + std::to_string(h) + "]";
    if (!std::isfinite(t) || t < (past_horizons ? 0.0 : request.landmark))
      throw DataError(field, past_horizons ? "horizon must be finite and >= 0" : "horizon must be finite and >= the landmark");
    if (h > 0 && !(t > request.horizons[h - 1])) throw DataError(field, "horizons must be strictly increasing");
  }
  if (request.m_use < 0) throw DataError("m_use", "must be >= 0");
  if (request.mh_iterations < 0) throw DataError("mh_iterations", "must be >= 0");
}

std::vector<int> selected_draws(int n_draws, int m_use) {
  std::vector<int> out;
  if (m_use <= 0 || m_use >= n_draws) {
    out.resize(n_draws);
    for (int m = 0; m < n_draws; ++m) out[m] = m;
    return out;
  }
  out.reserve(m_use);
  for (int j = 0; j < m_use; ++j)
    out.push_back(static_cast<int>(static_cast<long long>(j) * n_draws / m_use));
  return out;
}

std::vector<Eigen::VectorXd> sample_subject_effects(const PredictionRequest& request, const PosteriorArchive& archive) {
  const auto& spec = archive.spec;
  if (archive.n_draws() == 0) throw ConfigError("archive has no draws");
  validate_request(request, spec, true);
  const auto subject = PreparedSubject::build(as_record(request), spec);
  const int q = spec.design.q();
  const auto selected = selected_draws(archive.n_draws(), request.m_use);
  std::vector<Eigen::VectorXd> out;
  out.reserve(selected.size());
  if (q == 0) {
    out.assign(selected.size(), Eigen::VectorXd());
    return out;
  }
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int m : selected) {
    const auto& draw = archive.draws[m];
    Rng rng = make_rng(request.seed, static_cast<std::uint64_t>(m));
    Eigen::LLT<Eigen::MatrixXd> llt(draw.covariance());
    if (llt.info() != Eigen::Success) throw ConfigError("archive draw has a non positive-definite covariance");
    const Eigen::MatrixXd chol = llt.matrixL();
    const double step = 2.38 / std::sqrt(static_cast<double>(q));
    auto target = [&](const Eigen::VectorXd& u) {
      const Eigen::VectorXd z = chol.triangularView<Eigen::Lower>().solve(u);
      double v = -0.5 * z.squaredNorm() + subject_longitudinal_loglik(spec, subject, draw, u);
      try {
        v -= HazardModel(spec, subject.rows, draw, u).cumulative(0.0, request.landmark);
      } catch (const HazardOverflow&) {
        return kNegInf;
      }
      return std::isnan(v) ? kNegInf : v;
    };
    Eigen::VectorXd u = Eigen::VectorXd::Zero(q);
    double current = target(u);
    Eigen::VectorXd z(q);
    for (int s = 0; s < request.mh_iterations; ++s) {
      for (int j = 0; j < q; ++j) z(j) = n01(rng);
      const Eigen::VectorXd prop = u + step * (chol * z);
      const double value = target(prop);
      if (std::isfinite(value) && (!std::isfinite(current) || std::log(unif(rng)) < value - current)) {
        u = prop;
        current = value;
      }
    }
    out.push_back(u);
  }
  return out;
}

TrajectoryBand predict_trajectory(const PredictionRequest& request, const PosteriorArchive& archive,
                                  const std::vector<Eigen::VectorXd>& effects) {
  const auto& spec = archive.spec;
  validate_request(request, spec, true);
  check_effects(request, archive, effects);
  const auto rows = DesignRows::build(request.covariates, spec.design);
  const auto selected = selected_draws(archive.n_draws(), request.m_use);
  const double last_visit = request.visits.empty() ? -1.0 : request.visits.back().time;
  const int K = spec.n_outcomes();
  const std::size_t H = request.horizons.size();
  const std::size_t M = selected.size();

  // values[k][h][m]; probs[k][h][l][m] for ordinal outcomes
  std::vector<std::vector<std::vector<double>>> values(K, std::vector<std::vector<double>>(H));
  std::vector<std::vector<std::vector<std::vector<double>>>> probs(K);
  for (int k = 0; k < K; ++k)
    if (spec.outcomes[k].kind == OutcomeKind::ordinal)
      probs[k].assign(H, std::vector<std::vector<double>>(spec.outcomes[k].n_categories));

  std::normal_distribution<double> n01;
  for (std::size_t c = 0; c < M; ++c) {
    const int m = selected[c];
    const auto& draw = archive.draws[m];
    Rng rng = make_rng(request.seed, static_cast<std::uint64_t>(m), 2);
    const auto trait = LinearTrait::from(rows, draw.beta, effects[c]);
    for (std::size_t h = 0; h < H; ++h) {
      const double theta = trait.at(request.horizons[h], draw.zeta, spec.design.theta_knots);
      for (int k = 0; k < K; ++k) {
        const auto dist = outcome_distribution(spec, k, theta, draw);
        switch (dist.kind) {
          case OutcomeKind::continuous: values[k][h].push_back(dist.mean + dist.sd * n01(rng)); break;
          case OutcomeKind::binary: values[k][h].push_back(dist.p_one); break;
          case OutcomeKind::ordinal: {
            double e = 0.0;
            for (std::size_t l = 0; l < dist.category_probs.size(); ++l) {
              e += static_cast<double>(l + 1) * dist.category_probs[l];
              probs[k][h][l].push_back(dist.category_probs[l]);
            }
            values[k][h].push_back(e);
            break;
          }
        }
      }
    }
  }

  TrajectoryBand band;
  for (int k = 0; k < K; ++k) {
    OutcomeTrajectory traj;
    traj.outcome = spec.outcomes[k].name;
    traj.kind = spec.outcomes[k].kind;
    for (std::size_t h = 0; h < H; ++h) {
      TrajectoryPoint p;
      p.horizon = request.horizons[h];
      p.retrodiction = p.horizon < last_visit;
      p.value = summarize(values[k][h]);
      if (!probs[k].empty())
        for (const auto& per_category : probs[k][h]) p.category_probs.push_back(summarize(per_category));
      traj.points.push_back(std::move(p));
    }
    band.outcomes.push_back(std::move(traj));
  }
  return band;
}

RiskCurve predict_risk(const PredictionRequest& request, const PosteriorArchive& archive,
                       const std::vector<Eigen::VectorXd>& effects) {
  const auto& spec = archive.spec;
  validate_request(request, spec);
  check_effects(request, archive, effects);
  const auto rows = DesignRows::build(request.covariates, spec.design);
  const auto selected = selected_draws(archive.n_draws(), request.m_use);
  const std::size_t H = request.horizons.size();
  std::vector<std::vector<double>> risks(H);
  RiskCurve curve;
  for (std::size_t c = 0; c < selected.size(); ++c) {
    const auto& draw = archive.draws[selected[c]];
    std::vector<double> r(H);
    try {
      const HazardModel model(spec, rows, draw, effects[c]);
      // Accumulating over consecutive intervals keeps each draw's curve monotone.
      double cumulative = 0.0, from = request.landmark;
      for (std::size_t h = 0; h < H; ++h) {
        cumulative += model.cumulative(from, request.horizons[h]);
        from = request.horizons[h];
        r[h] = -std::expm1(-cumulative);
      }
    } catch (const HazardOverflow&) {
      ++curve.skipped_draws;
      continue;
    }
    for (std::size_t h = 0; h < H; ++h) risks[h].push_back(r[h]);
    ++curve.used_draws;
  }
  for (std::size_t h = 0; h < H; ++h) curve.points.push_back({request.horizons[h], summarize(risks[h])});
  const auto total = static_cast<double>(selected.size());
  curve.skipped_fraction = total > 0 ? curve.skipped_draws / total : 0.0;
  curve.warning = curve.skipped_fraction > 0.01 || curve.used_draws == 0;
  return curve;
}

std::vector<EvalRecord> landmark_predictions(const PosteriorArchive& archive, const Dataset& data, double landmark,
                                             double horizon, std::uint64_t seed, int m_use, int mh_iterations) {
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const auto& s = data.subjects[i];
    if (!(s.observed_time > landmark)) continue;
    PredictionRequest r;
    r.id = s.id;
    r.covariates = s.covariates;
    for (const auto& v : s.visits)
      if (v.time <= landmark) r.visits.push_back(v);
    r.landmark = landmark;
    r.horizons = {horizon};
    r.m_use = m_use;
    r.mh_iterations = mh_iterations;
    r.seed = make_rng(seed, static_cast<std::uint64_t>(i) + 1)();
    const auto effects = sample_subject_effects(r, archive);
    const auto curve = predict_risk(r, archive, effects);
    out.push_back({s.id, curve.points.front().risk.mean, s.observed_time, s.event});
  }
  return out;
}

}  // namespace jointrait
