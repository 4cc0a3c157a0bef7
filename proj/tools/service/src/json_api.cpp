#include "jointrait_service/json_api.hpp"

#include <cmath>
#include <limits>

#include <jointrait/error.hpp>

namespace jointrait::service {

namespace {

using nlohmann::json;

double number_at(const json& j, const std::string& field) {
  if (!j.is_number()) throw DataError(field, "must be a number");
  return j.get<double>();
}

template <typename Int>
Int integer_at(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw DataError(field, "must be an integer");
  if constexpr (std::is_unsigned_v<Int>) {
    if (j.is_number_unsigned()) return j.get<Int>();
    if (j.get<long long>() < 0) throw DataError(field, "must be nonnegative");
  }
  return j.get<Int>();
}

json band_json(const Band& b) {
  return {{"mean", b.mean}, {"median", b.median}, {"lower", b.lower}, {"upper", b.upper}};
}

}  // namespace

PredictionRequest request_from_json(const json& body, const ModelSpec& spec) {
  if (!body.is_object()) throw DataError("body", "must be a JSON object");
  PredictionRequest r;
  if (body.contains("id")) {
    if (!body["id"].is_string()) throw DataError("id", "must be a string");
    r.id = body["id"].get<std::string>();
  }
  if (body.contains("covariates")) {
    const auto& c = body["covariates"];
    if (!c.is_object()) throw DataError("covariates", "must be an object");
    for (const auto& [name, value] : c.items()) r.covariates[name] = number_at(value, "covariates." + name);
  }
  if (body.contains("visits")) {
    const auto& vs = body["visits"];
    if (!vs.is_array()) throw DataError("visits", "must be an array");
    for (std::size_t j = 0; j < vs.size(); ++j) {
      const std::string f = "visits[" + std::to_string(j) + "]";
      const auto& v = vs[j];
      if (!v.is_object()) throw DataError(f, "must be an object");
      if (!v.contains("time")) throw DataError(f + ".time", "is required");
      Visit visit;
      visit.time = number_at(v["time"], f + ".time");
      visit.values.assign(spec.n_outcomes(), std::nullopt);
      if (v.contains("outcomes")) {
        const auto& o = v["outcomes"];
        if (!o.is_object()) throw DataError(f + ".outcomes", "must be an object");
        for (const auto& [name, value] : o.items()) {
          const std::string of = f + ".outcomes." + name;
          const int k = spec.outcome_index(name);
          if (k < 0) throw DataError(of, "unknown outcome");
          if (!value.is_null()) visit.values[k] = number_at(value, of);
        }
      }
      r.visits.push_back(std::move(visit));
    }
  }
  if (!body.contains("landmark")) throw DataError("landmark", "is required");
  r.landmark = number_at(body["landmark"], "landmark");
  if (!body.contains("horizons")) throw DataError("horizons", "is required");
  const auto& hs = body["horizons"];
  if (!hs.is_array()) throw DataError("horizons", "must be an array");
  for (std::size_t h = 0; h < hs.size(); ++h) r.horizons.push_back(number_at(hs[h], "horizons[" + std::to_string(h) + "]"));
  if (body.contains("seed")) r.seed = integer_at<std::uint64_t>(body["seed"], "seed");
  if (body.contains("m_use")) r.m_use = integer_at<int>(body["m_use"], "m_use");
  if (body.contains("mh_iterations")) r.mh_iterations = integer_at<int>(body["mh_iterations"], "mh_iterations");
  validate_request(r, spec);
  return r;
}

json run_prediction(const PosteriorArchive& archive, const PredictionRequest& request) {
  const auto effects = sample_subject_effects(request, archive);
  const auto risk = predict_risk(request, archive, effects);
  const auto traj = predict_trajectory(request, archive, effects);

  auto risk_curve = json::array();
  for (const auto& p : risk.points) {
    auto e = band_json(p.risk);
    e["horizon"] = p.horizon;
    risk_curve.push_back(e);
  }
  auto trajectories = json::array();
  for (const auto& o : traj.outcomes) {
    auto points = json::array();
    for (const auto& p : o.points) {
      auto e = band_json(p.value);
      e["horizon"] = p.horizon;
      e["retrodiction"] = p.retrodiction;
      if (!p.category_probs.empty()) {
        auto cats = json::array();
        for (std::size_t l = 0; l < p.category_probs.size(); ++l) {
          auto c = band_json(p.category_probs[l]);
          c["category"] = l + 1;
          cats.push_back(c);
        }
        e["category_probs"] = cats;
      }
      points.push_back(e);
    }
    trajectories.push_back({{"outcome", o.outcome}, {"kind", to_string(o.kind)}, {"points", points}});
  }
  auto warnings = json::array();
  if (risk.warning)
    warnings.push_back(std::to_string(risk.skipped_draws) + " of " +
                       std::to_string(risk.skipped_draws + risk.used_draws) +
                       " draws skipped because the hazard overflowed");
  return {{"model_id", archive.id},
          {"seed", request.seed},
          {"id", request.id},
          {"landmark", request.landmark},
          {"risk_curve", risk_curve},
          {"trajectories", trajectories},
          {"skipped_draw_fraction", risk.skipped_fraction},
          {"used_draws", risk.used_draws},
          {"warnings", warnings}};
}

json manifest_json(const PosteriorArchive& archive) { return to_json(archive.manifest()); }

json model_detail_json(const PosteriorArchive& archive) {
  return {{"id", archive.id},
          {"manifest", manifest_json(archive)},
          {"spec", to_json(archive.spec)},
          {"priors", to_json(archive.priors)},
          {"config", to_json(archive.config)},
          {"diagnostics", to_json(archive.diagnostics)}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace jointrait::service
