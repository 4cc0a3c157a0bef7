#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include <jointrait/archive.hpp>
#include <jointrait/prediction.hpp>

namespace jointrait::service {

/// Parses a prediction body
///   {id?, covariates: {name: x}, visits: [{time, outcomes: {name: y|null}}],
///    landmark, horizons: [..], seed?, m_use?, mh_iterations?}
/// and validates it against `spec`. Throws DataError naming the field.
PredictionRequest request_from_json(const nlohmann::json& body, const ModelSpec& spec);

/// Effects, risk curve and trajectory bands for one request. Shared by the
/// CLI and the HTTP service so both produce the same bytes.
nlohmann::json run_prediction(const PosteriorArchive& archive, const PredictionRequest& request);

nlohmann::json manifest_json(const PosteriorArchive& archive);
nlohmann::json model_detail_json(const PosteriorArchive& archive);

/// Consistent JSON dump for artifacts and responses.
std::string dump(const nlohmann::json& j);

}  // namespace jointrait::service
