#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jointrait/model_spec.hpp"

namespace jointrait {

using Covariates = std::map<std::string, double>;

struct Visit {
  double time = 0.0;
  std::vector<std::optional<double>> values;  // aligned with ModelSpec::outcomes
};

struct SubjectRecord {
  std::string id;
  Covariates covariates;
  std::vector<Visit> visits;
  double observed_time = 0.0;
  int event = 0;
};

struct Dataset {
  std::vector<SubjectRecord> subjects;
};

/// Checks visit ordering and value domains against the model spec. When
/// `require_survival` is set, also checks t_i > 0, δ_i ∈ {0,1} and that all
/// visits fall at or before t_i. Throws DataError naming the offending field.
void validate_subject(const SubjectRecord& subject, const ModelSpec& spec, bool require_survival = true,
                      const std::string& prefix = "");
void validate_dataset(const Dataset& data, const ModelSpec& spec);

double covariate_value(const Covariates& covariates, const std::string& name);

}  // namespace jointrait
