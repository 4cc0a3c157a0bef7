#include "jointrait/data.hpp"

#include <cmath>

#include "jointrait/error.hpp"

namespace jointrait {

double covariate_value(const Covariates& covariates, const std::string& name) {
  auto it = covariates.find(name);
  if (it == covariates.end()) throw DataError("covariates." + name, "missing covariate referenced by the design");
  if (!std::isfinite(it->second)) throw DataError("covariates." + name, "covariate is not finite");
  return it->second;
}

void validate_subject(const SubjectRecord& subject, const ModelSpec& spec, bool require_survival,
                      const std::string& prefix) {
  for (const auto& name : spec.covariate_names()) {
    auto it = subject.covariates.find(name);
    if (it == subject.covariates.end())
      throw DataError(prefix + "covariates." + name, "missing covariate referenced by the design");
    if (!std::isfinite(it->second)) throw DataError(prefix + "covariates." + name, "covariate is not finite");
  }
  for (std::size_t j = 0; j < subject.visits.size(); ++j) {
    const auto& v = subject.visits[j];
    const std::string field = prefix + "visits[" + std::to_string(j) + "]";
    if (!std::isfinite(v.time) || v.time < 0.0) throw DataError(field + ".time", "visit time must be finite and >= 0");
    if (j > 0 && !(v.time > subject.visits[j - 1].time))
      throw DataError(field + ".time", "visit times must be strictly increasing");
    if (require_survival && v.time > subject.observed_time)
      throw DataError(field + ".time", "visit after the observed event/censoring time");
    if (static_cast<int>(v.values.size()) != spec.n_outcomes())
      throw DataError(field + ".outcomes", "expected one slot per model outcome");
    for (int k = 0; k < spec.n_outcomes(); ++k) {
      if (!v.values[k]) continue;
      const double y = *v.values[k];
      const auto& o = spec.outcomes[k];
      const std::string vf = field + ".outcomes." + o.name;
      if (!std::isfinite(y)) throw DataError(vf, "value is not finite");
      if (o.kind == OutcomeKind::binary && y != 0.0 && y != 1.0) throw DataError(vf, "binary value must be 0 or 1");
      if (o.kind == OutcomeKind::ordinal && (y != std::floor(y) || y < 1.0 || y > o.n_categories))
        throw DataError(vf, "ordinal value must be an integer in 1.." + std::to_string(o.n_categories));
    }
  }
  if (require_survival) {
    if (!std::isfinite(subject.observed_time) || !(subject.observed_time > 0.0))
      throw DataError(prefix + "time", "observed time must be > 0");
    if (subject.event != 0 && subject.event != 1) throw DataError(prefix + "event", "event indicator must be 0 or 1");
  }
}

void validate_dataset(const Dataset& data, const ModelSpec& spec) {
  for (std::size_t i = 0; i < data.subjects.size(); ++i)
    validate_subject(data.subjects[i], spec, true, "subjects[" + data.subjects[i].id + "].");
}

}  // namespace jointrait
