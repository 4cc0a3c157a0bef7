#include "jointrait/prepared.hpp"

namespace jointrait {

PreparedSubject PreparedSubject::build(const SubjectRecord& subject, const ModelSpec& spec) {
  PreparedSubject p;
  p.id = subject.id;
  p.rows = DesignRows::build(subject.covariates, spec.design);
  p.observed_time = subject.observed_time;
  p.event = subject.event;
  for (std::size_t j = 0; j < subject.visits.size(); ++j) {
    const auto& v = subject.visits[j];
    p.visit_times.push_back(v.time);
    for (int k = 0; k < spec.n_outcomes() && k < static_cast<int>(v.values.size()); ++k)
      if (v.values[k]) p.observations.push_back({static_cast<int>(j), k, *v.values[k]});
  }
  return p;
}

PreparedData PreparedData::build(const Dataset& data, const ModelSpec& spec) {
  PreparedData out;
  out.spec = spec;
  out.subjects.reserve(data.subjects.size());
  for (const auto& s : data.subjects) out.subjects.push_back(PreparedSubject::build(s, spec));
  return out;
}

}  // namespace jointrait
