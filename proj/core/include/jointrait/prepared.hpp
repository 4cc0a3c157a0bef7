#pragma once

#include <string>
#include <vector>

#include "jointrait/data.hpp"
#include "jointrait/latent_trait.hpp"
#include "jointrait/model_spec.hpp"

namespace jointrait {

struct Observation {
  int visit = 0;
  int outcome = 0;
  double value = 0.0;
};

/// A subject with its design columns and non-missing observations laid out
/// for repeated likelihood evaluation.
struct PreparedSubject {
  std::string id;
  DesignRows rows;
  std::vector<double> visit_times;
  std::vector<Observation> observations;
  double observed_time = 0.0;
  int event = 0;

  static PreparedSubject build(const SubjectRecord& subject, const ModelSpec& spec);
};

struct PreparedData {
  ModelSpec spec;
  std::vector<PreparedSubject> subjects;

  static PreparedData build(const Dataset& data, const ModelSpec& spec);
  int n() const { return static_cast<int>(subjects.size()); }
};

}  // namespace jointrait
