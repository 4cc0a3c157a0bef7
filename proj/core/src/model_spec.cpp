#include "jointrait/model_spec.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "jointrait/error.hpp"

namespace jointrait {

Term Term::parse(const std::string& text) {
  Term term;
  std::size_t start = 0;
  bool any = false;
  while (start <= text.size()) {
    std::size_t end = text.find(':', start);
    if (end == std::string::npos) end = text.size();
    std::string factor = text.substr(start, end - start);
    factor.erase(0, factor.find_first_not_of(" \t"));
    factor.erase(factor.find_last_not_of(" \t") + 1);
    if (factor.empty()) throw ConfigError("empty factor in design term '" + text + "'");
    if (factor == "time") {
      if (term.times_time) throw ConfigError("term '" + text + "' is quadratic in time");
      term.times_time = true;
    } else if (factor != "1") {
      if (!term.covariate.empty()) throw ConfigError("term '" + text + "' multiplies two covariates");
      term.covariate = factor;
    }
    any = true;
    start = end + 1;
  }
  if (!any) throw ConfigError("empty design term");
  return term;
}

std::string Term::to_string() const {
  if (covariate.empty()) return times_time ? "time" : "1";
  return times_time ? covariate + ":time" : covariate;
}

int ModelSpec::assoc_dim() const {
  switch (association) {
    case AssociationForm::shared_latent: return 1;
    case AssociationForm::latent_and_slope: return 2;
    case AssociationForm::random_effects: return design.q();
  }
  return 0;
}

int ModelSpec::outcome_index(const std::string& name) const {
  for (int k = 0; k < n_outcomes(); ++k)
    if (outcomes[k].name == name) return k;
  return -1;
}

std::vector<std::string> ModelSpec::covariate_names() const {
  std::set<std::string> names;
  for (const auto* terms : {&design.fixed, &design.random, &design.survival})
    for (const auto& t : *terms)
      if (!t.covariate.empty()) names.insert(t.covariate);
  return {names.begin(), names.end()};
}

void validate_knots(const std::vector<double>& knots, const std::string& what) {
  for (std::size_t r = 0; r < knots.size(); ++r) {
    if (!std::isfinite(knots[r])) throw ConfigError(what + " contain a non-finite value");
    if (knots[r] < 0.0) throw ConfigError(what + " must be nonnegative");
    if (r > 0 && !(knots[r] > knots[r - 1])) throw ConfigError(what + " must be strictly increasing");
  }
}

void ModelSpec::validate() const {
  if (outcomes.empty()) throw ConfigError("model has no outcomes");
  int anchors = 0;
  std::set<std::string> names;
  for (const auto& o : outcomes) {
    if (o.name.empty()) throw ConfigError("outcome with empty name");
    if (!names.insert(o.name).second) throw ConfigError("duplicate outcome '" + o.name + "'");
    if (o.kind == OutcomeKind::ordinal && o.n_categories < 3)
      throw ConfigError("ordinal outcome '" + o.name + "' needs at least 3 categories");
    if (o.kind != OutcomeKind::ordinal && o.n_categories != 0)
      throw ConfigError("outcome '" + o.name + "' is not ordinal but declares categories");
    if (o.is_anchor) {
      ++anchors;
      if (o.kind != OutcomeKind::ordinal) throw ConfigError("anchor outcome '" + o.name + "' must be ordinal");
    }
  }
  if (anchors != 1) throw ConfigError("exactly one ordinal outcome must be the identifiability anchor");
  if (design.fixed.empty()) throw ConfigError("design has no fixed-effect terms");
  for (const auto& t : design.survival)
    if (t.times_time) throw ConfigError("survival term '" + t.to_string() + "' must be time-independent");
  validate_knots(design.theta_knots, "theta_knots");
  if (design.hazard_knots) validate_knots(*design.hazard_knots, "hazard_knots");
  if (association == AssociationForm::random_effects && design.q() == 0)
    throw ConfigError("random-effects association requires random-effect terms");
}

std::string to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::continuous: return "continuous";
    case OutcomeKind::binary: return "binary";
    case OutcomeKind::ordinal: return "ordinal";
  }
  return "?";
}

std::string to_string(AssociationForm form) {
  switch (form) {
    case AssociationForm::shared_latent: return "M1";
    case AssociationForm::latent_and_slope: return "M2";
    case AssociationForm::random_effects: return "M3";
  }
  return "?";
}

AssociationForm parse_association(const std::string& text) {
  if (text == "M1" || text == "shared_latent") return AssociationForm::shared_latent;
  if (text == "M2" || text == "latent_and_slope") return AssociationForm::latent_and_slope;
  if (text == "M3" || text == "random_effects") return AssociationForm::random_effects;
  throw ConfigError("unknown association form '" + text + "'");
}

namespace {

OutcomeKind parse_kind(const std::string& text) {
  if (text == "continuous") return OutcomeKind::continuous;
  if (text == "binary") return OutcomeKind::binary;
  if (text == "ordinal") return OutcomeKind::ordinal;
  throw ConfigError("unknown outcome kind '" + text + "'");
}

std::vector<Term> parse_terms(const nlohmann::json& j, const char* key) {
  std::vector<Term> terms;
  if (!j.contains(key)) return terms;
  if (!j.at(key).is_array()) throw ConfigError(std::string("design.") + key + " must be an array of term strings");
  for (const auto& item : j.at(key)) {
    if (!item.is_string()) throw ConfigError(std::string("design.") + key + " must contain strings");
    terms.push_back(Term::parse(item.get<std::string>()));
  }
  return terms;
}

nlohmann::json terms_json(const std::vector<Term>& terms) {
  auto out = nlohmann::json::array();
  for (const auto& t : terms) out.push_back(t.to_string());
  return out;
}

}  // namespace

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["format"] = "jointrait-model-spec";
  j["version"] = 1;
  auto outcomes = nlohmann::json::array();
  for (const auto& o : spec.outcomes) {
    nlohmann::json oj{{"name", o.name}, {"kind", to_string(o.kind)}};
    if (o.kind == OutcomeKind::ordinal) oj["categories"] = o.n_categories;
    if (o.is_anchor) oj["anchor"] = true;
    outcomes.push_back(oj);
  }
  j["outcomes"] = outcomes;
  nlohmann::json d;
  d["fixed"] = terms_json(spec.design.fixed);
  d["random"] = terms_json(spec.design.random);
  d["survival"] = terms_json(spec.design.survival);
  d["theta_knots"] = spec.design.theta_knots;
  if (spec.design.hazard_knots)
    d["hazard_knots"] = *spec.design.hazard_knots;
  else
    d["hazard_knots"] = nullptr;
  d["baseline_slope"] = spec.design.baseline_slope;
  j["design"] = d;
  j["association"] = to_string(spec.association);
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  try {
    if (j.contains("version") && j.at("version").get<int>() != 1)
      throw ConfigError("unsupported model spec version " + j.at("version").dump());
    for (const auto& oj : j.at("outcomes")) {
      OutcomeSpec o;
      o.name = oj.at("name").get<std::string>();
      o.kind = parse_kind(oj.at("kind").get<std::string>());
      if (o.kind == OutcomeKind::ordinal) o.n_categories = oj.at("categories").get<int>();
      o.is_anchor = oj.value("anchor", false);
      spec.outcomes.push_back(o);
    }
    const auto& d = j.at("design");
    spec.design.fixed = parse_terms(d, "fixed");
    spec.design.random = parse_terms(d, "random");
    spec.design.survival = parse_terms(d, "survival");
    if (d.contains("theta_knots")) spec.design.theta_knots = d.at("theta_knots").get<std::vector<double>>();
    if (d.contains("hazard_knots") && !d.at("hazard_knots").is_null())
      spec.design.hazard_knots = d.at("hazard_knots").get<std::vector<double>>();
    spec.design.baseline_slope = d.value("baseline_slope", true);
    spec.association = parse_association(j.value("association", std::string("M1")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace jointrait
