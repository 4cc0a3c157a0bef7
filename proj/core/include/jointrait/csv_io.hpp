#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jointrait/data.hpp"
#include "jointrait/evaluation.hpp"
#include "jointrait/model_spec.hpp"

namespace jointrait {

/// Dataset directory layout:
///   longitudinal.csv  id,time,outcome,value   (long format; empty value = missing)
///   survival.csv      id,time,event
///   covariates.csv    id,<name>,<name>,..
/// Subjects are ordered as in survival.csv.
Dataset read_dataset(const std::string& dir, const ModelSpec& spec);
void write_dataset(const std::string& dir, const Dataset& data, const ModelSpec& spec);

/// id,risk,time,event
std::vector<EvalRecord> read_predictions(const std::string& path);
void write_predictions(const std::string& path, const std::vector<EvalRecord>& records);

/// Shortest round-trip text for a double.
std::string format_double(double x);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace jointrait
