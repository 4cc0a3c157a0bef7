#pragma once

#include <stdexcept>
#include <string>

namespace jointrait {

/// Invalid model spec, design, or configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input data. `field()` names the offending field, e.g.
/// "visits[2].time" or "covariates.x1".
class DataError : public std::runtime_error {
 public:
  DataError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)), message_(message) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string field_;
  std::string message_;
};

}  // namespace jointrait
