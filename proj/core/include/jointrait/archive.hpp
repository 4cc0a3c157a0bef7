#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "jointrait/model_spec.hpp"
#include "jointrait/parameters.hpp"
#include "jointrait/priors.hpp"

namespace jointrait {

struct ChainConfig {
  int n_chains = 2;
  int n_iter = 2000;
  int n_burnin = 1000;
  std::uint64_t seed = 1;
  int thin = 1;
  int adapt_window = 50;  // iterations between proposal-covariance refreshes
  bool fix_association = false;  // hold ν at zero
  bool parallel = true;

  void validate() const;
};

struct Diagnostics {
  std::vector<std::string> parameters;
  std::vector<double> rhat;
  double max_rhat = 1.0;
  std::map<std::string, double> acceptance;  // block name -> mean rate over chains
  double min_acceptance = 0.0;
  double max_acceptance = 0.0;
  std::vector<std::string> warnings;
};

/// Summary served by the model store and stored in the .jma header.
struct ArchiveManifest {
  std::string id;
  std::string spec_hash;
  std::optional<std::string> created;
  int n_draws = 0;
  double max_rhat = 1.0;
  double min_acceptance = 0.0;
  double max_acceptance = 0.0;
};

/// A fitted model: the model spec, M post-burn-in draws pooled over chains, the
/// training subjects' random effects per draw, and diagnostics.
struct PosteriorArchive {
  std::string id;
  std::optional<std::string> created;
  ModelSpec spec;
  PriorSpec priors;
  ChainConfig config;
  std::vector<ParameterDraw> draws;
  std::vector<int> chain;  // chain index of each draw
  std::vector<std::string> subject_ids;
  int q = 0;
  std::vector<double> effects;  // draw-major M x n x q

  Diagnostics diagnostics;

  int n_draws() const { return static_cast<int>(draws.size()); }
  Eigen::VectorXd subject_effect(int draw, int subject) const;
  ArchiveManifest manifest() const;
  std::string spec_hash() const;
  /// Content hash over spec, config and draw values; deterministic.
  std::string compute_id() const;
};

inline constexpr std::uint32_t kArchiveFormatVersion = 1;

/// `.jma` layout (all integers little-endian):
///   8 bytes  magic "JMARCHIV"
///   u32      format version
///   u64      manifest length L
///   L bytes  manifest JSON (id, spec, priors, config, columns, diagnostics, ..)
///   u64      parameter blob length in bytes, then M x P float64 (draw-major)
///   u64      effects blob length in bytes, then M x n x q float64
void write_archive(const PosteriorArchive& archive, const std::string& path);
PosteriorArchive read_archive(const std::string& path);

std::string sha256_hex(const std::string& bytes);

nlohmann::json to_json(const PriorSpec& priors);
PriorSpec prior_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChainConfig& config);
ChainConfig chain_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ArchiveManifest& manifest);
nlohmann::json to_json(const Diagnostics& diagnostics);

}  // namespace jointrait
