#include "jointrait/archive.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <openssl/evp.h>

#include "jointrait/error.hpp"
#include "jointrait/posterior.hpp"

namespace jointrait {

static_assert(std::endian::native == std::endian::little, "the .jma writer assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'J', 'M', 'A', 'R', 'C', 'H', 'I', 'V'};

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ConfigError("archive is truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::string doubles_bytes(const std::vector<double>& v) {
  std::string out(v.size() * sizeof(double), '\0');
  if (!v.empty()) std::memcpy(out.data(), v.data(), out.size());
  return out;
}

std::vector<double> parameter_matrix(const PosteriorArchive& a) {
  const ParameterCodec codec(a.spec, a.config.fix_association);
  std::vector<double> out;
  out.reserve(a.draws.size() * codec.column_names().size());
  for (const auto& d : a.draws) {
    const auto row = codec.flatten(d);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

// JSON has no infinities; R-hat may be +∞ and is written as a string.
nlohmann::json number_or_text(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

double number_from(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json manifest_json(const PosteriorArchive& a) {
  nlohmann::json j;
  j["format"] = "jointrait-archive";
  j["version"] = kArchiveFormatVersion;
  j["id"] = a.id;
  j["spec_hash"] = a.spec_hash();
  j["created"] = a.created ? nlohmann::json(*a.created) : nlohmann::json(nullptr);
  j["spec"] = to_json(a.spec);
  j["priors"] = to_json(a.priors);
  j["config"] = to_json(a.config);
  j["columns"] = ParameterCodec(a.spec, a.config.fix_association).column_names();
  j["n_draws"] = a.n_draws();
  j["chain"] = a.chain;
  j["subject_ids"] = a.subject_ids;
  j["q"] = a.q;
  j["diagnostics"] = to_json(a.diagnostics);
  return j;
}

}  // namespace

void ChainConfig::validate() const {
  if (n_chains < 2) throw ConfigError("at least two chains are required for R-hat");
  if (n_burnin < 0) throw ConfigError("burn-in must be nonnegative");
  if (n_iter <= n_burnin) throw ConfigError("iterations must exceed burn-in");
  if (thin < 1) throw ConfigError("thinning must be at least 1");
  if (adapt_window < 1) throw ConfigError("adaptation window must be at least 1");
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

Eigen::VectorXd PosteriorArchive::subject_effect(int draw, int subject) const {
  const std::size_t n = subject_ids.size();
  const std::size_t base = (static_cast<std::size_t>(draw) * n + static_cast<std::size_t>(subject)) * q;
  return Eigen::Map<const Eigen::VectorXd>(effects.data() + base, q);
}

std::string PosteriorArchive::spec_hash() const { return sha256_hex(to_json(spec).dump()); }

std::string PosteriorArchive::compute_id() const {
  std::string content = to_json(spec).dump();
  content += to_json(priors).dump();
  content += to_json(config).dump();
  content += nlohmann::json(subject_ids).dump();
  content += nlohmann::json(chain).dump();
  content += doubles_bytes(parameter_matrix(*this));
  content += doubles_bytes(effects);
  return sha256_hex(content).substr(0, 16);
}

ArchiveManifest PosteriorArchive::manifest() const {
  ArchiveManifest m;
  m.id = id;
  m.spec_hash = spec_hash();
  m.created = created;
  m.n_draws = n_draws();
  m.max_rhat = diagnostics.max_rhat;
  m.min_acceptance = diagnostics.min_acceptance;
  m.max_acceptance = diagnostics.max_acceptance;
  return m;
}

void write_archive(const PosteriorArchive& archive, const std::string& path) {
  const std::string manifest = manifest_json(archive).dump();
  const auto params = parameter_matrix(archive);
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kArchiveFormatVersion);
  put<std::uint64_t>(out, manifest.size());
  out += manifest;
  put<std::uint64_t>(out, params.size() * sizeof(double));
  out += doubles_bytes(params);
  put<std::uint64_t>(out, archive.effects.size() * sizeof(double));
  out += doubles_bytes(archive.effects);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write archive '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ConfigError("failed writing archive '" + path + "'");
}

PosteriorArchive read_archive(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open archive '" + path + "'");
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0)
    throw ConfigError("'" + path + "' is not a jointrait archive");
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(in, pos);
  if (version != kArchiveFormatVersion) throw ConfigError("unsupported archive version " + std::to_string(version));
  const auto mlen = take<std::uint64_t>(in, pos);
  if (pos + mlen > in.size()) throw ConfigError("archive is truncated");
  PosteriorArchive a;
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in.substr(pos, mlen));
    pos += mlen;
    a.id = m.at("id").get<std::string>();
    if (!m.at("created").is_null()) a.created = m.at("created").get<std::string>();
    a.spec = model_spec_from_json(m.at("spec"));
    a.priors = prior_spec_from_json(m.at("priors"));
    a.config = chain_config_from_json(m.at("config"));
    a.chain = m.at("chain").get<std::vector<int>>();
    a.subject_ids = m.at("subject_ids").get<std::vector<std::string>>();
    a.q = m.at("q").get<int>();
    const auto& d = m.at("diagnostics");
    a.diagnostics.parameters = d.at("parameters").get<std::vector<std::string>>();
    for (const auto& r : d.at("rhat")) a.diagnostics.rhat.push_back(number_from(r));
    a.diagnostics.max_rhat = number_from(d.at("max_rhat"));
    a.diagnostics.acceptance = d.at("acceptance").get<std::map<std::string, double>>();
    a.diagnostics.min_acceptance = d.at("min_acceptance").get<double>();
    a.diagnostics.max_acceptance = d.at("max_acceptance").get<double>();
    a.diagnostics.warnings = d.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed archive manifest: ") + e.what());
  }
  const ParameterCodec codec(a.spec, a.config.fix_association);
  const std::size_t P = codec.column_names().size();
  const int M = m.at("n_draws").get<int>();
  const auto pbytes = take<std::uint64_t>(in, pos);
  if (pbytes != static_cast<std::uint64_t>(M) * P * sizeof(double) || pos + pbytes > in.size())
    throw ConfigError("archive parameter block has the wrong size");
  std::vector<double> params(static_cast<std::size_t>(M) * P);
  if (pbytes) std::memcpy(params.data(), in.data() + pos, pbytes);
  pos += pbytes;
  const auto ebytes = take<std::uint64_t>(in, pos);
  if (ebytes != static_cast<std::uint64_t>(M) * a.subject_ids.size() * a.q * sizeof(double) || pos + ebytes > in.size())
    throw ConfigError("archive effects block has the wrong size");
  a.effects.resize(ebytes / sizeof(double));
  if (ebytes) std::memcpy(a.effects.data(), in.data() + pos, ebytes);
  a.draws.reserve(M);
  for (int r = 0; r < M; ++r)
    a.draws.push_back(codec.unflatten(std::span<const double>(params.data() + static_cast<std::size_t>(r) * P, P)));
  if (a.compute_id() != a.id) throw ConfigError("archive content does not match its id");
  return a;
}

nlohmann::json to_json(const PriorSpec& p) {
  return {{"location_variance", p.location_variance},
          {"loading_upper", p.loading_upper},
          {"increment_variance", p.increment_variance},
          {"ig_shape", p.ig_shape},
          {"ig_scale", p.ig_scale}};
}

PriorSpec prior_spec_from_json(const nlohmann::json& j) {
  PriorSpec p;
  p.location_variance = j.value("location_variance", p.location_variance);
  p.loading_upper = j.value("loading_upper", p.loading_upper);
  p.increment_variance = j.value("increment_variance", p.increment_variance);
  p.ig_shape = j.value("ig_shape", p.ig_shape);
  p.ig_scale = j.value("ig_scale", p.ig_scale);
  p.validate();
  return p;
}

nlohmann::json to_json(const ChainConfig& c) {
  return {{"n_chains", c.n_chains},     {"n_iter", c.n_iter},
          {"n_burnin", c.n_burnin},     {"seed", c.seed},
          {"thin", c.thin},             {"adapt_window", c.adapt_window},
          {"fix_association", c.fix_association}};
}

ChainConfig chain_config_from_json(const nlohmann::json& j) {
  ChainConfig c;
  c.n_chains = j.value("n_chains", c.n_chains);
  c.n_iter = j.value("n_iter", c.n_iter);
  c.n_burnin = j.value("n_burnin", c.n_burnin);
  c.seed = j.value("seed", c.seed);
  c.thin = j.value("thin", c.thin);
  c.adapt_window = j.value("adapt_window", c.adapt_window);
  c.fix_association = j.value("fix_association", c.fix_association);
  return c;
}

nlohmann::json to_json(const ArchiveManifest& m) {
  return {{"id", m.id},
          {"spec_hash", m.spec_hash},
          {"created", m.created ? nlohmann::json(*m.created) : nlohmann::json(nullptr)},
          {"n_draws", m.n_draws},
          {"max_rhat", number_or_text(m.max_rhat)},
          {"min_acceptance", m.min_acceptance},
          {"max_acceptance", m.max_acceptance}};
}

nlohmann::json to_json(const Diagnostics& d) {
  auto rhat = nlohmann::json::array();
  for (double r : d.rhat) rhat.push_back(number_or_text(r));
  return {{"parameters", d.parameters},         {"rhat", rhat},
          {"max_rhat", number_or_text(d.max_rhat)}, {"acceptance", d.acceptance},
          {"min_acceptance", d.min_acceptance}, {"max_acceptance", d.max_acceptance},
          {"warnings", d.warnings}};
}

}  // namespace jointrait
