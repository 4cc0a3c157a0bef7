#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <thread>

#include <jointrait/jointrait.hpp>
#include <jointrait_service/json_api.hpp>
#include <jointrait_service/service.hpp>

namespace jointrait::cli {

namespace {

using nlohmann::json;

struct SimulateArgs {
  int n = 800;
  std::uint64_t seed = 1;
  std::string out;
};

struct FitArgs {
  std::string data, spec, priors, out, created;
  ChainConfig config;
  bool quiet = false;
};

struct PredictArgs {
  std::string model, subject, data, out;
  std::optional<double> landmark;
  std::vector<double> horizons;
  std::optional<std::uint64_t> seed;
  int m_use = 0;
  int mh_iterations = 50;
};

struct EvaluateArgs {
  std::string predictions, out;
  EvalConfig config;
  std::string brier_km = "censoring";
};

struct ServeArgs {
  std::string store, ui;
  service::ServeOptions options;
};

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_text_file(path, text);
}

// ISO-8601 UTC from SOURCE_DATE_EPOCH, if set.
std::optional<std::string> epoch_timestamp() {
  const char* env = std::getenv("SOURCE_DATE_EPOCH");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const long long secs = std::strtoll(env, &end, 10);
  if (*end != '\0') throw ConfigError("SOURCE_DATE_EPOCH must be an integer");
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

int simulate(const SimulateArgs& a, std::ostream& err) {
  auto scenario = SimScenario::standard();
  scenario.n = a.n;
  scenario.seed = a.seed;
  const auto sim = generate_dataset(scenario);
  const auto spec = SimScenario::model_spec();
  write_dataset(a.out, sim.data, spec);
  const std::filesystem::path dir(a.out);
  write_text_file((dir / "truth.json").string(), service::dump(sim.truth_json(scenario)));
  write_text_file((dir / "spec.json").string(), service::dump(to_json(spec)));
  int events = 0;
  for (const auto& s : sim.data.subjects) events += s.event;
  err << "simulated " << a.n << " subjects (" << events << " events) into " << a.out << "\n";
  return 0;
}

int fit_model(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const auto spec = model_spec_from_json(read_json_file(a.spec));
  PriorSpec priors;
  if (!a.priors.empty()) priors = prior_spec_from_json(read_json_file(a.priors));
  const auto data = read_dataset(a.data, spec);
  a.config.validate();

  std::mutex mutex;
  const int every = std::max(1, a.config.n_iter / 10);
  ProgressFn progress;
  if (!a.quiet)
    progress = [&](int chain, int it) {
      if (it % every != 0 && it != a.config.n_iter) return;
      std::lock_guard lock(mutex);
      err << "chain " << chain + 1 << ": " << it << "/" << a.config.n_iter << "\n";
    };
  auto archive = fit(data, spec, priors, a.config, progress);
  if (!a.created.empty())
    archive.created = a.created;
  else
    archive.created = epoch_timestamp();
  write_archive(archive, a.out);

  const auto& d = archive.diagnostics;
  err << "archive " << archive.id << ": " << archive.n_draws() << " draws, max R-hat " << format_double(d.max_rhat)
      << ", acceptance " << format_double(d.min_acceptance) << ".." << format_double(d.max_acceptance) << "\n";
  for (const auto& w : d.warnings) err << "warning: " << w << "\n";
  out << archive.id << "\n";
  return 0;
}

int predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  const auto archive = read_archive(a.model);
  const std::uint64_t seed = a.seed.value_or(1);
  if (!a.data.empty()) {
    if (!a.landmark) throw DataError("landmark", "is required with --data");
    if (a.horizons.size() != 1) throw DataError("horizons", "exactly one horizon is required with --data");
    if (a.out.empty()) throw ConfigError("--out is required with --data");
    const auto data = read_dataset(a.data, archive.spec);
    const auto records =
        landmark_predictions(archive, data, *a.landmark, a.horizons[0], seed, a.m_use, a.mh_iterations);
    write_predictions(a.out, records);
    err << "wrote " << records.size() << " predictions to " << a.out << "\n";
    return 0;
  }
  json body = a.subject.empty() ? json::object() : read_json_file(a.subject);
  if (!body.is_object()) throw DataError("body", "subject file must hold a JSON object");
  if (a.landmark) body["landmark"] = *a.landmark;
  if (!a.horizons.empty()) body["horizons"] = a.horizons;
  if (a.seed || !body.contains("seed")) body["seed"] = seed;
  if (a.m_use) body["m_use"] = a.m_use;
  body["mh_iterations"] = a.mh_iterations;
  const auto request = service::request_from_json(body, archive.spec);
  const auto result = service::run_prediction(archive, request);
  for (const auto& w : result["warnings"]) err << "warning: " << w.get<std::string>() << "\n";
  write_or_print(a.out, service::dump(result), out);
  return 0;
}

int evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  auto config = a.config;
  if (a.brier_km == "censoring")
    config.brier_km = BrierKm::censoring;
  else if (a.brier_km == "event")
    config.brier_km = BrierKm::event;
  else
    throw ConfigError("--brier-km must be 'censoring' or 'event'");
  const auto records = read_predictions(a.predictions);
  const auto roc = roc_auc(records, config);
  const auto bs = brier(records, config);
  auto points = json::array();
  for (const auto& p : roc.points)
    points.push_back({{"cutoff", p.cutoff}, {"sensitivity", p.sensitivity}, {"specificity", p.specificity}});
  auto warnings = json::array();
  for (const auto& w : roc.warnings) warnings.push_back(w);
  for (const auto& w : bs.warnings) warnings.push_back(w);
  for (const auto& w : warnings) err << "warning: " << w.get<std::string>() << "\n";
  const json result = {{"landmark", config.landmark},
                       {"horizon", config.horizon},
                       {"auc", roc.defined ? json(roc.auc) : json(nullptr)},
                       {"bs", bs.defined ? json(bs.score) : json(nullptr)},
                       {"n_at_risk", bs.at_risk},
                       {"roc_points", points},
                       {"warnings", warnings}};
  write_or_print(a.out, service::dump(result), out);
  return 0;
}

int serve(const ServeArgs& a, std::ostream& err) {
  std::string dir = a.store;
  if (dir.empty())
    if (const char* env = std::getenv("JOINTRAIT_STORE")) dir = env;
  if (dir.empty()) throw ConfigError("no archive store: pass --store or set JOINTRAIT_STORE");

  service::ModelStore store;
  store.set_loading(true);
  service::Service svc(store);
  service::HttpServer server(svc, a.options);
  const int port = server.bind();
  err << "listening on " << a.options.bind << ":" << port << "\n";

  int status = 0;
  std::thread loader([&] {
    store.load_directory(dir);
    store.set_loading(false);
    for (const auto& e : store.errors()) err << "warning: " << e << "\n";
    if (store.size() == 0) {
      err << "error: no loadable archive in '" << dir << "'\n";
      status = 1;
      server.wait_until_ready();
      server.stop();
      return;
    }
    err << "loaded " << store.size() << " model(s)\n";
  });
  server.listen();
  loader.join();
  return status;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian joint model of multivariate longitudinal outcomes and a survival time"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a dataset from the standard scenario");
  c_sim->add_option("--n", sim.n, "Number of subjects")->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "Random seed");
  c_sim->add_option("--out", sim.out, "Output directory")->required();

  FitArgs fa;
  auto* c_fit = app.add_subcommand("fit", "Fit the joint model by MCMC");
  c_fit->add_option("--data", fa.data, "Dataset directory")->required();
  c_fit->add_option("--spec", fa.spec, "Model spec JSON")->required();
  c_fit->add_option("--priors", fa.priors, "Prior spec JSON");
  c_fit->add_option("--chains", fa.config.n_chains, "Number of chains");
  c_fit->add_option("--iter", fa.config.n_iter, "Iterations per chain");
  c_fit->add_option("--burnin", fa.config.n_burnin, "Burn-in iterations");
  c_fit->add_option("--thin", fa.config.thin, "Thinning");
  c_fit->add_option("--seed", fa.config.seed, "Random seed");
  c_fit->add_option("--adapt-window", fa.config.adapt_window, "Iterations between proposal refreshes");
  c_fit->add_flag("--fix-association", fa.config.fix_association, "Hold the association parameters at zero");
  c_fit->add_option("--created", fa.created, "Creation time recorded in the archive");
  c_fit->add_flag("--quiet", fa.quiet, "No progress output");
  c_fit->add_option("--out", fa.out, "Output archive (.jma)")->required();

  PredictArgs pa;
  auto* c_pred = app.add_subcommand("predict", "Dynamic prediction for a subject or a dataset");
  c_pred->add_option("--model", pa.model, "Archive (.jma)")->required();
  auto* o_subject = c_pred->add_option("--subject", pa.subject, "Subject history JSON");
  auto* o_data = c_pred->add_option("--data", pa.data, "Dataset directory (writes id,risk,time,event)");
  o_subject->excludes(o_data);
  c_pred->add_option("--landmark", pa.landmark, "Landmark time t");
  c_pred->add_option("--horizons", pa.horizons, "Comma-separated horizons t'")->delimiter(',');
  c_pred->add_option("--seed", pa.seed, "Random seed (default 1)");
  c_pred->add_option("--m-use", pa.m_use, "Number of archive draws to use (0 = all)");
  c_pred->add_option("--mh-iter", pa.mh_iterations, "Random-effect sampler steps per draw");
  c_pred->add_option("--out", pa.out, "Output file (default stdout)");

  EvaluateArgs ea;
  auto* c_eval = app.add_subcommand("evaluate", "Time-dependent AUC and Brier score");
  c_eval->add_option("--predictions", ea.predictions, "CSV with id,risk,time,event")->required();
  c_eval->add_option("--landmark", ea.config.landmark, "Landmark time t")->required();
  c_eval->add_option("--horizon", ea.config.horizon, "Horizon t'")->required();
  c_eval->add_option("--bandwidth", ea.config.bandwidth, "Kernel bandwidth on the risk scale");
  c_eval->add_option("--grid", ea.config.grid, "Number of ROC cutoffs (odd)");
  c_eval->add_option("--brier-km", ea.brier_km, "Brier weights: censoring or event");
  c_eval->add_option("--out", ea.out, "Output file (default stdout)");

  ServeArgs sa;
  auto* c_serve = app.add_subcommand("serve", "HTTP prediction service");
  c_serve->add_option("--store", sa.store, "Archive directory (default $JOINTRAIT_STORE)");
  c_serve->add_option("--bind", sa.options.bind, "Bind address");
  c_serve->add_option("--port", sa.options.port, "Port (0 = any)");
  c_serve->add_option("--ui", sa.options.ui_dir, "Static UI directory mounted at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    if (const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front())
      err << sub->help();
    return 2;
  }

  try {
    if (*c_sim) return simulate(sim, err);
    if (*c_fit) return fit_model(fa, out, err);
    if (*c_pred) return predict(pa, out, err);
    if (*c_eval) return evaluate(ea, out, err);
    if (*c_serve) return serve(sa, err);
  } catch (const DataError& e) {
    err << "data error: " << e.field() << ": " << e.message() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace jointrait::cli
