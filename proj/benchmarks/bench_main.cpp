#include <cmath>
#include <vector>

#include <benchmark/benchmark.h>

#include <jointrait/jointrait.hpp>

using namespace jointrait;

namespace {

SimulatedData scenario_data(int n) {
  auto s = SimScenario::standard();
  s.n = n;
  s.seed = 42;
  return generate_dataset(s);
}

std::vector<Eigen::VectorXd> true_effects(const SimulatedData& sim) {
  std::vector<Eigen::VectorXd> u;
  for (const auto& t : sim.truth) u.push_back(t.u);
  return u;
}

void BM_CumulativeHazard(benchmark::State& state) {
  const auto spec = SimScenario::model_spec();
  const auto truth = SimScenario::standard().truth;
  SubjectEffects e;
  e.u = Eigen::Vector2d(0.3, 0.05);
  const Covariates cov{{"x1", 1}, {"x2", 55}};
  for (auto _ : state) benchmark::DoNotOptimize(cumulative_hazard(segmentize(cov, 18.0, truth, e, spec)));
}
BENCHMARK(BM_CumulativeHazard);

void BM_LogPosterior(benchmark::State& state) {
  const auto sim = scenario_data(static_cast<int>(state.range(0)));
  const auto spec = SimScenario::model_spec();
  const auto data = PreparedData::build(sim.data, spec);
  const auto truth = SimScenario::standard().truth;
  const auto u = true_effects(sim);
  for (auto _ : state) benchmark::DoNotOptimize(log_posterior(data, truth, u, PriorSpec{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LogPosterior)->Arg(100)->Arg(300);

void BM_GradLogPosterior(benchmark::State& state) {
  const auto sim = scenario_data(static_cast<int>(state.range(0)));
  const auto spec = SimScenario::model_spec();
  const auto data = PreparedData::build(sim.data, spec);
  const ParameterCodec codec(spec);
  const auto truth = SimScenario::standard().truth;
  const auto u = true_effects(sim);
  for (auto _ : state) benchmark::DoNotOptimize(grad_log_posterior(data, codec, truth, u, PriorSpec{}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GradLogPosterior)->Arg(100)->Arg(300);

void BM_Fit(benchmark::State& state) {
  const auto sim = scenario_data(100);
  ChainConfig config;
  config.n_iter = static_cast<int>(state.range(0));
  config.n_burnin = config.n_iter / 2;
  for (auto _ : state) benchmark::DoNotOptimize(fit(sim.data, SimScenario::model_spec(), PriorSpec{}, config));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Fit)->Arg(100)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const auto spec = SimScenario::model_spec();
  PosteriorArchive archive;
  archive.spec = spec;
  archive.draws.assign(static_cast<std::size_t>(state.range(0)), SimScenario::standard().truth);
  archive.chain.assign(archive.draws.size(), 0);
  archive.q = 2;
  PredictionRequest req;
  req.covariates = {{"x1", 1}, {"x2", 60}};
  Visit v;
  v.time = 0.0;
  v.values = {14.0, 3.0, 2.0};
  req.visits.push_back(v);
  v.time = 3.0;
  v.values = {17.0, 3.0, 4.0};
  req.visits.push_back(v);
  req.landmark = 6.0;
  req.horizons = {9.0, 12.0};
  for (auto _ : state) {
    const auto effects = sample_subject_effects(req, archive);
    benchmark::DoNotOptimize(predict_risk(req, archive, effects));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Predict)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
