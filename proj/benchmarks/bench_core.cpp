#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "ppsynth/dataset.hpp"
#include "ppsynth/diagnostics.hpp"
#include "ppsynth/grammar.hpp"
#include "ppsynth/inference.hpp"
#include "ppsynth/model.hpp"
#include "ppsynth/numutil.hpp"

namespace {

std::string model_text() {
  std::ifstream in(std::string(PPSYNTH_MODELS_DIR) + "/eight_schools_noncentered.ppl");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ppsynth::BoundModel bound_model() {
  auto parsed = ppsynth::parse_program_text(model_text());
  auto data = ppsynth::builtin_dataset("eight_schools");
  auto model = ppsynth::BoundModel::bind(*parsed.program, *data,
                                         ppsynth::DistributionRegistry::builtin(), nullptr);
  return *model;
}

void bm_parse(benchmark::State& state) {
  std::string text = model_text();
  for (auto _ : state) {
    auto out = ppsynth::parse_program_text(text);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(bm_parse);

void bm_logp_grad(benchmark::State& state) {
  ppsynth::BoundModel model = bound_model();
  std::vector<double> theta(static_cast<std::size_t>(model.dimension()), 0.1);
  for (auto _ : state) {
    auto g = model.logp_grad(theta);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(bm_logp_grad);

void bm_leapfrog(benchmark::State& state) {
  ppsynth::BoundModel model = bound_model();
  std::size_t dim = static_cast<std::size_t>(model.dimension());
  std::vector<double> inv_mass(dim, 1.0);
  ppsynth::PhasePoint z;
  z.q.assign(dim, 0.1);
  z.p.assign(dim, 0.3);
  auto g = model.logp_grad(z.q);
  z.grad = g.grad;
  z.logp = g.logp;
  for (auto _ : state) {
    ppsynth::leapfrog(model, z, 0.1, inv_mass);
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(bm_leapfrog);

void bm_psis_loo(benchmark::State& state) {
  ppsynth::Rng rng(7);
  std::vector<std::vector<double>> loglik(4000, std::vector<double>(8));
  for (auto& row : loglik)
    for (double& x : row) x = -2.0 + 0.3 * rng.normal();
  for (auto _ : state) {
    auto r = ppsynth::psis_loo(loglik);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(bm_psis_loo);

void bm_nuts_short(benchmark::State& state) {
  ppsynth::BoundModel model = bound_model();
  ppsynth::SamplerConfig cfg;
  cfg.chains = 2;
  cfg.draws = 25;
  cfg.tune = 25;
  cfg.seed = 11;
  for (auto _ : state) {
    auto draws = ppsynth::nuts_sample(model, cfg, nullptr);
    benchmark::DoNotOptimize(draws);
  }
}
BENCHMARK(bm_nuts_short);

}  // namespace

BENCHMARK_MAIN();
