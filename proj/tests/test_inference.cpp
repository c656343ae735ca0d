#include "doctest.h"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ppsynth/dataset.hpp"
#include "ppsynth/grammar.hpp"
#include "ppsynth/inference.hpp"
#include "ppsynth/model.hpp"
#include "ppsynth/numutil.hpp"

using namespace ppsynth;

namespace {

BoundModel must_bind(const std::string& text, const Dataset& data) {
  ParseOutcome out = parse_program_text(text);
  REQUIRE(out.ok());
  BindError err;
  auto m = BoundModel::bind(*out.program, data, DistributionRegistry::builtin(), &err);
  REQUIRE_MESSAGE(m.has_value(), err.message);
  return *m;
}

Dataset normal_data(const std::vector<double>& y) {
  Dataset d;
  d.name = "obs";
  d.columns.push_back({"y", y, false});
  return d;
}

// wide prior, 20 observations: posterior for mu is analytically tractable
BoundModel conjugate_model() {
  std::vector<double> y;
  Rng rng(90210, 0);
  for (int i = 0; i < 20; ++i) y.push_back(2.0 + rng.normal());
  Dataset d = normal_data(y);
  return must_bind(
      "model { data { y: vector[20]; } prior { mu ~ Normal(0, 10); } "
      "likelihood { y ~ Normal(mu, 1); } }",
      d);
}

std::vector<double> flatten_coord(const PosteriorDraws& post, int p) {
  std::vector<double> out;
  for (const auto& chain : post.coord(p)) {
    out.insert(out.end(), chain.begin(), chain.end());
  }
  return out;
}

}  // namespace

TEST_CASE("leapfrog steps are reversible and volume preserving") {
  BoundModel m = conjugate_model();
  std::vector<double> inv_mass = {1.0};

  PhasePoint z;
  z.q = {0.7};
  z.p = {0.4};
  GradResult g = m.logp_grad(z.q);
  REQUIRE(g.ok);
  z.grad = g.grad;
  z.logp = g.logp;

  PhasePoint start = z;
  const double step = 0.05;
  for (int i = 0; i < 25; ++i) REQUIRE(leapfrog(m, z, step, inv_mass));

  // negate momentum, integrate back, recover the start
  for (double& p : z.p) p = -p;
  for (int i = 0; i < 25; ++i) REQUIRE(leapfrog(m, z, step, inv_mass));
  CHECK(std::abs(z.q[0] - start.q[0]) < 1e-8);
  CHECK(std::abs(-z.p[0] - start.p[0]) < 1e-8);
}

TEST_CASE("leapfrog conserves the Hamiltonian at small steps") {
  BoundModel m = conjugate_model();
  std::vector<double> inv_mass = {1.0};

  PhasePoint z;
  z.q = {1.9};
  z.p = {-0.8};
  GradResult g = m.logp_grad(z.q);
  REQUIRE(g.ok);
  z.grad = g.grad;
  z.logp = g.logp;

  double h0 = hamiltonian(z, inv_mass);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    REQUIRE(leapfrog(m, z, 0.01, inv_mass));
    worst = std::max(worst, std::abs(hamiltonian(z, inv_mass) - h0));
  }
  CHECK(worst < 1e-3);

  // halving the step size cuts the energy error by about four (2nd order)
  PhasePoint z2;
  z2.q = {1.9};
  z2.p = {-0.8};
  z2.grad = g.grad;
  z2.logp = g.logp;
  double worst2 = 0.0;
  for (int i = 0; i < 400; ++i) {
    REQUIRE(leapfrog(m, z2, 0.005, inv_mass));
    worst2 = std::max(worst2, std::abs(hamiltonian(z2, inv_mass) - h0));
  }
  CHECK(worst2 < worst / 2.5);
}

TEST_CASE("standard normal target reproduces its moments") {
  Dataset d = normal_data({0.0});
  // the single observation at 0 with sigma 1e6 leaves the prior untouched
  BoundModel m = must_bind(
      "model { data { y: vector[1]; } prior { mu ~ Normal(0, 1); } "
      "likelihood { y ~ Normal(mu, 1000000); } }",
      d);

  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.draws = 1500;
  cfg.tune = 600;
  cfg.seed = 11;
  SamplerError err;
  auto post = nuts_sample(m, cfg, &err);
  REQUIRE_MESSAGE(post.has_value(), err.message);
  CHECK(post->num_chains() == 4);
  CHECK(post->num_draws() == 1500);
  CHECK(post->coord_names[0] == "mu");

  std::vector<double> all = flatten_coord(*post, 0);
  double mean = mean_of(all);
  double var = variance_of(all);
  double kurt = 0.0;
  for (double x : all) kurt += x * x * x * x;
  kurt /= static_cast<double>(all.size());

  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.08);
  CHECK(std::abs(kurt - 3.0) < 0.4);
}

TEST_CASE("conjugate posterior matches the closed form within Monte Carlo error") {
  BoundModel m = conjugate_model();
  const DataColumn* y = m.dataset().find("y");
  REQUIRE(y != nullptr);
  double ybar = mean_of(y->values);
  double n = static_cast<double>(y->values.size());

  // Normal(0, 10) prior, Normal(mu, 1) likelihood
  double post_var = 1.0 / (1.0 / 100.0 + n);
  double post_mean = post_var * n * ybar;

  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.draws = 2000;
  cfg.tune = 800;
  cfg.seed = 1234;
  SamplerError err;
  auto post = nuts_sample(m, cfg, &err);
  REQUIRE_MESSAGE(post.has_value(), err.message);

  std::vector<double> all = flatten_coord(*post, 0);
  double mean = mean_of(all);
  double var = variance_of(all);
  // crude MCSE bound: sd/sqrt(S) with S treated as a tenth of nominal
  double mcse = std::sqrt(post_var) / std::sqrt(static_cast<double>(all.size()) / 10.0);
  CHECK(std::abs(mean - post_mean) < 3.0 * mcse);
  CHECK(std::abs(var - post_var) < 0.3 * post_var);
  CHECK(post->total_divergences() == 0);
}

TEST_CASE("runs are reproducible for a fixed seed") {
  BoundModel m = conjugate_model();
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.draws = 200;
  cfg.tune = 200;
  cfg.seed = 77;

  auto a = nuts_sample(m, cfg);
  auto b = nuts_sample(m, cfg);
  REQUIRE(a.has_value());
  REQUIRE(b.has_value());
  REQUIRE(a->num_draws() == b->num_draws());
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < a->num_draws(); ++i) {
      CHECK(a->chains[c].draws[i][0] == b->chains[c].draws[i][0]);
      CHECK(a->chains[c].energy[i] == b->chains[c].energy[i]);
    }
    CHECK(a->chains[c].step_size == b->chains[c].step_size);
  }

  cfg.seed = 78;
  auto c = nuts_sample(m, cfg);
  REQUIRE(c.has_value());
  CHECK(a->chains[0].draws[0][0] != c->chains[0].draws[0][0]);
}

TEST_CASE("divergences flag the centered funnel and spare the non-centered one") {
  auto data = builtin_dataset("eight_schools");
  REQUIRE(data.has_value());

  BoundModel centered = must_bind(
      "model { data { y: vector[8]; sigma: vector[8]; } prior { mu ~ Normal(0, 5); "
      "tau ~ HalfCauchy(5); theta[8] ~ Normal(mu, tau); } "
      "likelihood { y ~ Normal(theta, sigma); } }",
      *data);
  BoundModel noncentered = must_bind(
      "model { data { y: vector[8]; sigma: vector[8]; } prior { mu ~ Normal(0, 5); "
      "tau ~ HalfNormal(5); theta_raw[8] ~ Normal(0, 1); theta = mu + tau * theta_raw; } "
      "likelihood { y ~ Normal(theta, sigma); } }",
      *data);

  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.draws = 1000;
  cfg.tune = 1000;
  cfg.seed = 1234;

  auto cpost = nuts_sample(centered, cfg);
  auto npost = nuts_sample(noncentered, cfg);
  REQUIRE(cpost.has_value());
  REQUIRE(npost.has_value());
  CHECK(cpost->total_divergences() > 0);
  CHECK(npost->total_divergences() == 0);
}

TEST_CASE("energies are recorded per iteration for BFMI") {
  BoundModel m = conjugate_model();
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.draws = 300;
  cfg.tune = 300;
  cfg.seed = 5;
  auto post = nuts_sample(m, cfg);
  REQUIRE(post.has_value());
  for (const auto& chain : post->chains) {
    REQUIRE(chain.energy.size() == 300);
    REQUIRE(chain.divergent.size() == 300);
    REQUIRE(chain.pointwise_loglik.size() == 300);
    REQUIRE(chain.pointwise_loglik[0].size() == 20);
    CHECK(chain.step_size > 0.0);
    double lo = *std::min_element(chain.energy.begin(), chain.energy.end());
    double hi = *std::max_element(chain.energy.begin(), chain.energy.end());
    CHECK(std::isfinite(lo));
    CHECK(hi > lo);  // energies move
  }
}

TEST_CASE("draws come back on the constrained scale") {
  Dataset d = normal_data({1.0, 2.0, 3.0});
  BoundModel m = must_bind(
      "model { data { y: vector[3]; } prior { mu ~ Normal(0, 5); tau ~ HalfNormal(2); } "
      "likelihood { y ~ Normal(mu, tau); } }",
      d);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.draws = 300;
  cfg.tune = 300;
  cfg.seed = 3;
  auto post = nuts_sample(m, cfg);
  REQUIRE(post.has_value());
  REQUIRE(post->coord_names[1] == "tau");
  for (double v : flatten_coord(*post, 1)) {
    CHECK(v > 0.0);  // HalfNormal support
  }
}

TEST_CASE("invalid configurations are rejected up front") {
  BoundModel m = conjugate_model();
  SamplerError err;

  SamplerConfig cfg;
  cfg.chains = 1;
  CHECK_FALSE(nuts_sample(m, cfg, &err).has_value());
  CHECK_FALSE(err.message.empty());
  CHECK_FALSE(err.init_failure);

  cfg = SamplerConfig{};
  cfg.draws = 0;
  CHECK_FALSE(nuts_sample(m, cfg, &err).has_value());

  cfg = SamplerConfig{};
  cfg.tune = -1;
  CHECK_FALSE(nuts_sample(m, cfg, &err).has_value());
}

TEST_CASE("a target with no finite starting point reports an init failure") {
  // Uniform(a, a) has zero width: every constrained draw maps to density -inf
  Dataset d = normal_data({1.0});
  ParseOutcome out = parse_program_text(
      "model { data { y: vector[1]; } prior { mu ~ Normal(0, 1); } "
      "likelihood { y ~ Normal(mu, 1); } }");
  REQUIRE(out.ok());
  // degenerate bound model: force -inf by replacing the dataset column with NaN
  Dataset bad = d;
  bad.columns[0].values[0] = std::numeric_limits<double>::quiet_NaN();
  BindError berr;
  auto m = BoundModel::bind(*out.program, bad, DistributionRegistry::builtin(), &berr);
  REQUIRE(m.has_value());

  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.draws = 50;
  cfg.tune = 50;
  cfg.seed = 1;
  SamplerError err;
  CHECK_FALSE(nuts_sample(*m, cfg, &err).has_value());
  CHECK(err.init_failure);
  CHECK(err.message.rfind("failed to initialize", 0) == 0);
}
