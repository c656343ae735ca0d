#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ppsynth/model.hpp"

namespace ppsynth {

struct SamplerConfig {
  int chains = 4;
  int draws = 1000;
  int tune = 1000;
  double target_accept = 0.8;
  int max_treedepth = 10;
  double divergence_energy_threshold = 1000.0;
  unsigned long long seed = 0;
};

// One chain's post-warmup output. Draws are stored in constrained space.
struct ChainDraws {
  std::vector<std::vector<double>> draws;            // iteration x parameter
  std::vector<double> energy;                        // iteration
  std::vector<char> divergent;                       // iteration
  std::vector<std::vector<double>> pointwise_loglik; // iteration x observation
  double step_size = 0.0;
};

struct PosteriorDraws {
  std::vector<std::string> coord_names; // layout: parameter order of each draw row
  int num_observations = 0;
  std::vector<ChainDraws> chains;

  int num_chains() const { return static_cast<int>(chains.size()); }
  int num_draws() const {
    return chains.empty() ? 0 : static_cast<int>(chains.front().draws.size());
  }
  int dimension() const { return static_cast<int>(coord_names.size()); }

  // Per-coordinate view, [chain][iteration].
  std::vector<std::vector<double>> coord(int p) const;
  std::vector<std::vector<double>> energies() const;
  long total_divergences() const;
  // Chain-major flattening, [draw][observation].
  std::vector<std::vector<double>> flat_loglik() const;
};

struct SamplerError {
  std::string message;
  bool init_failure = false;  // no finite starting point, as opposed to a mid-run error
};

// Phase-space point used by the integrator; grad is d(logp)/dq.
struct PhasePoint {
  std::vector<double> q;
  std::vector<double> p;
  std::vector<double> grad;
  double logp = 0.0;
};

// One leapfrog step with diagonal inverse mass. Returns false when the
// target evaluation is non-finite at the new position.
bool leapfrog(const BoundModel& model, PhasePoint& z, double step,
              const std::vector<double>& inv_mass);

double hamiltonian(const PhasePoint& z, const std::vector<double>& inv_mass);

std::optional<PosteriorDraws> nuts_sample(const BoundModel& model,
                                          const SamplerConfig& config,
                                          SamplerError* err = nullptr);

} // namespace ppsynth
