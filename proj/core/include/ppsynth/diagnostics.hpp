#pragma once

#include <array>
#include <string>
#include <vector>

#include "ppsynth/inference.hpp"

namespace ppsynth {

struct Thresholds {
  double alpha_R = 1.05;
  double gamma_bfmi = 0.3;
  double beta_bulk = 400.0;
  double beta_tail = 100.0;
  double k_threshold = 0.7;
  double epsilon = 0.2;
  int zeta = 5;
};

// Convergence diagnostics over [chain][iteration] arrays. All of these are
// pure functions; non-finite outputs mean "not computable" and fail the
// corresponding indicator downstream.
double split_rhat(const std::vector<std::vector<double>>& chains);
double ess_bulk(const std::vector<std::vector<double>>& chains);
double ess_tail(const std::vector<std::vector<double>>& chains);
std::vector<double> bfmi(const std::vector<std::vector<double>>& energy);

// Generalized-Pareto shape fit on tail exceedances sorted ascending. Fewer
// than 5 samples yields +inf. sigma_out receives the fitted scale.
double gpd_fit_k(const std::vector<double>& tail, double* sigma_out = nullptr);

struct PsisResult {
  double elpd = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> pointwise; // elpd_i per observation
  std::vector<double> pareto_k;  // k-hat per observation
};

// pointwise_loglik is [draw][observation], draws pooled across chains.
PsisResult psis_loo(const std::vector<std::vector<double>>& pointwise_loglik);

struct DiagnosticsReport {
  std::vector<std::string> coord_names;
  std::vector<double> rhat;     // per parameter
  std::vector<double> ess_bulk; // per parameter
  std::vector<double> ess_tail; // per parameter
  std::vector<double> bfmi;     // per chain
  long divergences = 0;
  double elpd = std::numeric_limits<double>::quiet_NaN();
  double elpd_se = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> pareto_k; // per observation
  std::array<bool, 7> indicators{};
  int score = 0;
};

// Recomputes the seven indicators and the score from the stored metrics.
void apply_score(DiagnosticsReport& report, const Thresholds& thresholds);

DiagnosticsReport compute_diagnostics(const PosteriorDraws& draws,
                                      const Thresholds& thresholds);

} // namespace ppsynth
