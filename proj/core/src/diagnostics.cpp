#include "ppsynth/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ppsynth/numutil.hpp"

namespace ppsynth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPosInf = std::numeric_limits<double>::infinity();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Matrix = std::vector<std::vector<double>>; // [chain][iteration]

bool all_finite(const Matrix& chains) {
  for (const auto& c : chains)
    for (double x : c)
      if (!std::isfinite(x)) return false;
  return true;
}

bool is_constant(const Matrix& chains) {
  double lo = kPosInf;
  double hi = kNegInf;
  for (const auto& c : chains)
    for (double x : c) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  return hi - lo < 1e-300;
}

// Each chain is halved; an odd middle iteration is dropped.
Matrix split_chains(const Matrix& chains) {
  Matrix out;
  out.reserve(chains.size() * 2);
  for (const auto& c : chains) {
    std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + half);
    out.emplace_back(c.end() - half, c.end());
  }
  return out;
}

// Fractional ranks (average over ties) mapped through the normal quantile
// function, pooled across chains.
Matrix rank_normalize(const Matrix& chains) {
  std::vector<const double*> ptrs;
  for (const auto& c : chains)
    for (const double& x : c) ptrs.push_back(&x);
  std::size_t n = ptrs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return *ptrs[a] < *ptrs[b]; });

  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && *ptrs[order[j + 1]] == *ptrs[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0; // 1-based average rank
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }

  Matrix out = chains;
  std::size_t flat = 0;
  double denom = static_cast<double>(n) + 0.25;
  for (auto& c : out)
    for (double& x : c) x = inv_normal_cdf((rank[flat++] - 0.375) / denom);
  return out;
}

// sqrt(var_plus / W) on already-transformed chains.
double basic_rhat(const Matrix& chains) {
  std::size_t m = chains.size();
  std::size_t n = chains.front().size();
  std::vector<double> means;
  std::vector<double> vars;
  means.reserve(m);
  vars.reserve(m);
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(variance_of(c));
  }
  double w = mean_of(vars);
  double b_over_n = variance_of(means);
  double nd = static_cast<double>(n);
  double var_plus = (nd - 1.0) / nd * w + b_over_n;
  return std::sqrt(var_plus / w);
}

// Combined-chain autocorrelation ESS with Geyer's initial monotone positive
// sequence truncation.
double ess_core(const Matrix& chains) {
  std::size_t m = chains.size();
  std::size_t n = chains.front().size();
  if (n < 4) return kNaN;
  if (is_constant(chains)) return static_cast<double>(m * n);

  std::vector<double> chain_mean(m);
  Matrix centered(m);
  for (std::size_t c = 0; c < m; ++c) {
    chain_mean[c] = mean_of(chains[c]);
    centered[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) centered[c][i] = chains[c][i] - chain_mean[c];
  }
  // biased autocovariance at lag t, averaged across chains, computed lazily
  auto macov = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += centered[c][i] * centered[c][i + t];
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };

  double nd = static_cast<double>(n);
  double mean_var = macov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += variance_of(chain_mean);
  if (!(var_plus > 0.0)) return static_cast<double>(m * n);

  std::vector<double> rho(n, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - macov(1)) / var_plus;
  rho[1] = rho_odd;
  std::size_t t = 0;
  while (t + 5 < n && std::isfinite(rho_even + rho_odd) && rho_even + rho_odd > 0.0) {
    t += 2;
    rho_even = 1.0 - (mean_var - macov(t)) / var_plus;
    rho_odd = 1.0 - (mean_var - macov(t + 1)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t] = rho_even;
      rho[t + 1] = rho_odd;
    }
  }
  std::size_t max_t = t;
  if (rho_even > 0.0) rho[max_t] = rho_even;

  t = 0;
  while (t + 4 <= max_t) {
    t += 2;
    if (rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1]) {
      rho[t] = 0.5 * (rho[t - 2] + rho[t - 1]);
      rho[t + 1] = rho[t];
    }
  }

  double total = static_cast<double>(m * n);
  double tau = -1.0;
  for (std::size_t i = 0; i < max_t; ++i) tau += 2.0 * rho[i];
  tau += rho[max_t];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

bool usable(const Matrix& chains) {
  if (chains.size() < 2) return false;
  std::size_t n = chains.front().size();
  if (n < 4) return false;
  for (const auto& c : chains)
    if (c.size() != n) return false;
  return all_finite(chains);
}

std::vector<double> pooled(const Matrix& chains) {
  std::vector<double> xs;
  for (const auto& c : chains) xs.insert(xs.end(), c.begin(), c.end());
  return xs;
}

double ess_of_quantile(const Matrix& chains, double prob) {
  double q = quantile_of(pooled(chains), prob);
  Matrix ind = chains;
  for (auto& c : ind)
    for (double& x : c) x = x <= q ? 1.0 : 0.0;
  return ess_core(split_chains(ind));
}

// Quantile function of the generalized Pareto with location 0.
double qgpd(double u, double k, double sigma) {
  if (std::abs(k) < 1e-12) return -sigma * std::log1p(-u);
  return sigma * std::expm1(-k * std::log1p(-u)) / k;
}

} // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (!usable(chains)) return kNaN;
  Matrix split = split_chains(chains);
  if (is_constant(split)) return 1.0;

  double bulk = basic_rhat(rank_normalize(split));

  double med = quantile_of(pooled(split), 0.5);
  Matrix folded = split;
  for (auto& c : folded)
    for (double& x : c) x = std::abs(x - med);
  double fold = is_constant(folded) ? 1.0 : basic_rhat(rank_normalize(folded));

  return std::max(bulk, fold);
}

double ess_bulk(const std::vector<std::vector<double>>& chains) {
  if (!usable(chains)) return kNaN;
  Matrix split = split_chains(chains);
  if (is_constant(split)) return static_cast<double>(chains.size() * chains.front().size());
  return ess_core(rank_normalize(split));
}

double ess_tail(const std::vector<std::vector<double>>& chains) {
  if (!usable(chains)) return kNaN;
  if (is_constant(chains)) return static_cast<double>(chains.size() * chains.front().size());
  return std::min(ess_of_quantile(chains, 0.05), ess_of_quantile(chains, 0.95));
}

std::vector<double> bfmi(const std::vector<std::vector<double>>& energy) {
  std::vector<double> out;
  out.reserve(energy.size());
  for (const auto& e : energy) {
    if (e.size() < 2) {
      out.push_back(kNaN);
      continue;
    }
    double num = 0.0;
    for (std::size_t i = 1; i < e.size(); ++i) num += (e[i] - e[i - 1]) * (e[i] - e[i - 1]);
    num /= static_cast<double>(e.size() - 1);
    out.push_back(num / variance_pop(e));
  }
  return out;
}

double gpd_fit_k(const std::vector<double>& tail, double* sigma_out) {
  if (sigma_out) *sigma_out = kNaN;
  std::size_t n = tail.size();
  if (n < 5) return kPosInf;

  double x_max = tail.back();
  double x_star = tail[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];
  if (!(x_max > 0.0) || !(x_star > 0.0)) return kPosInf;

  std::size_t m = 30 + static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  std::vector<double> theta(m);
  std::vector<double> loglik(m);
  for (std::size_t j = 0; j < m; ++j) {
    double jj = static_cast<double>(j) + 1.0;
    theta[j] = 1.0 / x_max + (1.0 - std::sqrt(static_cast<double>(m) / (jj - 0.5))) / (3.0 * x_star);
    double k = 0.0;
    for (double x : tail) k += std::log1p(-theta[j] * x);
    k /= static_cast<double>(n);
    double ratio = -theta[j] / k;
    loglik[j] = k != 0.0 && ratio > 0.0
                    ? static_cast<double>(n) * (std::log(ratio) - k - 1.0)
                    : kNegInf;
  }

  double lse = logsumexp(loglik);
  if (!std::isfinite(lse)) return kPosInf;
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(loglik[j] - lse);

  double k = 0.0;
  for (double x : tail) k += std::log1p(-theta_hat * x);
  k /= static_cast<double>(n);
  if (sigma_out) *sigma_out = -k / theta_hat;
  // weakly informative prior pulling k toward 0.5
  double nd = static_cast<double>(n);
  return k * nd / (nd + 10.0) + 10.0 * 0.5 / (nd + 10.0);
}

PsisResult psis_loo(const std::vector<std::vector<double>>& pointwise_loglik) {
  PsisResult res;
  std::size_t s = pointwise_loglik.size();
  if (s == 0) return res;
  std::size_t n_obs = pointwise_loglik.front().size();
  if (n_obs == 0) return res;

  std::size_t tail_len = static_cast<std::size_t>(std::min(
      std::floor(0.2 * static_cast<double>(s)),
      std::ceil(3.0 * std::sqrt(static_cast<double>(s)))));

  res.pointwise.reserve(n_obs);
  res.pareto_k.reserve(n_obs);
  std::vector<double> lw(s);
  std::vector<double> ll(s);
  for (std::size_t i = 0; i < n_obs; ++i) {
    double max_lw = kNegInf;
    for (std::size_t d = 0; d < s; ++d) {
      ll[d] = pointwise_loglik[d][i];
      lw[d] = -ll[d];
      max_lw = std::max(max_lw, lw[d]);
    }
    for (double& w : lw) w -= max_lw;

    double khat = kPosInf;
    if (tail_len >= 5) {
      std::vector<std::size_t> order(s);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return lw[a] < lw[b]; });
      std::size_t first_tail = s - tail_len;
      double tail_lo = lw[order[first_tail]];
      double tail_hi = lw[order[s - 1]];
      if (tail_hi - tail_lo >= 1e-300) {
        double cutoff = std::exp(lw[order[first_tail - 1]]);
        std::vector<double> exceed(tail_len);
        for (std::size_t t = 0; t < tail_len; ++t)
          exceed[t] = std::exp(lw[order[first_tail + t]]) - cutoff;
        double sigma = 0.0;
        khat = gpd_fit_k(exceed, &sigma);
        if (std::isfinite(khat)) {
          for (std::size_t t = 0; t < tail_len; ++t) {
            double u = (static_cast<double>(t) + 0.5) / static_cast<double>(tail_len);
            double smoothed = std::log(qgpd(u, khat, sigma) + cutoff);
            lw[order[first_tail + t]] = std::min(smoothed, 0.0);
          }
        }
      }
    }
    res.pareto_k.push_back(khat);

    // normalize in log space, then elpd_i = log sum w-tilde * exp(loglik)
    double norm = logsumexp(lw);
    std::vector<double> terms(s);
    for (std::size_t d = 0; d < s; ++d) terms[d] = lw[d] - norm + ll[d];
    res.pointwise.push_back(logsumexp(terms));
  }

  double total = 0.0;
  bool finite = true;
  for (double e : res.pointwise) {
    total += e;
    finite = finite && std::isfinite(e);
  }
  res.elpd = finite ? total : kNaN;
  res.se = n_obs >= 2
               ? std::sqrt(static_cast<double>(n_obs) * variance_of(res.pointwise))
               : 0.0;
  return res;
}

void apply_score(DiagnosticsReport& report, const Thresholds& thresholds) {
  auto all_le = [](const std::vector<double>& xs, double bound) {
    if (xs.empty()) return false;
    for (double x : xs)
      if (!(x <= bound)) return false;
    return true;
  };
  auto all_ge = [](const std::vector<double>& xs, double bound) {
    if (xs.empty()) return false;
    for (double x : xs)
      if (!(x >= bound)) return false;
    return true;
  };

  report.indicators[0] = all_le(report.rhat, thresholds.alpha_R);
  bool bfmi_ok = !report.bfmi.empty();
  for (double b : report.bfmi) bfmi_ok = bfmi_ok && b > thresholds.gamma_bfmi;
  report.indicators[1] = bfmi_ok;
  report.indicators[2] = all_ge(report.ess_bulk, thresholds.beta_bulk);
  report.indicators[3] = report.divergences == 0;
  report.indicators[4] = all_ge(report.ess_tail, thresholds.beta_tail);
  report.indicators[5] = std::isfinite(report.elpd);
  if (report.pareto_k.empty()) {
    report.indicators[6] = false;
  } else {
    double good = 0.0;
    for (double k : report.pareto_k)
      if (k <= thresholds.k_threshold) good += 1.0;
    report.indicators[6] =
        good / static_cast<double>(report.pareto_k.size()) >= 1.0 - thresholds.epsilon;
  }

  report.score = 0;
  for (bool s : report.indicators) report.score += s ? 1 : 0;
}

DiagnosticsReport compute_diagnostics(const PosteriorDraws& draws,
                                      const Thresholds& thresholds) {
  DiagnosticsReport report;
  report.coord_names = draws.coord_names;
  for (int p = 0; p < draws.dimension(); ++p) {
    Matrix cols = draws.coord(p);
    report.rhat.push_back(split_rhat(cols));
    report.ess_bulk.push_back(ess_bulk(cols));
    report.ess_tail.push_back(ess_tail(cols));
  }
  report.bfmi = bfmi(draws.energies());
  report.divergences = draws.total_divergences();
  PsisResult psis = psis_loo(draws.flat_loglik());
  report.elpd = psis.elpd;
  report.elpd_se = psis.se;
  report.pareto_k = psis.pareto_k;
  apply_score(report, thresholds);
  return report;
}

} // namespace ppsynth
