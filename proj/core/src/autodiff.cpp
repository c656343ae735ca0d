#include "ppsynth/autodiff.hpp"

#include "ppsynth/numutil.hpp"

#include <algorithm>
#include <cmath>

namespace ppsynth {

double digamma(double x) {
  if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  double result = 0.0;
  // shift into the asymptotic regime; the first omitted Bernoulli term is
  // O(x^-12), far below double noise from 10 upward
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x;
  double inv2 = inv * inv;
  // ln x - 1/(2x) - sum of Bernoulli terms
  double series = inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
  return result + std::log(x) - 0.5 * inv - series;
}

double inv_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  // crude initial guess, then safeguarded Newton on Phi(x) - p using erfc
  double q = std::min(p, 1.0 - p);
  double x = std::sqrt(-2.0 * std::log(q));
  x = x - (2.30753 + 0.27061 * x) / (1.0 + x * (0.99229 + 0.04481 * x));
  if (p < 0.5) x = -x;

  for (int it = 0; it < 60; ++it) {
    double cdf = 0.5 * std::erfc(-x * M_SQRT1_2);
    double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    if (pdf <= 0.0) break;
    double step = (cdf - p) / pdf;
    // clamp to keep the iteration stable far out in the tails
    step = std::clamp(step, -1.0, 1.0);
    x -= step;
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(x))) break;
  }
  return x;
}

double quantile_of(std::vector<double> xs, double q) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  double pos = q * static_cast<double>(xs.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = static_cast<size_t>(std::ceil(pos));
  double frac = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

namespace ad {

Var lgamma(const Var& x) {
  Tape* t = x.tape();
  return Var(t, t->push_unary(x.index(), ppsynth::digamma(x.value()), std::lgamma(x.value())));
}

}  // namespace ad
}  // namespace ppsynth
