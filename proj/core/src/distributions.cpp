#include "ppsynth/distributions.hpp"

#include <limits>
#include <stdexcept>

namespace ppsynth {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kLogPi = 1.1447298858494001741;

template <class T>
T constant_like(const std::vector<T>& args, double v);

template <>
double constant_like(const std::vector<double>&, double v) { return v; }

template <>
ad::Var constant_like(const std::vector<ad::Var>& args, double v) {
  return ad::Var(args[0].tape(), v);
}

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

}  // namespace

DistributionRegistry::DistributionRegistry() {
  auto add = [this](DistId id, std::string name, std::vector<ParamSpec> params,
                    ValueSupport support, bool discrete) {
    by_name_[name] = specs_.size();
    specs_.push_back({id, std::move(name), std::move(params), support, discrete});
  };

  add(DistId::Normal, "Normal",
      {{"mu", ParamDomain::Real}, {"sigma", ParamDomain::Positive}},
      ValueSupport::RealLine, false);
  add(DistId::HalfNormal, "HalfNormal", {{"sigma", ParamDomain::Positive}},
      ValueSupport::Positive, false);
  add(DistId::HalfCauchy, "HalfCauchy", {{"beta", ParamDomain::Positive}},
      ValueSupport::Positive, false);
  add(DistId::Cauchy, "Cauchy",
      {{"mu", ParamDomain::Real}, {"gamma", ParamDomain::Positive}},
      ValueSupport::RealLine, false);
  add(DistId::Exponential, "Exponential", {{"rate", ParamDomain::Positive}},
      ValueSupport::Positive, false);
  add(DistId::Uniform, "Uniform",
      {{"lower", ParamDomain::OrderedPairLower}, {"upper", ParamDomain::OrderedPairUpper}},
      ValueSupport::BoundedPair, false);
  add(DistId::Beta, "Beta",
      {{"alpha", ParamDomain::Positive}, {"beta", ParamDomain::Positive}},
      ValueSupport::UnitInterval, false);
  add(DistId::Gamma, "Gamma",
      {{"alpha", ParamDomain::Positive}, {"rate", ParamDomain::Positive}},
      ValueSupport::Positive, false);
  add(DistId::LogNormal, "LogNormal",
      {{"mu", ParamDomain::Real}, {"sigma", ParamDomain::Positive}},
      ValueSupport::Positive, false);
  add(DistId::StudentT, "StudentT",
      {{"nu", ParamDomain::Positive}, {"mu", ParamDomain::Real}, {"sigma", ParamDomain::Positive}},
      ValueSupport::RealLine, false);
  add(DistId::Binomial, "Binomial",
      {{"n", ParamDomain::NonNegInt}, {"p", ParamDomain::UnitInterval}},
      ValueSupport::NonNegInt, true);
  add(DistId::Poisson, "Poisson", {{"rate", ParamDomain::Positive}},
      ValueSupport::NonNegInt, true);
  add(DistId::Bernoulli, "Bernoulli", {{"p", ParamDomain::UnitInterval}},
      ValueSupport::Binary, true);
}

const DistributionRegistry& DistributionRegistry::builtin() {
  static const DistributionRegistry reg;
  return reg;
}

const DistributionSpec* DistributionRegistry::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return nullptr;
  return &specs_[it->second];
}

size_t dist_arity(DistId id) {
  for (const auto& spec : DistributionRegistry::builtin().all()) {
    if (spec.id == id) return spec.params.size();
  }
  throw std::logic_error("unknown distribution id");
}

template <class T>
T log_density(DistId id, const T& xv, const std::vector<T>& args) {
  using std::log;
  using std::log1p;
  using std::lgamma;
  using ad::value_of;

  auto bad = [&]() { return constant_like(args, kNegInf); };
  const T& x = xv;
  double xd = value_of(xv);

  switch (id) {
    case DistId::Normal: {
      const T& mu = args[0];
      const T& sigma = args[1];
      if (!(value_of(sigma) > 0.0)) return bad();
      T z = (x - mu) / sigma;
      return -0.5 * (z * z) - log(sigma) - 0.5 * kLogTwoPi;
    }
    case DistId::HalfNormal: {
      const T& sigma = args[0];
      if (!(value_of(sigma) > 0.0) || xd < 0.0) return bad();
      T z = x / sigma;
      return -0.5 * (z * z) - log(sigma) - 0.5 * kLogTwoPi + M_LN2;
    }
    case DistId::HalfCauchy: {
      const T& beta = args[0];
      if (!(value_of(beta) > 0.0) || xd < 0.0) return bad();
      T z = x / beta;
      return M_LN2 - kLogPi - log(beta) - log1p(z * z);
    }
    case DistId::Cauchy: {
      const T& mu = args[0];
      const T& gamma = args[1];
      if (!(value_of(gamma) > 0.0)) return bad();
      T z = (x - mu) / gamma;
      return -kLogPi - log(gamma) - log1p(z * z);
    }
    case DistId::Exponential: {
      const T& rate = args[0];
      if (!(value_of(rate) > 0.0) || xd < 0.0) return bad();
      return log(rate) - rate * x;
    }
    case DistId::Uniform: {
      const T& lo = args[0];
      const T& hi = args[1];
      if (!(value_of(lo) < value_of(hi))) return bad();
      if (xd < value_of(lo) || xd > value_of(hi)) return bad();
      return -log(hi - lo);
    }
    case DistId::Beta: {
      const T& a = args[0];
      const T& b = args[1];
      if (!(value_of(a) > 0.0) || !(value_of(b) > 0.0)) return bad();
      if (!(xd > 0.0 && xd < 1.0)) return bad();
      return (a - 1.0) * log(x) + (b - 1.0) * log1p(-x) + lgamma(a + b) - lgamma(a) - lgamma(b);
    }
    case DistId::Gamma: {
      const T& alpha = args[0];
      const T& rate = args[1];
      if (!(value_of(alpha) > 0.0) || !(value_of(rate) > 0.0) || !(xd > 0.0)) return bad();
      return alpha * log(rate) - lgamma(alpha) + (alpha - 1.0) * log(x) - rate * x;
    }
    case DistId::LogNormal: {
      const T& mu = args[0];
      const T& sigma = args[1];
      if (!(value_of(sigma) > 0.0) || !(xd > 0.0)) return bad();
      T lx = log(x);
      T z = (lx - mu) / sigma;
      return -lx - log(sigma) - 0.5 * kLogTwoPi - 0.5 * (z * z);
    }
    case DistId::StudentT: {
      const T& nu = args[0];
      const T& mu = args[1];
      const T& sigma = args[2];
      if (!(value_of(nu) > 0.0) || !(value_of(sigma) > 0.0)) return bad();
      T z = (x - mu) / sigma;
      return lgamma((nu + 1.0) * 0.5) - lgamma(nu * 0.5) - 0.5 * log(nu) - 0.5 * kLogPi -
             log(sigma) - (nu + 1.0) * 0.5 * log1p(z * z / nu);
    }
    case DistId::Binomial: {
      const T& n = args[0];
      const T& p = args[1];
      double nv = value_of(n);
      double pv = value_of(p);
      if (!is_integer(nv) || nv < 0.0) return bad();
      if (!(pv >= 0.0 && pv <= 1.0)) return bad();
      if (!is_integer(xd) || xd < 0.0 || xd > nv) return bad();
      if (pv == 0.0 && xd > 0.0) return bad();
      if (pv == 1.0 && xd < nv) return bad();
      T res = lgamma(n + 1.0) - lgamma(n - x + 1.0) - lgamma(x + 1.0);
      if (xd > 0.0 && pv > 0.0) res = res + x * log(p);
      if (xd < nv && pv < 1.0) res = res + (n - x) * log1p(-p);
      return res;
    }
    case DistId::Poisson: {
      const T& rate = args[0];
      if (!(value_of(rate) > 0.0)) return bad();
      if (!is_integer(xd) || xd < 0.0) return bad();
      return x * log(rate) - rate - lgamma(x + 1.0);
    }
    case DistId::Bernoulli: {
      const T& p = args[0];
      double pv = value_of(p);
      if (!(pv >= 0.0 && pv <= 1.0)) return bad();
      if (xd != 0.0 && xd != 1.0) return bad();
      if (pv == 0.0) return xd == 0.0 ? constant_like(args, 0.0) : bad();
      if (pv == 1.0) return xd == 1.0 ? constant_like(args, 0.0) : bad();
      if (xd == 1.0) return log(p);
      return log1p(-p);
    }
  }
  return bad();
}

template double log_density<double>(DistId, const double&, const std::vector<double>&);
template ad::Var log_density<ad::Var>(DistId, const ad::Var&, const std::vector<ad::Var>&);

double log_density_d(DistId id, double x, const std::vector<double>& args) {
  return log_density<double>(id, x, args);
}

}  // namespace ppsynth
