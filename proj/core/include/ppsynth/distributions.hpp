#pragma once

#include "ppsynth/autodiff.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ppsynth {

// static domain of a parameter, used for literal checks and for choosing the
// unconstraining transform when the distribution appears as a prior
enum class ParamDomain {
  Real,
  Positive,
  UnitInterval,
  NonNegInt,
  // the (lower, upper) pair of Uniform; checked jointly as lower < upper
  OrderedPairLower,
  OrderedPairUpper,
};

// support of the sampled value
enum class ValueSupport {
  RealLine,
  Positive,     // [0, inf) for the half families, (0, inf) otherwise
  UnitInterval,
  BoundedPair,  // Uniform(lower, upper)
  NonNegInt,
  Binary,
};

enum class DistId {
  Normal,
  HalfNormal,
  HalfCauchy,
  Cauchy,
  Exponential,
  Uniform,
  Beta,
  Gamma,
  LogNormal,
  StudentT,
  Binomial,
  Poisson,
  Bernoulli,
};

struct ParamSpec {
  std::string name;
  ParamDomain domain;
};

struct DistributionSpec {
  DistId id;
  std::string name;
  std::vector<ParamSpec> params;
  ValueSupport support;
  bool discrete;
};

class DistributionRegistry {
 public:
  static const DistributionRegistry& builtin();

  const DistributionSpec* find(const std::string& name) const;
  const std::vector<DistributionSpec>& all() const { return specs_; }

 private:
  DistributionRegistry();
  std::vector<DistributionSpec> specs_;
  std::map<std::string, size_t> by_name_;
};

// log density (or log mass) of `x` under `id` with parameter values `args`
// in registry order. Out-of-support values and invalid parameters yield
// -inf; the caller decides what to do with it. T is double or ad::Var.
template <class T>
T log_density(DistId id, const T& x, const std::vector<T>& args);

double log_density_d(DistId id, double x, const std::vector<double>& args);

// number of parameters for arity checks
size_t dist_arity(DistId id);

}  // namespace ppsynth
