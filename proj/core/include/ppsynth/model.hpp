#pragma once

#include "ppsynth/ast.hpp"
#include "ppsynth/dataset.hpp"
#include "ppsynth/distributions.hpp"
#include "ppsynth/semantics.hpp"

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ppsynth {

enum class TransformKind { Identity, Log, Logit, ScaledLogit };

// bijection between one unconstrained coordinate and its constrained value
struct CoordTransform {
  TransformKind kind = TransformKind::Identity;
  double lower = 0.0;
  double upper = 0.0;

  double to_constrained(double u) const;
  double to_unconstrained(double x) const;
};

struct BindError {
  std::string message;
};

struct GradResult {
  double logp = 0.0;
  std::vector<double> grad;
  bool ok = false;  // false when the density is non-finite at theta
};

// A validated program bound to concrete data. Evaluation happens on the
// unconstrained scale; log densities include the transform Jacobian.
// All methods are pure and safe to call concurrently.
class BoundModel {
 public:
  static std::optional<BoundModel> bind(const ModelProgram& program, const Dataset& dataset,
                                        const DistributionRegistry& registry,
                                        BindError* error);

  int dimension() const { return static_cast<int>(coord_names_.size()); }
  const std::vector<std::string>& coord_names() const { return coord_names_; }
  int num_observations() const { return num_obs_; }
  const ModelProgram& program() const { return program_; }
  const Dataset& dataset() const { return dataset_; }

  // joint log density at an unconstrained point; -inf when out of support
  double logp(const std::vector<double>& theta) const;

  GradResult logp_grad(const std::vector<double>& theta) const;

  // per-observation log likelihood at an unconstrained point
  std::vector<double> pointwise_loglik(const std::vector<double>& theta) const;

  std::vector<double> to_constrained(const std::vector<double>& theta) const;
  std::vector<double> to_unconstrained(const std::vector<double>& constrained) const;

 private:
  BoundModel() = default;

  struct PriorTerm {
    int stmt_index;         // into program_.prior_stmts
    DistId dist;
    int coord_offset;       // first unconstrained coordinate
    int count;              // 1 or the replication count
    CoordTransform transform;
    int env_slot;
    std::vector<ExprPtr> param_args;  // in registry parameter order
  };
  struct DeterministicTerm {
    int stmt_index;
    int env_slot;
  };
  struct Step {
    bool stochastic;
    int index;  // into prior_terms_ or deterministic_terms_
  };
  struct LikelihoodTerm {
    int stmt_index;  // into program_.likelihood_stmts
    DistId dist;
    int column;      // into dataset_.columns
    std::vector<ExprPtr> param_args;
  };

  template <class T>
  struct EvalOutput;

  template <class T>
  EvalOutput<T> evaluate(const std::vector<double>& theta, void* tape) const;

  ModelProgram program_;
  Dataset dataset_;
  std::vector<std::string> coord_names_;
  std::vector<PriorTerm> prior_terms_;
  std::vector<DeterministicTerm> det_terms_;
  std::vector<Step> steps_;
  std::vector<LikelihoodTerm> like_terms_;
  std::unordered_map<const Expr*, int> var_slots_;
  std::unordered_map<std::string, int> slot_of_name_;
  int num_slots_ = 0;
  int num_obs_ = 0;
  std::vector<int> data_slot_column_;   // slot -> column index or -1
  std::vector<bool> data_slot_scalar_;  // slot binds a length-1 column as scalar
};

}  // namespace ppsynth
