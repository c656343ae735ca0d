#pragma once

#include "ppsynth/ast.hpp"
#include "ppsynth/distributions.hpp"
#include "ppsynth/grammar.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ppsynth {

// shape of a value in scope
struct Shape {
  bool is_vector = false;
  int64_t length = 0;
  ScalarKind scalar = ScalarKind::Real;

  bool operator==(const Shape&) const = default;
  static Shape scalar_real() { return {false, 0, ScalarKind::Real}; }
  static Shape vector_real(int64_t n) { return {true, n, ScalarKind::Real}; }
};

enum class BindingKind { Data, Parameter, Deterministic };

struct Binding {
  BindingKind kind;
  Shape shape;
};

// insertion-ordered scope; duplicate declarations are the caller's error
class SymbolTable {
 public:
  void declare(const std::string& name, Binding b) { entries_.emplace_back(name, b); }
  const Binding* find(const std::string& name) const {
    for (const auto& [n, b] : entries_) {
      if (n == name) return &b;
    }
    return nullptr;
  }
  const std::vector<std::pair<std::string, Binding>>& entries() const { return entries_; }

  static SymbolTable from_data(const std::vector<DataDecl>& decls);

 private:
  std::vector<std::pair<std::string, Binding>> entries_;
};

// Conjunction of the validity predicates. Checks run in order: parseability,
// distribution existence, parameter discipline, then scope and shapes; the
// first failure pins the violating span and later flags stay true.
struct ValidationReport {
  bool phi1 = true;
  bool phi2 = true;
  bool phi3 = true;
  bool scope_ok = true;
  std::optional<Span> violating_span;
  std::string message;

  bool all_ok() const { return phi1 && phi2 && phi3 && scope_ok; }
};

// token fragment against a decoding context; the fragment must extend `ctx`
// and form exactly one statement for the given block
ValidationReport validate_fragment(const std::vector<Token>& fragment, const PrefixState& ctx,
                                   BlockKind block, const SymbolTable& table,
                                   const DistributionRegistry& registry);

// predicate checks for an already-parsed statement (phi1 assumed)
ValidationReport validate_statement(const Statement& stmt, BlockKind block,
                                    const SymbolTable& table,
                                    const DistributionRegistry& registry);

// whole program: data declarations, then priors, then likelihood statements
ValidationReport validate_program(const ModelProgram& prog, const DistributionRegistry& registry);

// record the statement's binding after it validated
void bind_statement(SymbolTable& table, const Statement& stmt, BlockKind block);

// shape of an expression under the table, or nullopt with a report on error
std::optional<Shape> infer_expr_shape(const Expr& expr, const SymbolTable& table,
                                      ValidationReport* report);

// literal (possibly negated) numeric value of an expression, if it is one
std::optional<double> fold_literal(const Expr& expr);

// arguments resolved into registry parameter order; valid once phi3 holds
std::vector<const DistArg*> args_in_param_order(const DistCall& dist,
                                                const DistributionSpec& spec);

}  // namespace ppsynth
