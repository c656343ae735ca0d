#include "ppsynth/semantics.hpp"

#include <cmath>

namespace ppsynth {

SymbolTable SymbolTable::from_data(const std::vector<DataDecl>& decls) {
  SymbolTable t;
  for (const auto& d : decls) {
    Shape sh{d.type.is_vector, d.type.length, d.type.scalar};
    t.declare(d.name, Binding{BindingKind::Data, sh});
  }
  return t;
}

std::optional<double> fold_literal(const Expr& expr) {
  if (expr.kind == ExprKind::Number) return expr.number;
  if (expr.kind == ExprKind::Unary) {
    auto inner = fold_literal(*expr.args[0]);
    if (inner) return -*inner;
  }
  return std::nullopt;
}

namespace {

void set_failure(ValidationReport& rep, bool ValidationReport::* flag, Span span,
                 std::string message) {
  rep.*flag = false;
  rep.violating_span = span;
  rep.message = std::move(message);
}

bool combine_shapes(const Shape& a, const Shape& b, Shape* out) {
  if (!a.is_vector) {
    *out = b;
    out->scalar = ScalarKind::Real;
    return true;
  }
  if (!b.is_vector) {
    *out = a;
    out->scalar = ScalarKind::Real;
    return true;
  }
  if (a.length != b.length) return false;
  *out = Shape::vector_real(a.length);
  return true;
}

std::string shape_text(const Shape& s) {
  if (!s.is_vector) return "scalar";
  return "vector[" + std::to_string(s.length) + "]";
}

}  // namespace

std::optional<Shape> infer_expr_shape(const Expr& expr, const SymbolTable& table,
                                      ValidationReport* report) {
  switch (expr.kind) {
    case ExprKind::Number:
      return Shape::scalar_real();
    case ExprKind::Variable: {
      const Binding* b = table.find(expr.var);
      if (!b) {
        if (report) {
          set_failure(*report, &ValidationReport::scope_ok, expr.span,
                      "use of undefined variable '" + expr.var + "'");
        }
        return std::nullopt;
      }
      return b->shape;
    }
    case ExprKind::Unary:
      return infer_expr_shape(*expr.args[0], table, report);
    case ExprKind::Binary:
    case ExprKind::Call: {
      Shape acc = Shape::scalar_real();
      for (const auto& arg : expr.args) {
        auto sh = infer_expr_shape(*arg, table, report);
        if (!sh) return std::nullopt;
        Shape combined;
        if (!combine_shapes(acc, *sh, &combined)) {
          if (report) {
            set_failure(*report, &ValidationReport::scope_ok, expr.span,
                        "shape mismatch: " + shape_text(acc) + " combined with " +
                            shape_text(*sh));
          }
          return std::nullopt;
        }
        acc = combined;
      }
      return acc;
    }
  }
  return std::nullopt;
}

namespace {

// phi3: parameter names, arity, duplicate bindings and literal domains
bool check_phi3(const DistCall& dist, const DistributionSpec& spec, ValidationReport& rep) {
  size_t n_params = spec.params.size();
  std::vector<const DistArg*> bound(n_params, nullptr);
  size_t next_positional = 0;

  for (const auto& arg : dist.args) {
    size_t slot = n_params;
    if (arg.name) {
      for (size_t i = 0; i < n_params; ++i) {
        if (spec.params[i].name == *arg.name) {
          slot = i;
          break;
        }
      }
      if (slot == n_params) {
        set_failure(rep, &ValidationReport::phi3, arg.name_span,
                    "unknown parameter '" + *arg.name + "' for " + spec.name);
        return false;
      }
    } else {
      // positional arguments fill parameter slots left to right
      while (next_positional < n_params && bound[next_positional]) ++next_positional;
      if (next_positional == n_params) {
        set_failure(rep, &ValidationReport::phi3, arg.span,
                    "too many arguments for " + spec.name);
        return false;
      }
      slot = next_positional++;
    }
    if (bound[slot]) {
      set_failure(rep, &ValidationReport::phi3, arg.span,
                  "parameter '" + spec.params[slot].name + "' bound twice in " + spec.name);
      return false;
    }
    bound[slot] = &arg;

    if (auto lit = fold_literal(*arg.value)) {
      double v = *lit;
      const ParamSpec& ps = spec.params[slot];
      switch (ps.domain) {
        case ParamDomain::Positive:
          if (!(v > 0.0)) {
            set_failure(rep, &ValidationReport::phi3, arg.value->span,
                        "parameter '" + ps.name + "' of " + spec.name + " must be positive");
            return false;
          }
          break;
        case ParamDomain::UnitInterval:
          if (!(v >= 0.0 && v <= 1.0)) {
            set_failure(rep, &ValidationReport::phi3, arg.value->span,
                        "parameter '" + ps.name + "' of " + spec.name + " must lie in [0, 1]");
            return false;
          }
          break;
        case ParamDomain::NonNegInt:
          if (!(v >= 0.0 && std::floor(v) == v)) {
            set_failure(rep, &ValidationReport::phi3, arg.value->span,
                        "parameter '" + ps.name + "' of " + spec.name +
                            " must be a non-negative integer");
            return false;
          }
          break;
        case ParamDomain::Real:
        case ParamDomain::OrderedPairLower:
        case ParamDomain::OrderedPairUpper:
          break;
      }
    }
  }

  for (size_t i = 0; i < n_params; ++i) {
    if (!bound[i]) {
      set_failure(rep, &ValidationReport::phi3, dist.span,
                  "missing parameter '" + spec.params[i].name + "' for " + spec.name);
      return false;
    }
  }

  // the ordered pair is checked jointly when both ends are literals
  for (size_t i = 0; i + 1 < n_params; ++i) {
    if (spec.params[i].domain == ParamDomain::OrderedPairLower &&
        spec.params[i + 1].domain == ParamDomain::OrderedPairUpper) {
      auto lo = fold_literal(*bound[i]->value);
      auto hi = fold_literal(*bound[i + 1]->value);
      if (lo && hi && !(*lo < *hi)) {
        set_failure(rep, &ValidationReport::phi3, bound[i + 1]->value->span,
                    spec.name + " bounds must satisfy lower < upper");
        return false;
      }
    }
  }
  return true;
}

}  // namespace

std::vector<const DistArg*> args_in_param_order(const DistCall& dist,
                                                const DistributionSpec& spec) {
  std::vector<const DistArg*> bound(spec.params.size(), nullptr);
  size_t next_positional = 0;
  for (const auto& arg : dist.args) {
    size_t slot = spec.params.size();
    if (arg.name) {
      for (size_t i = 0; i < spec.params.size(); ++i) {
        if (spec.params[i].name == *arg.name) {
          slot = i;
          break;
        }
      }
    } else {
      while (next_positional < spec.params.size() && bound[next_positional]) ++next_positional;
      slot = next_positional++;
    }
    if (slot < spec.params.size()) bound[slot] = &arg;
  }
  return bound;
}

namespace {

bool check_scope_stochastic(const Statement& stmt, BlockKind block, const SymbolTable& table,
                            const DistributionSpec& spec, ValidationReport& rep) {
  // target discipline
  if (block == BlockKind::Prior) {
    if (table.find(stmt.target)) {
      set_failure(rep, &ValidationReport::scope_ok, stmt.target_span,
                  "redefinition of '" + stmt.target + "'");
      return false;
    }
    if (stmt.replicate && *stmt.replicate < 1) {
      set_failure(rep, &ValidationReport::scope_ok, stmt.target_span,
                  "replication count must be at least 1");
      return false;
    }
    if (spec.discrete) {
      set_failure(rep, &ValidationReport::scope_ok, stmt.dist.name_span,
                  "discrete distribution '" + spec.name + "' cannot be used as a prior");
      return false;
    }
    // bounded-interval priors need literal bounds for the static transform
    if (spec.support == ValueSupport::BoundedPair) {
      for (const auto& arg : stmt.dist.args) {
        if (!fold_literal(*arg.value)) {
          set_failure(rep, &ValidationReport::scope_ok, arg.span,
                      "prior " + spec.name + " bounds must be numeric literals");
          return false;
        }
      }
    }
  } else {
    const Binding* b = table.find(stmt.target);
    if (!b || b->kind != BindingKind::Data) {
      set_failure(rep, &ValidationReport::scope_ok, stmt.target_span,
                  "likelihood target '" + stmt.target + "' is not a data column");
      return false;
    }
    if (spec.discrete && b->shape.scalar != ScalarKind::Int) {
      set_failure(rep, &ValidationReport::scope_ok, stmt.dist.name_span,
                  "discrete distribution '" + spec.name + "' requires an integer-typed target");
      return false;
    }
  }

  // argument expressions: defined variables and a consistent broadcast shape
  Shape target_shape = Shape::scalar_real();
  if (block == BlockKind::Prior) {
    if (stmt.replicate) target_shape = Shape::vector_real(*stmt.replicate);
  } else {
    target_shape = table.find(stmt.target)->shape;
  }

  for (const auto& arg : stmt.dist.args) {
    auto sh = infer_expr_shape(*arg.value, table, &rep);
    if (!sh) return false;
    if (sh->is_vector) {
      if (!target_shape.is_vector) {
        set_failure(rep, &ValidationReport::scope_ok, arg.span,
                    "vector-valued argument for scalar target '" + stmt.target + "'");
        return false;
      }
      if (sh->length != target_shape.length) {
        set_failure(rep, &ValidationReport::scope_ok, arg.span,
                    "argument shape " + shape_text(*sh) + " does not match target " +
                        shape_text(target_shape));
        return false;
      }
    }
  }
  return true;
}

}  // namespace

ValidationReport validate_statement(const Statement& stmt, BlockKind block,
                                    const SymbolTable& table,
                                    const DistributionRegistry& registry) {
  ValidationReport rep;

  if (stmt.kind == StatementKind::Deterministic) {
    // no distribution involved; phi2 and phi3 hold vacuously
    if (table.find(stmt.target)) {
      set_failure(rep, &ValidationReport::scope_ok, stmt.target_span,
                  "redefinition of '" + stmt.target + "'");
      return rep;
    }
    infer_expr_shape(*stmt.expr, table, &rep);
    return rep;
  }

  const DistributionSpec* spec = registry.find(stmt.dist.dist_name);
  if (!spec) {
    set_failure(rep, &ValidationReport::phi2, stmt.dist.name_span,
                "unknown distribution '" + stmt.dist.dist_name + "'");
    return rep;
  }
  if (!check_phi3(stmt.dist, *spec, rep)) return rep;
  check_scope_stochastic(stmt, block, table, *spec, rep);
  return rep;
}

ValidationReport validate_fragment(const std::vector<Token>& fragment, const PrefixState& ctx,
                                   BlockKind block, const SymbolTable& table,
                                   const DistributionRegistry& registry) {
  ValidationReport rep;
  if (fragment.empty()) {
    set_failure(rep, &ValidationReport::phi1, Span{}, "empty fragment");
    return rep;
  }

  // phi1, part one: every token must keep the prefix viable in context
  PrefixState probe = ctx;
  for (size_t i = 0; i < fragment.size(); ++i) {
    if (!probe.advance(fragment[i].kind)) {
      Span sp{static_cast<int>(i), static_cast<int>(i) + 1, fragment[i].char_begin,
              fragment[i].char_end};
      set_failure(rep, &ValidationReport::phi1, sp,
                  std::string("unexpected ") + token_kind_name(fragment[i].kind));
      return rep;
    }
  }

  // phi1, part two: the fragment must be exactly one statement
  FragmentParse fp = parse_statement_tokens(fragment, block);
  if (!fp.ok()) {
    int ti = fp.error->token_index;
    Span sp;
    if (ti < static_cast<int>(fragment.size())) {
      sp = Span{ti, ti + 1, fragment[ti].char_begin, fragment[ti].char_end};
    } else {
      int e = static_cast<int>(fragment.size());
      sp = Span{e - 1, e, fragment.back().char_begin, fragment.back().char_end};
    }
    set_failure(rep, &ValidationReport::phi1, sp, fp.error->message);
    return rep;
  }

  return validate_statement(*fp.stmt, block, table, registry);
}

void bind_statement(SymbolTable& table, const Statement& stmt, BlockKind block) {
  if (block != BlockKind::Prior) return;  // likelihood statements bind nothing
  if (stmt.kind == StatementKind::Deterministic) {
    auto sh = infer_expr_shape(*stmt.expr, table, nullptr);
    table.declare(stmt.target,
                  Binding{BindingKind::Deterministic, sh.value_or(Shape::scalar_real())});
    return;
  }
  Shape sh = stmt.replicate ? Shape::vector_real(*stmt.replicate) : Shape::scalar_real();
  table.declare(stmt.target, Binding{BindingKind::Parameter, sh});
}

ValidationReport validate_program(const ModelProgram& prog,
                                  const DistributionRegistry& registry) {
  ValidationReport rep;
  SymbolTable table;
  for (const auto& d : prog.data_decls) {
    if (table.find(d.name)) {
      set_failure(rep, &ValidationReport::scope_ok, d.span,
                  "duplicate data declaration '" + d.name + "'");
      return rep;
    }
    table.declare(d.name, Binding{BindingKind::Data,
                                  Shape{d.type.is_vector, d.type.length, d.type.scalar}});
  }
  for (const auto& s : prog.prior_stmts) {
    rep = validate_statement(s, BlockKind::Prior, table, registry);
    if (!rep.all_ok()) return rep;
    bind_statement(table, s, BlockKind::Prior);
  }
  for (const auto& s : prog.likelihood_stmts) {
    rep = validate_statement(s, BlockKind::Likelihood, table, registry);
    if (!rep.all_ok()) return rep;
  }
  return rep;
}

}  // namespace ppsynth
