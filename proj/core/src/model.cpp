#include "ppsynth/model.hpp"

#include "ppsynth/autodiff.hpp"
#include "ppsynth/grammar.hpp"

#include <cmath>
#include <limits>
#include <type_traits>

namespace ppsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class T>
T softplus(const T& t) {
  using std::exp;
  using ad::value_of;
  if (value_of(t) > 30.0) return t;
  return log1p(exp(t));
  // ADL pulls in the tape overloads; the double path uses std::log1p/exp
}

double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }

}  // namespace

double CoordTransform::to_constrained(double u) const {
  switch (kind) {
    case TransformKind::Identity: return u;
    case TransformKind::Log: return std::exp(u);
    case TransformKind::Logit: return ad::inv_logit(u);
    case TransformKind::ScaledLogit: return lower + (upper - lower) * ad::inv_logit(u);
  }
  return u;
}

double CoordTransform::to_unconstrained(double x) const {
  switch (kind) {
    case TransformKind::Identity: return x;
    case TransformKind::Log: return std::log(x);
    case TransformKind::Logit: return ad::logit(x);
    case TransformKind::ScaledLogit: return ad::logit((x - lower) / (upper - lower));
  }
  return x;
}

namespace {

template <class T>
struct Value {
  bool is_vector = false;
  T s{};
  std::vector<T> v;

  size_t len() const { return is_vector ? v.size() : 1; }
  const T& at(size_t i) const { return is_vector ? v[i] : s; }
};

template <class T>
struct EvalCtx {
  const std::unordered_map<const Expr*, int>* slots;
  std::vector<Value<T>>* env;
  ad::Tape* tape;

  T lift(double d) const {
    if constexpr (std::is_same_v<T, ad::Var>) {
      return ad::Var(tape, d);
    } else {
      return d;
    }
  }
};

template <class T, class F>
Value<T> broadcast1(const Value<T>& a, F&& f) {
  Value<T> out;
  if (!a.is_vector) {
    out.s = f(a.s);
    return out;
  }
  out.is_vector = true;
  out.v.reserve(a.v.size());
  for (const T& x : a.v) out.v.push_back(f(x));
  return out;
}

template <class T, class F>
Value<T> broadcast2(const Value<T>& a, const Value<T>& b, F&& f) {
  Value<T> out;
  if (!a.is_vector && !b.is_vector) {
    out.s = f(a.s, b.s);
    return out;
  }
  size_t n = a.is_vector ? a.v.size() : b.v.size();
  out.is_vector = true;
  out.v.reserve(n);
  for (size_t i = 0; i < n; ++i) out.v.push_back(f(a.at(i), b.at(i)));
  return out;
}

template <class T>
Value<T> eval_expr(const Expr& e, const EvalCtx<T>& ctx) {
  using std::exp;
  using std::log;
  using std::sqrt;
  using std::pow;
  using ad::inv_logit;
  using ad::logit;

  switch (e.kind) {
    case ExprKind::Number: {
      Value<T> out;
      out.s = ctx.lift(e.number);
      return out;
    }
    case ExprKind::Variable:
      return (*ctx.env)[ctx.slots->at(&e)];
    case ExprKind::Unary: {
      Value<T> a = eval_expr(*e.args[0], ctx);
      return broadcast1(a, [](const T& x) { return -x; });
    }
    case ExprKind::Binary: {
      Value<T> a = eval_expr(*e.args[0], ctx);
      Value<T> b = eval_expr(*e.args[1], ctx);
      switch (e.op) {
        case BinOp::Add:
          return broadcast2(a, b, [](const T& x, const T& y) { return x + y; });
        case BinOp::Sub:
          return broadcast2(a, b, [](const T& x, const T& y) { return x - y; });
        case BinOp::Mul:
          return broadcast2(a, b, [](const T& x, const T& y) { return x * y; });
        case BinOp::Div:
          return broadcast2(a, b, [](const T& x, const T& y) { return x / y; });
      }
      break;
    }
    case ExprKind::Call: {
      Value<T> a = eval_expr(*e.args[0], ctx);
      switch (e.fn) {
        case FnName::Exp:
          return broadcast1(a, [](const T& x) { return exp(x); });
        case FnName::Log:
          return broadcast1(a, [](const T& x) { return log(x); });
        case FnName::Sqrt:
          return broadcast1(a, [](const T& x) { return sqrt(x); });
        case FnName::Logit:
          return broadcast1(a, [](const T& x) { return logit(x); });
        case FnName::InvLogit:
          return broadcast1(a, [](const T& x) { return inv_logit(x); });
        case FnName::Pow: {
          Value<T> b = eval_expr(*e.args[1], ctx);
          return broadcast2(a, b, [](const T& x, const T& y) { return pow(x, y); });
        }
      }
      break;
    }
  }
  return Value<T>{};
}

void collect_var_slots(const Expr& e, const std::unordered_map<std::string, int>& names,
                       std::unordered_map<const Expr*, int>& out) {
  if (e.kind == ExprKind::Variable) {
    out[&e] = names.at(e.var);
    return;
  }
  for (const auto& a : e.args) collect_var_slots(*a, names, out);
}

TransformKind transform_for_support(ValueSupport s) {
  switch (s) {
    case ValueSupport::Positive: return TransformKind::Log;
    case ValueSupport::UnitInterval: return TransformKind::Logit;
    case ValueSupport::BoundedPair: return TransformKind::ScaledLogit;
    default: return TransformKind::Identity;
  }
}

}  // namespace

template <class T>
struct BoundModel::EvalOutput {
  T logp{};
  std::vector<T> pointwise;
  bool finite = true;
};

template <class T>
BoundModel::EvalOutput<T> BoundModel::evaluate(const std::vector<double>& theta,
                                               void* tape_ptr) const {
  using std::exp;
  using ad::inv_logit;
  ad::Tape* tape = static_cast<ad::Tape*>(tape_ptr);
  EvalCtx<T> ctx;
  std::vector<Value<T>> env(num_slots_);
  ctx.slots = &var_slots_;
  ctx.env = &env;
  ctx.tape = tape;

  // unconstrained inputs first so gradients read off the leading adjoints
  std::vector<T> u;
  u.reserve(coord_names_.size());
  for (double t : theta) u.push_back(ctx.lift(t));

  for (size_t slot = 0; slot < data_slot_column_.size(); ++slot) {
    int col = data_slot_column_[slot];
    if (col < 0) continue;
    const DataColumn& c = dataset_.columns[col];
    Value<T> val;
    if (data_slot_scalar_[slot]) {
      val.s = ctx.lift(c.values[0]);
    } else {
      val.is_vector = true;
      val.v.reserve(c.values.size());
      for (double d : c.values) val.v.push_back(ctx.lift(d));
    }
    env[slot] = std::move(val);
  }

  T logp = ctx.lift(0.0);
  EvalOutput<T> out;

  for (const Step& step : steps_) {
    if (!step.stochastic) {
      const DeterministicTerm& dt = det_terms_[step.index];
      const Statement& stmt = program_.prior_stmts[dt.stmt_index];
      env[dt.env_slot] = eval_expr(*stmt.expr, ctx);
      continue;
    }
    const PriorTerm& pt = prior_terms_[step.index];

    // constrain the coordinates and accumulate the Jacobian
    Value<T> xval;
    xval.is_vector = pt.count > 1 || program_.prior_stmts[pt.stmt_index].replicate.has_value();
    for (int j = 0; j < pt.count; ++j) {
      const T& uj = u[pt.coord_offset + j];
      T x = uj;
      switch (pt.transform.kind) {
        case TransformKind::Identity:
          break;
        case TransformKind::Log:
          x = exp(uj);
          logp = logp + uj;
          break;
        case TransformKind::Logit:
          x = inv_logit(uj);
          logp = logp - softplus(uj) - softplus(-uj);
          break;
        case TransformKind::ScaledLogit: {
          double width = pt.transform.upper - pt.transform.lower;
          x = pt.transform.lower + width * inv_logit(uj);
          logp = logp + std::log(width) - softplus(uj) - softplus(-uj);
          break;
        }
      }
      if (xval.is_vector) {
        xval.v.push_back(x);
      } else {
        xval.s = x;
      }
    }
    env[pt.env_slot] = xval;

    std::vector<Value<T>> argvals;
    argvals.reserve(pt.param_args.size());
    for (const auto& a : pt.param_args) argvals.push_back(eval_expr(*a, ctx));

    std::vector<T> aj(pt.param_args.size(), ctx.lift(0.0));
    for (int j = 0; j < pt.count; ++j) {
      for (size_t k = 0; k < argvals.size(); ++k) aj[k] = argvals[k].at(j);
      logp = logp + log_density(pt.dist, xval.at(j), aj);
    }
  }

  for (const LikelihoodTerm& lt : like_terms_) {
    const DataColumn& col = dataset_.columns[lt.column];
    std::vector<Value<T>> argvals;
    argvals.reserve(lt.param_args.size());
    for (const auto& a : lt.param_args) argvals.push_back(eval_expr(*a, ctx));

    std::vector<T> aj(lt.param_args.size(), ctx.lift(0.0));
    for (size_t i = 0; i < col.values.size(); ++i) {
      for (size_t k = 0; k < argvals.size(); ++k) aj[k] = argvals[k].at(i);
      T ll = log_density(lt.dist, ctx.lift(col.values[i]), aj);
      logp = logp + ll;
      out.pointwise.push_back(ll);
    }
  }

  double lv = ad::value_of(logp);
  out.finite = std::isfinite(lv);
  out.logp = logp;
  return out;
}

std::optional<BoundModel> BoundModel::bind(const ModelProgram& program, const Dataset& dataset,
                                           const DistributionRegistry& registry,
                                           BindError* error) {
  auto fail = [&](std::string msg) -> std::optional<BoundModel> {
    if (error) error->message = std::move(msg);
    return std::nullopt;
  };

  ValidationReport rep = validate_program(program, registry);
  if (!rep.all_ok()) return fail("program failed validation: " + rep.message);

  BoundModel m;
  m.program_ = program;
  m.dataset_ = dataset;

  std::unordered_map<std::string, int> names;
  auto new_slot = [&](const std::string& name) {
    int slot = m.num_slots_++;
    names[name] = slot;
    return slot;
  };

  // data declarations against the dataset
  for (const auto& d : m.program_.data_decls) {
    const DataColumn* col = dataset.find(d.name);
    if (!col) return fail("dataset '" + dataset.name + "' has no column '" + d.name + "'");
    int col_index = static_cast<int>(col - dataset.columns.data());
    if (d.type.is_vector) {
      if (static_cast<int64_t>(col->values.size()) != d.type.length) {
        return fail("column '" + d.name + "' has " + std::to_string(col->values.size()) +
                    " entries, declared vector[" + std::to_string(d.type.length) + "]");
      }
    } else if (col->values.size() != 1) {
      return fail("column '" + d.name + "' has " + std::to_string(col->values.size()) +
                  " entries, declared scalar");
    }
    if (d.type.scalar == ScalarKind::Int) {
      for (double v : col->values) {
        if (std::floor(v) != v) {
          return fail("column '" + d.name + "' declared integer but contains non-integral values");
        }
      }
    }
    int slot = new_slot(d.name);
    m.data_slot_column_.resize(m.num_slots_, -1);
    m.data_slot_scalar_.resize(m.num_slots_, false);
    m.data_slot_column_[slot] = col_index;
    m.data_slot_scalar_[slot] = !d.type.is_vector;
  }

  int coord_offset = 0;
  for (size_t i = 0; i < m.program_.prior_stmts.size(); ++i) {
    const Statement& s = m.program_.prior_stmts[i];
    if (s.kind == StatementKind::Deterministic) {
      int slot = new_slot(s.target);
      m.data_slot_column_.resize(m.num_slots_, -1);
      m.data_slot_scalar_.resize(m.num_slots_, false);
      m.det_terms_.push_back({static_cast<int>(i), slot});
      m.steps_.push_back({false, static_cast<int>(m.det_terms_.size()) - 1});
      continue;
    }
    const DistributionSpec* spec = registry.find(s.dist.dist_name);
    PriorTerm pt;
    pt.stmt_index = static_cast<int>(i);
    pt.dist = spec->id;
    pt.coord_offset = coord_offset;
    pt.count = s.replicate ? static_cast<int>(*s.replicate) : 1;
    pt.transform.kind = transform_for_support(spec->support);
    if (pt.transform.kind == TransformKind::ScaledLogit) {
      auto bound_args = args_in_param_order(s.dist, *spec);
      pt.transform.lower = *fold_literal(*bound_args[0]->value);
      pt.transform.upper = *fold_literal(*bound_args[1]->value);
    }
    for (const DistArg* a : args_in_param_order(s.dist, *spec)) {
      pt.param_args.push_back(a->value);
    }
    int slot = new_slot(s.target);
    m.data_slot_column_.resize(m.num_slots_, -1);
    m.data_slot_scalar_.resize(m.num_slots_, false);
    pt.env_slot = slot;
    if (s.replicate) {
      for (int j = 0; j < pt.count; ++j) {
        m.coord_names_.push_back(s.target + "[" + std::to_string(j) + "]");
      }
    } else {
      m.coord_names_.push_back(s.target);
    }
    coord_offset += pt.count;
    m.prior_terms_.push_back(std::move(pt));
    m.steps_.push_back({true, static_cast<int>(m.prior_terms_.size()) - 1});
  }

  for (size_t i = 0; i < m.program_.likelihood_stmts.size(); ++i) {
    const Statement& s = m.program_.likelihood_stmts[i];
    const DistributionSpec* spec = registry.find(s.dist.dist_name);
    const DataColumn* col = dataset.find(s.target);
    LikelihoodTerm lt;
    lt.stmt_index = static_cast<int>(i);
    lt.dist = spec->id;
    lt.column = static_cast<int>(col - dataset.columns.data());
    for (const DistArg* a : args_in_param_order(s.dist, *spec)) {
      lt.param_args.push_back(a->value);
    }
    m.num_obs_ += static_cast<int>(col->values.size());
    m.like_terms_.push_back(std::move(lt));
  }

  // resolve every variable reference to its slot
  auto collect_stmt = [&](const Statement& s) {
    if (s.kind == StatementKind::Deterministic) {
      collect_var_slots(*s.expr, names, m.var_slots_);
      return;
    }
    for (const auto& a : s.dist.args) collect_var_slots(*a.value, names, m.var_slots_);
  };
  // order matters: a statement's expressions see only earlier bindings, but
  // names is complete here and validation already enforced use-before-def
  for (const auto& s : m.program_.prior_stmts) collect_stmt(s);
  for (const auto& s : m.program_.likelihood_stmts) collect_stmt(s);

  return m;
}

double BoundModel::logp(const std::vector<double>& theta) const {
  EvalOutput<double> out = evaluate<double>(theta, nullptr);
  if (!out.finite) return -kInf;
  return out.logp;
}

GradResult BoundModel::logp_grad(const std::vector<double>& theta) const {
  ad::Tape tape;
  tape.reserve(4096);
  EvalOutput<ad::Var> out = evaluate<ad::Var>(theta, &tape);
  GradResult res;
  res.grad.assign(theta.size(), 0.0);
  double lv = out.logp.value();
  if (!out.finite) {
    res.logp = -kInf;
    res.ok = false;
    return res;
  }
  res.logp = lv;
  std::vector<double> adj;
  tape.backward(out.logp.index(), adj);
  bool grad_ok = true;
  for (size_t i = 0; i < theta.size(); ++i) {
    res.grad[i] = adj[i];
    if (!std::isfinite(adj[i])) grad_ok = false;
  }
  res.ok = grad_ok;
  return res;
}

std::vector<double> BoundModel::pointwise_loglik(const std::vector<double>& theta) const {
  EvalOutput<double> out = evaluate<double>(theta, nullptr);
  return out.pointwise;
}

std::vector<double> BoundModel::to_constrained(const std::vector<double>& theta) const {
  std::vector<double> out(theta.size());
  for (const PriorTerm& pt : prior_terms_) {
    for (int j = 0; j < pt.count; ++j) {
      out[pt.coord_offset + j] = pt.transform.to_constrained(theta[pt.coord_offset + j]);
    }
  }
  return out;
}

std::vector<double> BoundModel::to_unconstrained(const std::vector<double>& constrained) const {
  std::vector<double> out(constrained.size());
  for (const PriorTerm& pt : prior_terms_) {
    for (int j = 0; j < pt.count; ++j) {
      out[pt.coord_offset + j] = pt.transform.to_unconstrained(constrained[pt.coord_offset + j]);
    }
  }
  return out;
}

}  // namespace ppsynth
