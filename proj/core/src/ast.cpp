#include "ppsynth/ast.hpp"

namespace ppsynth {

ExprPtr Expr::make_number(double v, bool is_int, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Number;
  e->number = v;
  e->number_is_int = is_int;
  e->span = s;
  return e;
}

ExprPtr Expr::make_var(std::string name, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Variable;
  e->var = std::move(name);
  e->span = s;
  return e;
}

ExprPtr Expr::make_unary_neg(ExprPtr inner, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Unary;
  e->args.push_back(std::move(inner));
  e->span = s;
  return e;
}

ExprPtr Expr::make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Binary;
  e->op = op;
  e->args.push_back(std::move(lhs));
  e->args.push_back(std::move(rhs));
  e->span = s;
  return e;
}

ExprPtr Expr::make_call(FnName fn, std::vector<ExprPtr> args, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = ExprKind::Call;
  e->fn = fn;
  e->args = std::move(args);
  e->span = s;
  return e;
}

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::Number:
      return a.number == b.number;
    case ExprKind::Variable:
      return a.var == b.var;
    case ExprKind::Unary:
      return expr_equal(*a.args[0], *b.args[0]);
    case ExprKind::Binary:
      return a.op == b.op && expr_equal(*a.args[0], *b.args[0]) &&
             expr_equal(*a.args[1], *b.args[1]);
    case ExprKind::Call: {
      if (a.fn != b.fn || a.args.size() != b.args.size()) return false;
      for (size_t i = 0; i < a.args.size(); ++i) {
        if (!expr_equal(*a.args[i], *b.args[i])) return false;
      }
      return true;
    }
  }
  return false;
}

namespace {

bool dist_equal(const DistCall& a, const DistCall& b) {
  if (a.dist_name != b.dist_name || a.args.size() != b.args.size()) return false;
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (a.args[i].name != b.args[i].name) return false;
    if (!expr_equal(*a.args[i].value, *b.args[i].value)) return false;
  }
  return true;
}

}  // namespace

bool statement_equal(const Statement& a, const Statement& b) {
  if (a.kind != b.kind || a.target != b.target || a.replicate != b.replicate) return false;
  if (a.kind == StatementKind::Deterministic) return expr_equal(*a.expr, *b.expr);
  return dist_equal(a.dist, b.dist);
}

bool program_equal(const ModelProgram& a, const ModelProgram& b) {
  if (a.data_decls.size() != b.data_decls.size()) return false;
  for (size_t i = 0; i < a.data_decls.size(); ++i) {
    if (a.data_decls[i].name != b.data_decls[i].name) return false;
    if (!(a.data_decls[i].type == b.data_decls[i].type)) return false;
  }
  if (a.prior_stmts.size() != b.prior_stmts.size()) return false;
  if (a.likelihood_stmts.size() != b.likelihood_stmts.size()) return false;
  for (size_t i = 0; i < a.prior_stmts.size(); ++i) {
    if (!statement_equal(a.prior_stmts[i], b.prior_stmts[i])) return false;
  }
  for (size_t i = 0; i < a.likelihood_stmts.size(); ++i) {
    if (!statement_equal(a.likelihood_stmts[i], b.likelihood_stmts[i])) return false;
  }
  return true;
}

}  // namespace ppsynth
