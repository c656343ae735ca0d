#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ppsynth {

// Half-open token span [begin, end) into the token stream of the fragment or
// program the node came from, plus character offsets into the source text so
// the exact substring can be reconstructed.
struct Span {
  int tok_begin = 0;
  int tok_end = 0;
  int char_begin = 0;
  int char_end = 0;
};

enum class ScalarKind { Real, Int };

// declared type of a data column: scalar or fixed-length vector
struct DataType {
  ScalarKind scalar = ScalarKind::Real;
  bool is_vector = false;
  int64_t length = 0;

  bool operator==(const DataType&) const = default;
};

enum class ExprKind { Number, Variable, Unary, Binary, Call };

enum class BinOp { Add, Sub, Mul, Div };

// exp, log, sqrt, logit, invlogit are unary; pow is binary
enum class FnName { Exp, Log, Sqrt, Logit, InvLogit, Pow };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind;
  double number = 0.0;
  bool number_is_int = false;
  std::string var;
  BinOp op = BinOp::Add;
  FnName fn = FnName::Exp;
  std::vector<ExprPtr> args;
  Span span;

  static ExprPtr make_number(double v, bool is_int, Span s);
  static ExprPtr make_var(std::string name, Span s);
  static ExprPtr make_unary_neg(ExprPtr inner, Span s);
  static ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs, Span s);
  static ExprPtr make_call(FnName fn, std::vector<ExprPtr> args, Span s);
};

struct DistArg {
  std::optional<std::string> name;
  Span name_span;  // meaningful only when name is set
  ExprPtr value;
  Span span;
};

struct DistCall {
  std::string dist_name;
  std::vector<DistArg> args;
  Span name_span;
  Span span;
};

enum class StatementKind { Stochastic, Deterministic };

struct Statement {
  StatementKind kind = StatementKind::Stochastic;
  std::string target;
  Span target_span;
  // replication count for prior statements written as `name[k] ~ Dist(...)`
  std::optional<int64_t> replicate;
  DistCall dist;  // Stochastic only
  ExprPtr expr;   // Deterministic only
  Span span;
};

struct DataDecl {
  std::string name;
  DataType type;
  Span span;
};

struct ModelProgram {
  std::vector<DataDecl> data_decls;
  std::vector<Statement> prior_stmts;
  std::vector<Statement> likelihood_stmts;
};

bool expr_equal(const Expr& a, const Expr& b);
bool statement_equal(const Statement& a, const Statement& b);
bool program_equal(const ModelProgram& a, const ModelProgram& b);

}  // namespace ppsynth
