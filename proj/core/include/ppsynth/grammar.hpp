#pragma once

#include "ppsynth/ast.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ppsynth {

enum class TokenKind : int {
  KwModel,
  KwData,
  KwPrior,
  KwLikelihood,
  KwReal,
  KwInt,
  KwVector,
  KwIntVector,
  LBrace,
  RBrace,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Colon,
  Semi,
  Comma,
  Tilde,
  Assign,
  Plus,
  Minus,
  Star,
  Slash,
  KwExp,
  KwLog,
  KwSqrt,
  KwLogit,
  KwInvLogit,
  KwPow,
  Ident,
  IntLit,
  FloatLit,
};

constexpr int kNumTokenKinds = 32;

const char* token_kind_name(TokenKind k);

struct Token {
  TokenKind kind;
  std::string text;
  int char_begin = 0;
  int char_end = 0;
};

struct LexError {
  std::string message;
  int char_pos = 0;
};

struct LexResult {
  std::vector<Token> tokens;
  std::optional<LexError> error;
  bool ok() const { return !error.has_value(); }
};

// whitespace-insensitive tokenizer for the modeling DSL
LexResult lex(const std::string& text);

// grammar symbols: token kinds double as terminal ids, nonterminals follow
using SymId = int;

namespace sym {
constexpr SymId first_nonterminal = 100;
enum : SymId {
  Program = first_nonterminal,
  DataBlock,
  Decls,
  Decl,
  Dtype,
  PriorBlock,
  PStmts,
  PStmt,
  Rep,
  LikeBlock,
  LStmts,
  LStmt,
  Dist,
  Args,
  Arg,
  Expr,
  Term,
  Factor,
  Atom,
  Call,
  Number,
};
}  // namespace sym

const char* symbol_name(SymId s);

// syntactic category currently being expanded, reported at statement
// granularity for the decoder's bookkeeping
enum class FrontierKind { Statement, Distribution, ArgList, Expr };

const char* frontier_name(FrontierKind k);

// Incremental recognizer state over token kinds (an Earley chart). Exact:
// a token kind is accepted iff the extended prefix can still be completed
// to a full program. Copyable; copies evolve independently.
class PrefixState {
 public:
  struct Item {
    int16_t prod;
    int16_t dot;
    int32_t origin;
    bool operator==(const Item&) const = default;
  };

  static PrefixState initial();

  // true iff some viable continuation starts with this token kind
  bool can_advance(TokenKind k) const;

  // consume one token; returns false and leaves the state unchanged when
  // the kind is not viable
  bool advance(TokenKind k);

  // a complete program has been consumed (no further token is viable)
  bool complete() const;

  int consumed() const { return static_cast<int>(chart_.size()) - 1; }

  // roll back to the state after `n_tokens` tokens; n_tokens <= consumed()
  void truncate(int n_tokens);

  // nullopt once the program is complete
  std::optional<FrontierKind> frontier() const;

 private:
  PrefixState() = default;
  void close_set();
  std::vector<std::vector<Item>> chart_;
};

struct SyntaxError {
  std::string message;
  int token_index = 0;
  int char_pos = 0;
};

// concrete parse tree node; leaves are terminals, children spans partition
// the parent span
struct ParseNode {
  SymId symbol;
  Span span;
  std::vector<ParseNode> children;
};

struct ParseOutcome {
  std::optional<ModelProgram> program;
  std::optional<ParseNode> tree;
  std::optional<SyntaxError> error;
  std::vector<Token> tokens;
  bool ok() const { return program.has_value(); }
};

ParseOutcome parse_program_text(const std::string& text);

// parse a token slice as a single prior- or likelihood-block statement
enum class BlockKind { Prior, Likelihood };

struct FragmentParse {
  std::optional<Statement> stmt;
  std::optional<SyntaxError> error;
  bool ok() const { return stmt.has_value(); }
};

FragmentParse parse_statement_tokens(const std::vector<Token>& tokens, BlockKind block);

// canonical rendering: two-space block indent, one statement per line,
// single spaces inside statements
std::string render(const ModelProgram& program);
std::string render_statement(const Statement& stmt);
std::string render_expr(const Expr& expr);
std::string render_data_decl(const DataDecl& decl);
std::string render_number(double value, bool is_int);

}  // namespace ppsynth
