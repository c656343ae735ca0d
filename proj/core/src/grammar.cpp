#include "ppsynth/grammar.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace ppsynth {

const char* token_kind_name(TokenKind k) {
  switch (k) {
    case TokenKind::KwModel: return "'model'";
    case TokenKind::KwData: return "'data'";
    case TokenKind::KwPrior: return "'prior'";
    case TokenKind::KwLikelihood: return "'likelihood'";
    case TokenKind::KwReal: return "'real'";
    case TokenKind::KwInt: return "'int'";
    case TokenKind::KwVector: return "'vector'";
    case TokenKind::KwIntVector: return "'intvector'";
    case TokenKind::LBrace: return "'{'";
    case TokenKind::RBrace: return "'}'";
    case TokenKind::LParen: return "'('";
    case TokenKind::RParen: return "')'";
    case TokenKind::LBracket: return "'['";
    case TokenKind::RBracket: return "']'";
    case TokenKind::Colon: return "':'";
    case TokenKind::Semi: return "';'";
    case TokenKind::Comma: return "','";
    case TokenKind::Tilde: return "'~'";
    case TokenKind::Assign: return "'='";
    case TokenKind::Plus: return "'+'";
    case TokenKind::Minus: return "'-'";
    case TokenKind::Star: return "'*'";
    case TokenKind::Slash: return "'/'";
    case TokenKind::KwExp: return "'exp'";
    case TokenKind::KwLog: return "'log'";
    case TokenKind::KwSqrt: return "'sqrt'";
    case TokenKind::KwLogit: return "'logit'";
    case TokenKind::KwInvLogit: return "'invlogit'";
    case TokenKind::KwPow: return "'pow'";
    case TokenKind::Ident: return "identifier";
    case TokenKind::IntLit: return "integer literal";
    case TokenKind::FloatLit: return "numeric literal";
  }
  return "?";
}

const char* symbol_name(SymId s) {
  if (s < sym::first_nonterminal) return token_kind_name(static_cast<TokenKind>(s));
  switch (s) {
    case sym::Program: return "program";
    case sym::DataBlock: return "data-block";
    case sym::Decls: return "decls";
    case sym::Decl: return "decl";
    case sym::Dtype: return "dtype";
    case sym::PriorBlock: return "prior-block";
    case sym::PStmts: return "pstmts";
    case sym::PStmt: return "pstmt";
    case sym::Rep: return "rep";
    case sym::LikeBlock: return "likelihood-block";
    case sym::LStmts: return "lstmts";
    case sym::LStmt: return "lstmt";
    case sym::Dist: return "dist";
    case sym::Args: return "args";
    case sym::Arg: return "arg";
    case sym::Expr: return "expr";
    case sym::Term: return "term";
    case sym::Factor: return "factor";
    case sym::Atom: return "atom";
    case sym::Call: return "call";
    case sym::Number: return "number";
  }
  return "?";
}

const char* frontier_name(FrontierKind k) {
  switch (k) {
    case FrontierKind::Statement: return "Statement";
    case FrontierKind::Distribution: return "Distribution";
    case FrontierKind::ArgList: return "ArgList";
    case FrontierKind::Expr: return "Expr";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// lexer

namespace {

const std::map<std::string, TokenKind>& keyword_map() {
  static const std::map<std::string, TokenKind> m = {
      {"model", TokenKind::KwModel},
      {"data", TokenKind::KwData},
      {"prior", TokenKind::KwPrior},
      {"likelihood", TokenKind::KwLikelihood},
      {"real", TokenKind::KwReal},
      {"int", TokenKind::KwInt},
      {"vector", TokenKind::KwVector},
      {"intvector", TokenKind::KwIntVector},
      {"exp", TokenKind::KwExp},
      {"log", TokenKind::KwLog},
      {"sqrt", TokenKind::KwSqrt},
      {"logit", TokenKind::KwLogit},
      {"invlogit", TokenKind::KwInvLogit},
      {"pow", TokenKind::KwPow},
  };
  return m;
}

}  // namespace

LexResult lex(const std::string& text) {
  LexResult res;
  size_t i = 0;
  size_t n = text.size();
  auto fail = [&](std::string msg, size_t pos) {
    res.error = LexError{std::move(msg), static_cast<int>(pos)};
    return res;
  };

  while (i < n) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < n && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) ++i;
      std::string word = text.substr(start, i - start);
      auto it = keyword_map().find(word);
      TokenKind k = it != keyword_map().end() ? it->second : TokenKind::Ident;
      res.tokens.push_back({k, std::move(word), static_cast<int>(start), static_cast<int>(i)});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      bool is_float = false;
      while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      if (i < n && text[i] == '.') {
        if (i + 1 >= n || !std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
          return fail("malformed number: expected digit after '.'", i);
        }
        is_float = true;
        ++i;
        while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      }
      if (i < n && (text[i] == 'e' || text[i] == 'E')) {
        size_t j = i + 1;
        if (j < n && (text[j] == '+' || text[j] == '-')) ++j;
        if (j >= n || !std::isdigit(static_cast<unsigned char>(text[j]))) {
          return fail("malformed number: expected digit in exponent", i);
        }
        is_float = true;
        i = j;
        while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      }
      res.tokens.push_back({is_float ? TokenKind::FloatLit : TokenKind::IntLit,
                            text.substr(start, i - start), static_cast<int>(start),
                            static_cast<int>(i)});
      continue;
    }
    TokenKind k;
    switch (c) {
      case '{': k = TokenKind::LBrace; break;
      case '}': k = TokenKind::RBrace; break;
      case '(': k = TokenKind::LParen; break;
      case ')': k = TokenKind::RParen; break;
      case '[': k = TokenKind::LBracket; break;
      case ']': k = TokenKind::RBracket; break;
      case ':': k = TokenKind::Colon; break;
      case ';': k = TokenKind::Semi; break;
      case ',': k = TokenKind::Comma; break;
      case '~': k = TokenKind::Tilde; break;
      case '=': k = TokenKind::Assign; break;
      case '+': k = TokenKind::Plus; break;
      case '-': k = TokenKind::Minus; break;
      case '*': k = TokenKind::Star; break;
      case '/': k = TokenKind::Slash; break;
      default:
        return fail(std::string("unexpected character '") + c + "'", i);
    }
    res.tokens.push_back({k, std::string(1, c), static_cast<int>(start), static_cast<int>(start + 1)});
    ++i;
  }
  return res;
}

// ---------------------------------------------------------------------------
// grammar tables

namespace {

struct Production {
  SymId lhs;
  std::vector<SymId> rhs;
};

struct Tables {
  std::vector<Production> prods;
  std::vector<std::vector<int>> by_lhs;
  std::vector<bool> nullable;
  int num_nonterminals = 0;
};

SymId t(TokenKind k) { return static_cast<SymId>(k); }

const Tables& tables() {
  static const Tables tb = [] {
    Tables tb;
    auto P = [&tb](SymId lhs, std::vector<SymId> rhs) {
      tb.prods.push_back({lhs, std::move(rhs)});
    };
    using sym::Program;
    P(Program, {t(TokenKind::KwModel), t(TokenKind::LBrace), sym::DataBlock, sym::PriorBlock,
                sym::LikeBlock, t(TokenKind::RBrace)});
    P(sym::DataBlock, {t(TokenKind::KwData), t(TokenKind::LBrace), sym::Decls, t(TokenKind::RBrace)});
    P(sym::Decls, {});
    P(sym::Decls, {sym::Decls, sym::Decl});
    P(sym::Decl, {t(TokenKind::Ident), t(TokenKind::Colon), sym::Dtype, t(TokenKind::Semi)});
    P(sym::Dtype, {t(TokenKind::KwReal)});
    P(sym::Dtype, {t(TokenKind::KwInt)});
    P(sym::Dtype, {t(TokenKind::KwVector), t(TokenKind::LBracket), t(TokenKind::IntLit),
                   t(TokenKind::RBracket)});
    P(sym::Dtype, {t(TokenKind::KwIntVector), t(TokenKind::LBracket), t(TokenKind::IntLit),
                   t(TokenKind::RBracket)});
    P(sym::PriorBlock,
      {t(TokenKind::KwPrior), t(TokenKind::LBrace), sym::PStmts, t(TokenKind::RBrace)});
    P(sym::PStmts, {});
    P(sym::PStmts, {sym::PStmts, sym::PStmt});
    P(sym::PStmt, {t(TokenKind::Ident), t(TokenKind::Tilde), sym::Dist, t(TokenKind::Semi)});
    P(sym::PStmt,
      {t(TokenKind::Ident), sym::Rep, t(TokenKind::Tilde), sym::Dist, t(TokenKind::Semi)});
    P(sym::PStmt, {t(TokenKind::Ident), t(TokenKind::Assign), sym::Expr, t(TokenKind::Semi)});
    P(sym::Rep, {t(TokenKind::LBracket), t(TokenKind::IntLit), t(TokenKind::RBracket)});
    P(sym::LikeBlock, {t(TokenKind::KwLikelihood), t(TokenKind::LBrace), sym::LStmt, sym::LStmts,
                       t(TokenKind::RBrace)});
    P(sym::LStmts, {});
    P(sym::LStmts, {sym::LStmts, sym::LStmt});
    P(sym::LStmt, {t(TokenKind::Ident), t(TokenKind::Tilde), sym::Dist, t(TokenKind::Semi)});
    P(sym::Dist, {t(TokenKind::Ident), t(TokenKind::LParen), t(TokenKind::RParen)});
    P(sym::Dist, {t(TokenKind::Ident), t(TokenKind::LParen), sym::Args, t(TokenKind::RParen)});
    P(sym::Args, {sym::Arg});
    P(sym::Args, {sym::Args, t(TokenKind::Comma), sym::Arg});
    P(sym::Arg, {sym::Expr});
    P(sym::Arg, {t(TokenKind::Ident), t(TokenKind::Assign), sym::Expr});
    P(sym::Expr, {sym::Term});
    P(sym::Expr, {sym::Expr, t(TokenKind::Plus), sym::Term});
    P(sym::Expr, {sym::Expr, t(TokenKind::Minus), sym::Term});
    P(sym::Term, {sym::Factor});
    P(sym::Term, {sym::Term, t(TokenKind::Star), sym::Factor});
    P(sym::Term, {sym::Term, t(TokenKind::Slash), sym::Factor});
    P(sym::Factor, {sym::Atom});
    P(sym::Factor, {t(TokenKind::Minus), sym::Factor});
    P(sym::Atom, {sym::Number});
    P(sym::Atom, {t(TokenKind::Ident)});
    P(sym::Atom, {sym::Call});
    P(sym::Atom, {t(TokenKind::LParen), sym::Expr, t(TokenKind::RParen)});
    P(sym::Call, {t(TokenKind::KwExp), t(TokenKind::LParen), sym::Expr, t(TokenKind::RParen)});
    P(sym::Call, {t(TokenKind::KwLog), t(TokenKind::LParen), sym::Expr, t(TokenKind::RParen)});
    P(sym::Call, {t(TokenKind::KwSqrt), t(TokenKind::LParen), sym::Expr, t(TokenKind::RParen)});
    P(sym::Call, {t(TokenKind::KwLogit), t(TokenKind::LParen), sym::Expr, t(TokenKind::RParen)});
    P(sym::Call,
      {t(TokenKind::KwInvLogit), t(TokenKind::LParen), sym::Expr, t(TokenKind::RParen)});
    P(sym::Call, {t(TokenKind::KwPow), t(TokenKind::LParen), sym::Expr, t(TokenKind::Comma),
                  sym::Expr, t(TokenKind::RParen)});
    P(sym::Number, {t(TokenKind::IntLit)});
    P(sym::Number, {t(TokenKind::FloatLit)});

    int max_nt = 0;
    for (const auto& p : tb.prods) max_nt = std::max(max_nt, p.lhs - sym::first_nonterminal);
    tb.num_nonterminals = max_nt + 1;
    tb.by_lhs.assign(tb.num_nonterminals, {});
    for (size_t i = 0; i < tb.prods.size(); ++i) {
      tb.by_lhs[tb.prods[i].lhs - sym::first_nonterminal].push_back(static_cast<int>(i));
    }
    // nullable fixpoint
    tb.nullable.assign(tb.num_nonterminals, false);
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& p : tb.prods) {
        int lhs_idx = p.lhs - sym::first_nonterminal;
        if (tb.nullable[lhs_idx]) continue;
        bool all_null = true;
        for (SymId s : p.rhs) {
          if (s < sym::first_nonterminal || !tb.nullable[s - sym::first_nonterminal]) {
            all_null = false;
            break;
          }
        }
        if (all_null) {
          tb.nullable[lhs_idx] = true;
          changed = true;
        }
      }
    }
    return tb;
  }();
  return tb;
}

bool is_nonterminal(SymId s) { return s >= sym::first_nonterminal; }

}  // namespace

// ---------------------------------------------------------------------------
// PrefixState (Earley recognizer)

PrefixState PrefixState::initial() {
  PrefixState st;
  st.chart_.emplace_back();
  const Tables& tb = tables();
  for (int q : tb.by_lhs[sym::Program - sym::first_nonterminal]) {
    st.chart_[0].push_back({static_cast<int16_t>(q), 0, 0});
  }
  st.close_set();
  return st;
}

void PrefixState::close_set() {
  const Tables& tb = tables();
  int cur = static_cast<int>(chart_.size()) - 1;
  auto add = [&](Item it) {
    auto& set = chart_[cur];
    for (const auto& e : set) {
      if (e == it) return;
    }
    set.push_back(it);
  };
  for (size_t i = 0; i < chart_[cur].size(); ++i) {
    Item it = chart_[cur][i];
    const Production& pr = tb.prods[it.prod];
    if (it.dot == static_cast<int>(pr.rhs.size())) {
      // completion: advance every waiting parent in the origin set
      for (size_t j = 0; j < chart_[it.origin].size(); ++j) {
        Item p = chart_[it.origin][j];
        const Production& pp = tb.prods[p.prod];
        if (p.dot < static_cast<int>(pp.rhs.size()) && pp.rhs[p.dot] == pr.lhs) {
          add({p.prod, static_cast<int16_t>(p.dot + 1), p.origin});
        }
      }
    } else {
      SymId nxt = pr.rhs[it.dot];
      if (is_nonterminal(nxt)) {
        for (int q : tb.by_lhs[nxt - sym::first_nonterminal]) {
          add({static_cast<int16_t>(q), 0, cur});
        }
        // nullable shortcut keeps same-set completions sound
        if (tb.nullable[nxt - sym::first_nonterminal]) {
          add({it.prod, static_cast<int16_t>(it.dot + 1), it.origin});
        }
      }
    }
  }
}

bool PrefixState::can_advance(TokenKind k) const {
  const Tables& tb = tables();
  SymId target = static_cast<SymId>(k);
  for (const Item& it : chart_.back()) {
    const Production& pr = tb.prods[it.prod];
    if (it.dot < static_cast<int>(pr.rhs.size()) && pr.rhs[it.dot] == target) return true;
  }
  return false;
}

bool PrefixState::advance(TokenKind k) {
  const Tables& tb = tables();
  SymId target = static_cast<SymId>(k);
  std::vector<Item> next;
  for (const Item& it : chart_.back()) {
    const Production& pr = tb.prods[it.prod];
    if (it.dot < static_cast<int>(pr.rhs.size()) && pr.rhs[it.dot] == target) {
      next.push_back({it.prod, static_cast<int16_t>(it.dot + 1), it.origin});
    }
  }
  if (next.empty()) return false;
  chart_.push_back(std::move(next));
  close_set();
  return true;
}

bool PrefixState::complete() const {
  const Tables& tb = tables();
  for (const Item& it : chart_.back()) {
    const Production& pr = tb.prods[it.prod];
    if (pr.lhs == sym::Program && it.dot == static_cast<int>(pr.rhs.size()) && it.origin == 0) {
      return true;
    }
  }
  return false;
}

void PrefixState::truncate(int n_tokens) {
  if (n_tokens < 0 || n_tokens > consumed()) {
    throw std::out_of_range("PrefixState::truncate beyond chart");
  }
  chart_.resize(static_cast<size_t>(n_tokens) + 1);
}

namespace {

// coarse syntactic category for frontier reporting
int frontier_category(SymId s) {
  switch (s) {
    case sym::Dist:
      return 1;
    case sym::Args:
    case sym::Arg:
      return 2;
    case sym::Expr:
    case sym::Term:
    case sym::Factor:
    case sym::Atom:
    case sym::Call:
    case sym::Number:
      return 3;
    default:
      return 0;  // statement/block level
  }
}

FrontierKind category_kind(int c) {
  switch (c) {
    case 1: return FrontierKind::Distribution;
    case 2: return FrontierKind::ArgList;
    case 3: return FrontierKind::Expr;
    default: return FrontierKind::Statement;
  }
}

}  // namespace

std::optional<FrontierKind> PrefixState::frontier() const {
  if (complete()) return std::nullopt;
  const Tables& tb = tables();
  bool expected[4] = {false, false, false, false};
  bool in_progress[4] = {false, false, false, false};
  for (const Item& it : chart_.back()) {
    const Production& pr = tb.prods[it.prod];
    bool is_complete = it.dot == static_cast<int>(pr.rhs.size());
    if (!is_complete) {
      SymId nxt = pr.rhs[it.dot];
      if (is_nonterminal(nxt)) expected[frontier_category(nxt)] = true;
      if (it.dot > 0) in_progress[frontier_category(pr.lhs)] = true;
    }
  }
  // outermost expected expansion wins; otherwise the innermost unfinished one
  for (int c = 0; c < 4; ++c) {
    if (expected[c]) return category_kind(c);
  }
  for (int c = 3; c >= 0; --c) {
    if (in_progress[c]) return category_kind(c);
  }
  return FrontierKind::Statement;
}

// ---------------------------------------------------------------------------
// recursive-descent parser

namespace {

struct Abort {
  SyntaxError err;
};

class Parser {
 public:
  explicit Parser(const std::vector<Token>& toks) : toks_(toks) {}

  ModelProgram parse_program(ParseNode* tree) {
    ParseNode node{sym::Program, {}, {}};
    ModelProgram prog;
    leaf(node, expect(TokenKind::KwModel));
    leaf(node, expect(TokenKind::LBrace));
    node.children.push_back(parse_data_block(prog));
    node.children.push_back(parse_prior_block(prog));
    node.children.push_back(parse_likelihood_block(prog));
    leaf(node, expect(TokenKind::RBrace));
    if (pos_ < toks_.size()) {
      fail("trailing input after program", pos_);
    }
    finish_span(node);
    if (tree) *tree = std::move(node);
    return prog;
  }

  Statement parse_fragment(BlockKind block) {
    Statement s = block == BlockKind::Prior ? parse_pstmt(nullptr) : parse_lstmt(nullptr);
    if (pos_ < toks_.size()) fail("trailing input after statement", pos_);
    return s;
  }

 private:
  const std::vector<Token>& toks_;
  size_t pos_ = 0;

  [[noreturn]] void fail(std::string msg, size_t at) {
    int cpos = at < toks_.size() ? toks_[at].char_begin
                                 : (toks_.empty() ? 0 : toks_.back().char_end);
    throw Abort{SyntaxError{std::move(msg), static_cast<int>(at), cpos}};
  }

  const Token& peek(size_t ahead = 0) {
    if (pos_ + ahead >= toks_.size()) fail("unexpected end of input", toks_.size());
    return toks_[pos_ + ahead];
  }

  bool at(TokenKind k, size_t ahead = 0) {
    return pos_ + ahead < toks_.size() && toks_[pos_ + ahead].kind == k;
  }

  size_t expect(TokenKind k) {
    if (pos_ >= toks_.size()) {
      fail(std::string("unexpected end of input, expected ") + token_kind_name(k), toks_.size());
    }
    if (toks_[pos_].kind != k) {
      fail(std::string("expected ") + token_kind_name(k) + ", found " +
               token_kind_name(toks_[pos_].kind),
           pos_);
    }
    return pos_++;
  }

  Span tok_span(size_t i) const {
    const Token& tk = toks_[i];
    return Span{static_cast<int>(i), static_cast<int>(i) + 1, tk.char_begin, tk.char_end};
  }

  void leaf(ParseNode& parent, size_t tok_index) {
    parent.children.push_back(
        ParseNode{static_cast<SymId>(toks_[tok_index].kind), tok_span(tok_index), {}});
  }

  static void finish_span(ParseNode& node) {
    if (node.children.empty()) return;
    node.span.tok_begin = node.children.front().span.tok_begin;
    node.span.char_begin = node.children.front().span.char_begin;
    node.span.tok_end = node.children.back().span.tok_end;
    node.span.char_end = node.children.back().span.char_end;
  }

  Span span_from(size_t tok_begin) const {
    Span s;
    s.tok_begin = static_cast<int>(tok_begin);
    s.tok_end = static_cast<int>(pos_);
    s.char_begin = toks_[tok_begin].char_begin;
    s.char_end = toks_[pos_ - 1].char_end;
    return s;
  }

  int64_t parse_int_literal(size_t tok_index, const char* what) {
    const std::string& txt = toks_[tok_index].text;
    int64_t v = 0;
    auto [p, ec] = std::from_chars(txt.data(), txt.data() + txt.size(), v);
    if (ec != std::errc() || p != txt.data() + txt.size() || v < 0 || v > 100000000) {
      fail(std::string(what) + " out of range", tok_index);
    }
    return v;
  }

  ParseNode parse_data_block(ModelProgram& prog) {
    ParseNode node{sym::DataBlock, {}, {}};
    leaf(node, expect(TokenKind::KwData));
    leaf(node, expect(TokenKind::LBrace));
    ParseNode decls{sym::Decls, {}, {}};
    while (at(TokenKind::Ident)) {
      decls.children.push_back(parse_decl(prog));
    }
    if (!decls.children.empty()) {
      finish_span(decls);
      node.children.push_back(std::move(decls));
    }
    leaf(node, expect(TokenKind::RBrace));
    finish_span(node);
    return node;
  }

  ParseNode parse_decl(ModelProgram& prog) {
    ParseNode node{sym::Decl, {}, {}};
    size_t start = pos_;
    size_t name_tok = expect(TokenKind::Ident);
    leaf(node, name_tok);
    leaf(node, expect(TokenKind::Colon));

    ParseNode dtype_node{sym::Dtype, {}, {}};
    DataType dt;
    if (at(TokenKind::KwReal)) {
      leaf(dtype_node, expect(TokenKind::KwReal));
      dt = DataType{ScalarKind::Real, false, 0};
    } else if (at(TokenKind::KwInt)) {
      leaf(dtype_node, expect(TokenKind::KwInt));
      dt = DataType{ScalarKind::Int, false, 0};
    } else if (at(TokenKind::KwVector) || at(TokenKind::KwIntVector)) {
      bool is_int = at(TokenKind::KwIntVector);
      leaf(dtype_node, pos_++);
      leaf(dtype_node, expect(TokenKind::LBracket));
      size_t len_tok = expect(TokenKind::IntLit);
      leaf(dtype_node, len_tok);
      leaf(dtype_node, expect(TokenKind::RBracket));
      dt = DataType{is_int ? ScalarKind::Int : ScalarKind::Real, true,
                    parse_int_literal(len_tok, "vector length")};
    } else {
      fail("expected data type ('real', 'int', 'vector[n]' or 'intvector[n]')", pos_);
    }
    finish_span(dtype_node);
    node.children.push_back(std::move(dtype_node));
    leaf(node, expect(TokenKind::Semi));
    finish_span(node);

    prog.data_decls.push_back(DataDecl{toks_[name_tok].text, dt, span_from(start)});
    return node;
  }

  ParseNode parse_prior_block(ModelProgram& prog) {
    ParseNode node{sym::PriorBlock, {}, {}};
    leaf(node, expect(TokenKind::KwPrior));
    leaf(node, expect(TokenKind::LBrace));
    ParseNode stmts{sym::PStmts, {}, {}};
    while (at(TokenKind::Ident)) {
      ParseNode stmt_node{sym::PStmt, {}, {}};
      prog.prior_stmts.push_back(parse_pstmt(&stmt_node));
      stmts.children.push_back(std::move(stmt_node));
    }
    if (!stmts.children.empty()) {
      finish_span(stmts);
      node.children.push_back(std::move(stmts));
    }
    leaf(node, expect(TokenKind::RBrace));
    finish_span(node);
    return node;
  }

  ParseNode parse_likelihood_block(ModelProgram& prog) {
    ParseNode node{sym::LikeBlock, {}, {}};
    leaf(node, expect(TokenKind::KwLikelihood));
    leaf(node, expect(TokenKind::LBrace));
    if (!at(TokenKind::Ident)) {
      fail("likelihood block requires at least one statement", pos_);
    }
    while (at(TokenKind::Ident)) {
      ParseNode stmt_node{sym::LStmt, {}, {}};
      prog.likelihood_stmts.push_back(parse_lstmt(&stmt_node));
      node.children.push_back(std::move(stmt_node));
    }
    leaf(node, expect(TokenKind::RBrace));
    finish_span(node);
    return node;
  }

  Statement parse_pstmt(ParseNode* tree) {
    ParseNode node{sym::PStmt, {}, {}};
    Statement s;
    size_t start = pos_;
    size_t name_tok = expect(TokenKind::Ident);
    leaf(node, name_tok);
    s.target = toks_[name_tok].text;
    s.target_span = tok_span(name_tok);

    if (at(TokenKind::LBracket)) {
      ParseNode rep{sym::Rep, {}, {}};
      leaf(rep, expect(TokenKind::LBracket));
      size_t count_tok = expect(TokenKind::IntLit);
      leaf(rep, count_tok);
      leaf(rep, expect(TokenKind::RBracket));
      finish_span(rep);
      node.children.push_back(std::move(rep));
      s.replicate = parse_int_literal(count_tok, "replication count");
    }

    if (at(TokenKind::Assign)) {
      if (s.replicate) fail("'=' statement cannot carry a replication count", pos_);
      leaf(node, expect(TokenKind::Assign));
      s.kind = StatementKind::Deterministic;
      node.children.push_back(parse_expr_node(&s.expr));
    } else {
      leaf(node, expect(TokenKind::Tilde));
      s.kind = StatementKind::Stochastic;
      node.children.push_back(parse_dist(&s.dist));
    }
    leaf(node, expect(TokenKind::Semi));
    finish_span(node);
    s.span = span_from(start);
    if (tree) *tree = std::move(node);
    return s;
  }

  Statement parse_lstmt(ParseNode* tree) {
    ParseNode node{sym::LStmt, {}, {}};
    Statement s;
    size_t start = pos_;
    size_t name_tok = expect(TokenKind::Ident);
    leaf(node, name_tok);
    s.target = toks_[name_tok].text;
    s.target_span = tok_span(name_tok);
    s.kind = StatementKind::Stochastic;
    leaf(node, expect(TokenKind::Tilde));
    node.children.push_back(parse_dist(&s.dist));
    leaf(node, expect(TokenKind::Semi));
    finish_span(node);
    s.span = span_from(start);
    if (tree) *tree = std::move(node);
    return s;
  }

  ParseNode parse_dist(DistCall* out) {
    ParseNode node{sym::Dist, {}, {}};
    size_t start = pos_;
    size_t name_tok = expect(TokenKind::Ident);
    leaf(node, name_tok);
    out->dist_name = toks_[name_tok].text;
    out->name_span = tok_span(name_tok);
    leaf(node, expect(TokenKind::LParen));
    if (!at(TokenKind::RParen)) {
      ParseNode args{sym::Args, {}, {}};
      while (true) {
        ParseNode arg{sym::Arg, {}, {}};
        DistArg da;
        size_t arg_start = pos_;
        if (at(TokenKind::Ident) && at(TokenKind::Assign, 1)) {
          size_t pname_tok = expect(TokenKind::Ident);
          leaf(arg, pname_tok);
          leaf(arg, expect(TokenKind::Assign));
          da.name = toks_[pname_tok].text;
          da.name_span = tok_span(pname_tok);
        }
        arg.children.push_back(parse_expr_node(&da.value));
        finish_span(arg);
        da.span = span_from(arg_start);
        out->args.push_back(std::move(da));
        args.children.push_back(std::move(arg));
        if (at(TokenKind::Comma)) {
          leaf(args, expect(TokenKind::Comma));
          continue;
        }
        break;
      }
      finish_span(args);
      node.children.push_back(std::move(args));
    }
    leaf(node, expect(TokenKind::RParen));
    finish_span(node);
    out->span = span_from(start);
    return node;
  }

  ParseNode parse_expr_node(ExprPtr* out) {
    size_t start = pos_;
    ParseNode term = parse_term(out);
    ParseNode node{sym::Expr, {}, {}};
    node.children.push_back(std::move(term));
    finish_span(node);
    while (at(TokenKind::Plus) || at(TokenKind::Minus)) {
      BinOp op = at(TokenKind::Plus) ? BinOp::Add : BinOp::Sub;
      ParseNode outer{sym::Expr, {}, {}};
      outer.children.push_back(std::move(node));
      leaf(outer, pos_++);
      ExprPtr rhs;
      outer.children.push_back(parse_term(&rhs));
      finish_span(outer);
      *out = Expr::make_binary(op, *out, rhs, span_from(start));
      node = std::move(outer);
    }
    return node;
  }

  ParseNode parse_term(ExprPtr* out) {
    size_t start = pos_;
    ParseNode factor = parse_factor(out);
    ParseNode node{sym::Term, {}, {}};
    node.children.push_back(std::move(factor));
    finish_span(node);
    while (at(TokenKind::Star) || at(TokenKind::Slash)) {
      BinOp op = at(TokenKind::Star) ? BinOp::Mul : BinOp::Div;
      ParseNode outer{sym::Term, {}, {}};
      outer.children.push_back(std::move(node));
      leaf(outer, pos_++);
      ExprPtr rhs;
      outer.children.push_back(parse_factor(&rhs));
      finish_span(outer);
      *out = Expr::make_binary(op, *out, rhs, span_from(start));
      node = std::move(outer);
    }
    return node;
  }

  ParseNode parse_factor(ExprPtr* out) {
    ParseNode node{sym::Factor, {}, {}};
    size_t start = pos_;
    if (at(TokenKind::Minus)) {
      leaf(node, expect(TokenKind::Minus));
      ExprPtr inner;
      node.children.push_back(parse_factor(&inner));
      finish_span(node);
      *out = Expr::make_unary_neg(inner, span_from(start));
      return node;
    }
    node.children.push_back(parse_atom(out));
    finish_span(node);
    return node;
  }

  ParseNode parse_atom(ExprPtr* out) {
    ParseNode node{sym::Atom, {}, {}};
    size_t start = pos_;
    if (at(TokenKind::IntLit) || at(TokenKind::FloatLit)) {
      ParseNode num{sym::Number, {}, {}};
      bool is_int = at(TokenKind::IntLit);
      size_t tok = pos_++;
      leaf(num, tok);
      finish_span(num);
      node.children.push_back(std::move(num));
      finish_span(node);
      double v = std::strtod(toks_[tok].text.c_str(), nullptr);
      *out = Expr::make_number(v, is_int, span_from(start));
      return node;
    }
    if (at(TokenKind::Ident)) {
      size_t tok = expect(TokenKind::Ident);
      leaf(node, tok);
      finish_span(node);
      *out = Expr::make_var(toks_[tok].text, span_from(start));
      return node;
    }
    if (at(TokenKind::LParen)) {
      leaf(node, expect(TokenKind::LParen));
      node.children.push_back(parse_expr_node(out));
      leaf(node, expect(TokenKind::RParen));
      finish_span(node);
      return node;
    }
    FnName fn;
    bool is_call = true;
    if (at(TokenKind::KwExp)) fn = FnName::Exp;
    else if (at(TokenKind::KwLog)) fn = FnName::Log;
    else if (at(TokenKind::KwSqrt)) fn = FnName::Sqrt;
    else if (at(TokenKind::KwLogit)) fn = FnName::Logit;
    else if (at(TokenKind::KwInvLogit)) fn = FnName::InvLogit;
    else if (at(TokenKind::KwPow)) fn = FnName::Pow;
    else is_call = false;
    if (is_call) {
      ParseNode call{sym::Call, {}, {}};
      leaf(call, pos_++);
      leaf(call, expect(TokenKind::LParen));
      std::vector<ExprPtr> args;
      ExprPtr a0;
      call.children.push_back(parse_expr_node(&a0));
      args.push_back(a0);
      if (fn == FnName::Pow) {
        leaf(call, expect(TokenKind::Comma));
        ExprPtr a1;
        call.children.push_back(parse_expr_node(&a1));
        args.push_back(a1);
      }
      leaf(call, expect(TokenKind::RParen));
      finish_span(call);
      node.children.push_back(std::move(call));
      finish_span(node);
      *out = Expr::make_call(fn, std::move(args), span_from(start));
      return node;
    }
    fail("expected expression", pos_);
  }
};

}  // namespace

ParseOutcome parse_program_text(const std::string& text) {
  ParseOutcome out;
  LexResult lr = lex(text);
  if (!lr.ok()) {
    out.error = SyntaxError{lr.error->message, 0, lr.error->char_pos};
    return out;
  }
  out.tokens = std::move(lr.tokens);
  Parser parser(out.tokens);
  try {
    ParseNode tree{sym::Program, {}, {}};
    out.program = parser.parse_program(&tree);
    out.tree = std::move(tree);
  } catch (const Abort& a) {
    out.error = a.err;
  }
  return out;
}

FragmentParse parse_statement_tokens(const std::vector<Token>& tokens, BlockKind block) {
  FragmentParse out;
  Parser parser(tokens);
  try {
    out.stmt = parser.parse_fragment(block);
  } catch (const Abort& a) {
    out.error = a.err;
  }
  return out;
}

// ---------------------------------------------------------------------------
// rendering

std::string render_number(double value, bool is_int) {
  if (is_int && std::floor(value) == value && std::abs(value) < 9.0e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(value));
    return buf;
  }
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, p);
}

namespace {

int precedence_level(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Binary:
      return (e.op == BinOp::Add || e.op == BinOp::Sub) ? 1 : 2;
    case ExprKind::Unary:
      return 3;
    default:
      return 4;
  }
}

const char* fn_name_text(FnName fn) {
  switch (fn) {
    case FnName::Exp: return "exp";
    case FnName::Log: return "log";
    case FnName::Sqrt: return "sqrt";
    case FnName::Logit: return "logit";
    case FnName::InvLogit: return "invlogit";
    case FnName::Pow: return "pow";
  }
  return "?";
}

void render_expr_into(const Expr& e, int min_level, std::string& out) {
  int level = precedence_level(e);
  bool parens = level < min_level;
  if (parens) out += "(";
  switch (e.kind) {
    case ExprKind::Number:
      out += render_number(e.number, e.number_is_int);
      break;
    case ExprKind::Variable:
      out += e.var;
      break;
    case ExprKind::Unary:
      out += "-";
      render_expr_into(*e.args[0], 3, out);
      break;
    case ExprKind::Binary: {
      const char* op_text = e.op == BinOp::Add   ? " + "
                            : e.op == BinOp::Sub ? " - "
                            : e.op == BinOp::Mul ? " * "
                                                 : " / ";
      render_expr_into(*e.args[0], level, out);
      out += op_text;
      render_expr_into(*e.args[1], level + 1, out);
      break;
    }
    case ExprKind::Call: {
      out += fn_name_text(e.fn);
      out += "(";
      for (size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        render_expr_into(*e.args[i], 1, out);
      }
      out += ")";
      break;
    }
  }
  if (parens) out += ")";
}

void render_dist_into(const DistCall& d, std::string& out) {
  out += d.dist_name;
  out += "(";
  for (size_t i = 0; i < d.args.size(); ++i) {
    if (i) out += ", ";
    if (d.args[i].name) {
      out += *d.args[i].name;
      out += "=";
    }
    render_expr_into(*d.args[i].value, 1, out);
  }
  out += ")";
}

std::string dtype_text(const DataType& dt) {
  if (!dt.is_vector) return dt.scalar == ScalarKind::Int ? "int" : "real";
  std::string base = dt.scalar == ScalarKind::Int ? "intvector" : "vector";
  return base + "[" + std::to_string(dt.length) + "]";
}

}  // namespace

std::string render_expr(const Expr& expr) {
  std::string out;
  render_expr_into(expr, 1, out);
  return out;
}

std::string render_data_decl(const DataDecl& decl) {
  return decl.name + ": " + dtype_text(decl.type) + ";";
}

std::string render_statement(const Statement& stmt) {
  std::string out = stmt.target;
  if (stmt.replicate) {
    out += "[" + std::to_string(*stmt.replicate) + "]";
  }
  if (stmt.kind == StatementKind::Deterministic) {
    out += " = ";
    render_expr_into(*stmt.expr, 1, out);
  } else {
    out += " ~ ";
    render_dist_into(stmt.dist, out);
  }
  out += ";";
  return out;
}

std::string render(const ModelProgram& program) {
  std::string out = "model {\n  data {\n";
  for (const auto& d : program.data_decls) {
    out += "    " + render_data_decl(d) + "\n";
  }
  out += "  }\n  prior {\n";
  for (const auto& s : program.prior_stmts) {
    out += "    " + render_statement(s) + "\n";
  }
  out += "  }\n  likelihood {\n";
  for (const auto& s : program.likelihood_stmts) {
    out += "    " + render_statement(s) + "\n";
  }
  out += "  }\n}\n";
  return out;
}

}  // namespace ppsynth
