#include "ppsynth/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>

#include "ppsynth/distributions.hpp"

namespace ppsynth {

namespace {

struct FixedTok {
  TokenKind kind;
  const char* text;
};

constexpr FixedTok kFixedTokens[] = {
    {TokenKind::KwModel, "model"},
    {TokenKind::KwData, "data"},
    {TokenKind::KwPrior, "prior"},
    {TokenKind::KwLikelihood, "likelihood"},
    {TokenKind::KwReal, "real"},
    {TokenKind::KwInt, "int"},
    {TokenKind::KwVector, "vector"},
    {TokenKind::KwIntVector, "intvector"},
    {TokenKind::LBrace, "{"},
    {TokenKind::RBrace, "}"},
    {TokenKind::LParen, "("},
    {TokenKind::RParen, ")"},
    {TokenKind::LBracket, "["},
    {TokenKind::RBracket, "]"},
    {TokenKind::Colon, ":"},
    {TokenKind::Semi, ";"},
    {TokenKind::Comma, ","},
    {TokenKind::Tilde, "~"},
    {TokenKind::Assign, "="},
    {TokenKind::Plus, "+"},
    {TokenKind::Minus, "-"},
    {TokenKind::Star, "*"},
    {TokenKind::Slash, "/"},
    {TokenKind::KwExp, "exp"},
    {TokenKind::KwLog, "log"},
    {TokenKind::KwSqrt, "sqrt"},
    {TokenKind::KwLogit, "logit"},
    {TokenKind::KwInvLogit, "invlogit"},
    {TokenKind::KwPow, "pow"},
};

const std::vector<std::string>& loc_name_pool() {
  static const std::vector<std::string> pool = {"mu", "alpha", "m0", "b0"};
  return pool;
}

const std::vector<std::string>& scale_name_pool() {
  static const std::vector<std::string> pool = {"tau", "kappa", "s0", "lam"};
  return pool;
}

const std::vector<std::string>& raw_name_pool() {
  static const std::vector<std::string> pool = {"theta_raw", "z", "u0"};
  return pool;
}

const std::vector<std::string>& det_name_pool() {
  static const std::vector<std::string> pool = {"theta", "effect", "f0"};
  return pool;
}

const std::vector<std::string>& extra_name_pool() {
  static const std::vector<std::string> pool = {"beta1", "gamma0", "c0"};
  return pool;
}

const std::vector<std::string>& int_literal_pool() {
  static const std::vector<std::string> pool = {"0",  "1",  "2",  "3",  "4",
                                                "5",  "8",  "10", "20", "100"};
  return pool;
}

const std::vector<std::string>& float_literal_pool() {
  static const std::vector<std::string> pool = {"0.1", "0.2", "0.5",  "1.0",
                                                "2.5", "5.0", "10.0", "25.0"};
  return pool;
}

std::string spaced_text(const std::vector<Token>& toks) {
  std::string out;
  for (const Token& t : toks) {
    if (!out.empty() && out.back() != '\n') out += ' ';
    out += t.text;
    if (t.kind == TokenKind::Semi || t.kind == TokenKind::LBrace) out += '\n';
  }
  return out;
}

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t pick_weighted(Rng& rng, const std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0) || w.empty()) return 0;
  double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  return w.size() - 1;
}

ValidationReport syntax_failure(std::string message) {
  ValidationReport rep;
  rep.phi1 = false;
  rep.message = std::move(message);
  return rep;
}

}  // namespace

Vocabulary decoding_vocabulary(const Dataset& dataset) {
  Vocabulary vocab;
  for (const FixedTok& t : kFixedTokens) vocab.push_back({t.kind, t.text});

  std::set<std::string> seen;
  auto add_ident = [&](const std::string& name) {
    if (seen.insert(name).second) vocab.push_back({TokenKind::Ident, name});
  };
  for (const DistributionSpec& spec : DistributionRegistry::builtin().all()) {
    add_ident(spec.name);
  }
  for (const DataColumn& col : dataset.columns) add_ident(col.name);
  for (const auto* pool : {&loc_name_pool(), &scale_name_pool(), &raw_name_pool(),
                           &det_name_pool(), &extra_name_pool()}) {
    for (const std::string& name : *pool) add_ident(name);
  }

  std::set<std::string> ints;
  for (const std::string& lit : int_literal_pool()) {
    if (ints.insert(lit).second) vocab.push_back({TokenKind::IntLit, lit});
  }
  for (const DataColumn& col : dataset.columns) {
    std::string len = std::to_string(col.values.size());
    if (ints.insert(len).second) vocab.push_back({TokenKind::IntLit, len});
  }
  for (const std::string& lit : float_literal_pool()) {
    vocab.push_back({TokenKind::FloatLit, lit});
  }
  return vocab;
}

std::vector<bool> build_mask(const PrefixState& state, const Vocabulary& vocab) {
  std::vector<bool> mask(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    mask[i] = state.can_advance(vocab[i].kind);
  }
  return mask;
}

DecodeSession::DecodeSession(std::vector<Token> context_tokens, SymbolTable table,
                             BlockKind block, const Dataset& dataset,
                             const DecodeConfig& config)
    : state_(PrefixState::initial()),
      table_(std::move(table)),
      block_(block),
      dataset_(&dataset),
      config_(config),
      rng_(config.seed) {
  context_.reserve(context_tokens.size());
  for (const Token& t : context_tokens) {
    if (!advance(t.kind, t.text)) {
      throw std::logic_error("decode context rejected by grammar at '" + t.text + "'");
    }
  }
}

bool DecodeSession::advance(TokenKind kind, const std::string& text) {
  if (!state_.advance(kind)) return false;
  Token t;
  t.kind = kind;
  t.text = text;
  t.char_begin = char_cursor_;
  t.char_end = char_cursor_ + static_cast<int>(text.size());
  char_cursor_ = t.char_end + 1;  // one synthetic space between tokens
  context_.push_back(std::move(t));
  return true;
}

void DecodeSession::truncate_to(int n_tokens) {
  state_.truncate(n_tokens);
  context_.resize(static_cast<std::size_t>(n_tokens));
  char_cursor_ = context_.empty() ? 0 : context_.back().char_end + 1;
}

void DecodeSession::push_snapshot() {
  snapshots_.push_back({static_cast<int>(context_.size()), table_});
}

void DecodeSession::pop_snapshot() {
  Snapshot s = std::move(snapshots_.back());
  snapshots_.pop_back();
  truncate_to(s.context_len);
  table_ = std::move(s.table);
}

void DecodeSession::drop_snapshot() { snapshots_.pop_back(); }

GenContext DecodeSession::gen_context(int fragment_pos) const {
  GenContext ctx;
  ctx.prompt = assemble_prompt(*dataset_, spaced_text(context_), block_);
  ctx.context_tokens = &context_;
  ctx.block = block_;
  ctx.statements_in_block = statements_done_;
  ctx.fragment_pos = fragment_pos;
  ctx.dataset = dataset_;
  ctx.table = &table_;
  ctx.program = program_;
  return ctx;
}

namespace {

// Token-level path: sample under the mask, validate at each ';', and on a
// violation discard from the violating span onward and resume there.
std::optional<FragmentOutcome> sample_tokens(DecodeSession& session, CandidateGenerator& gen,
                                             const DistributionRegistry& registry,
                                             DecodeError* err) {
  const DecodeConfig& cfg = session.config();
  const Vocabulary vocab = decoding_vocabulary(session.dataset());
  const PrefixState stmt_ctx = session.state();
  const int start_len = static_cast<int>(session.context().size());

  session.push_snapshot();
  std::vector<Token> attempt;
  ValidationReport last_report = syntax_failure("no fragment produced");
  int attempts = 0;

  auto restart_from = [&](const ValidationReport& rep, int keep) {
    session.stats().tokens_retried += static_cast<long>(attempt.size()) - keep;
    attempt.resize(static_cast<std::size_t>(keep));
    session.truncate_to(start_len + keep);
    last_report = rep;
    session.stats().fragment_retries += 1;
  };

  while (attempts < cfg.fragment_retry_cap) {
    ++attempts;
    bool dead_end = false;
    bool closed = false;
    while (static_cast<int>(attempt.size()) < cfg.max_fragment_tokens) {
      GenContext ctx = session.gen_context(static_cast<int>(attempt.size()));
      std::vector<bool> mask = build_mask(session.state(), vocab);
      std::vector<double> w = gen.next_token_weights(ctx, vocab, mask);
      double total = 0.0;
      if (w.size() == vocab.size()) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (!mask[i] || !(w[i] > 0.0) || !std::isfinite(w[i])) w[i] = 0.0;
          total += w[i];
        }
      }
      if (!(total > 0.0)) {
        dead_end = true;
        break;
      }
      double u = session.rng().uniform() * total;
      double acc = 0.0;
      std::size_t pick = w.size() - 1;
      for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
      while (pick > 0 && w[pick] == 0.0) --pick;  // guard against fp round-off
      const VocabToken& vt = vocab[pick];
      if (!session.advance(vt.kind, vt.text)) {
        dead_end = true;  // mask and grammar disagree; treat as a failed attempt
        break;
      }
      session.stats().tokens_generated += 1;
      if (vt.kind == TokenKind::RBrace) {
        closed = true;
        break;
      }
      attempt.push_back(session.context().back());
      if (vt.kind == TokenKind::Semi) break;
    }

    if (closed) {
      // '}' is only viable at a statement boundary, so the attempt is empty
      session.drop_snapshot();
      return FragmentOutcome{true, std::nullopt};
    }
    if (dead_end) {
      restart_from(syntax_failure("generator placed no weight on any viable token"), 0);
      continue;
    }
    if (attempt.empty() || attempt.back().kind != TokenKind::Semi) {
      restart_from(syntax_failure("statement exceeded the token limit"), 0);
      continue;
    }

    ValidationReport rep =
        validate_fragment(attempt, stmt_ctx, session.block(), session.table_ref(), registry);
    if (rep.all_ok()) {
      FragmentParse parsed = parse_statement_tokens(attempt, session.block());
      if (!parsed.ok()) {
        restart_from(syntax_failure("fragment failed to parse after validation"), 0);
        continue;
      }
      if (session.block() == BlockKind::Prior) {
        bind_statement(session.table(), *parsed.stmt, session.block());
      }
      session.drop_snapshot();
      session.note_statement_done();
      return FragmentOutcome{false, std::move(parsed.stmt)};
    }

    int keep = rep.violating_span ? rep.violating_span->tok_begin : 0;
    if (keep < 0 || keep > static_cast<int>(attempt.size())) keep = 0;
    restart_from(rep, keep);
  }

  session.pop_snapshot();
  if (err) {
    err->message = "statement rejected " + std::to_string(attempts) + " times; giving up";
    err->last_report = last_report;
    err->retries = attempts;
  }
  return std::nullopt;
}

// Fragment-level path: the generator proposes whole statements; rejected
// proposals are discarded and re-requested.
std::optional<FragmentOutcome> sample_fragment(DecodeSession& session, CandidateGenerator& gen,
                                               const DistributionRegistry& registry,
                                               DecodeError* err) {
  const DecodeConfig& cfg = session.config();
  const PrefixState stmt_ctx = session.state();

  session.push_snapshot();
  ValidationReport last_report = syntax_failure("no fragment produced");
  int attempts = 0;

  while (attempts < cfg.fragment_retry_cap) {
    ++attempts;
    GenContext ctx = session.gen_context(0);
    std::string text = trimmed(gen.propose_fragment(ctx));

    if (text.empty() || text == "}") {
      if (session.state().can_advance(TokenKind::RBrace)) {
        session.advance(TokenKind::RBrace, "}");
        session.stats().tokens_generated += 1;
        session.drop_snapshot();
        return FragmentOutcome{true, std::nullopt};
      }
      last_report = syntax_failure("the block cannot close here");
      session.stats().fragment_retries += 1;
      continue;
    }

    LexResult lexed = lex(text);
    if (!lexed.ok()) {
      session.stats().fragment_retries += 1;
      last_report = syntax_failure(lexed.error->message);
      continue;
    }
    session.stats().tokens_generated += static_cast<long>(lexed.tokens.size());

    ValidationReport rep = validate_fragment(lexed.tokens, stmt_ctx, session.block(),
                                             session.table_ref(), registry);
    if (rep.all_ok()) {
      FragmentParse parsed = parse_statement_tokens(lexed.tokens, session.block());
      bool committed = parsed.ok();
      if (committed) {
        for (const Token& t : lexed.tokens) {
          if (!session.advance(t.kind, t.text)) {
            committed = false;
            break;
          }
        }
      }
      if (!committed) {
        session.pop_snapshot();
        session.push_snapshot();
        session.stats().tokens_retried += static_cast<long>(lexed.tokens.size());
        session.stats().fragment_retries += 1;
        last_report = syntax_failure("fragment failed to parse after validation");
        continue;
      }
      if (session.block() == BlockKind::Prior) {
        bind_statement(session.table(), *parsed.stmt, session.block());
      }
      session.drop_snapshot();
      session.note_statement_done();
      return FragmentOutcome{false, std::move(parsed.stmt)};
    }

    session.stats().tokens_retried += static_cast<long>(lexed.tokens.size());
    session.stats().fragment_retries += 1;
    last_report = rep;
  }

  session.pop_snapshot();
  if (err) {
    err->message = "statement rejected " + std::to_string(attempts) + " times; giving up";
    err->last_report = last_report;
    err->retries = attempts;
  }
  return std::nullopt;
}

}  // namespace

std::optional<FragmentOutcome> sample_statement(DecodeSession& session, CandidateGenerator& gen,
                                                const DistributionRegistry& registry,
                                                DecodeError* err) {
  if (gen.token_mode()) return sample_tokens(session, gen, registry, err);
  return sample_fragment(session, gen, registry, err);
}

std::vector<DataDecl> data_decls_for(const Dataset& dataset) {
  std::vector<DataDecl> decls;
  decls.reserve(dataset.columns.size());
  for (const DataColumn& col : dataset.columns) {
    DataDecl d;
    d.name = col.name;
    d.type.scalar = col.is_int ? ScalarKind::Int : ScalarKind::Real;
    d.type.is_vector = col.values.size() > 1;
    d.type.length = d.type.is_vector ? static_cast<int64_t>(col.values.size()) : 0;
    decls.push_back(std::move(d));
  }
  return decls;
}

std::string assemble_prompt(const Dataset& dataset, const std::string& partial_program,
                            BlockKind block) {
  std::string out;
  out += "# Continue the ";
  out += block == BlockKind::Prior ? "prior" : "likelihood";
  out += " block of the probabilistic program below.\n";
  out += "# Reply with exactly one statement ending in ';', or '}' to close the block.\n";
  out += "# Statements are 'name ~ Distribution(...);' or 'name = expression;'.";
  out += " No commentary.\n\n";
  out += "# Description: " + dataset.description + "\n\n";
  out += partial_program;
  if (!out.empty() && out.back() != '\n') out += '\n';
  return out;
}

std::optional<std::vector<Statement>> decode_block(const ModelProgram& context, BlockKind which,
                                                   CandidateGenerator& gen,
                                                   const Dataset& dataset,
                                                   const DistributionRegistry& registry,
                                                   const DecodeConfig& config,
                                                   DecodeStats* stats, DecodeError* err) {
  std::string text = "model { data {";
  for (const DataDecl& d : context.data_decls) text += " " + render_data_decl(d);
  text += " } prior {";
  if (which == BlockKind::Likelihood) {
    for (const Statement& s : context.prior_stmts) text += " " + render_statement(s);
    text += " } likelihood {";
  }
  LexResult lexed = lex(text);
  if (!lexed.ok()) throw std::logic_error("decode context failed to lex");

  SymbolTable table = SymbolTable::from_data(context.data_decls);
  if (which == BlockKind::Likelihood) {
    for (const Statement& s : context.prior_stmts) {
      bind_statement(table, s, BlockKind::Prior);
    }
  }

  DecodeSession session(std::move(lexed.tokens), std::move(table), which, dataset, config);
  session.set_context_program(&context);
  gen.begin_block(session.gen_context(0));

  const int cap = which == BlockKind::Prior ? config.max_prior_statements
                                            : config.max_likelihood_statements;
  std::vector<Statement> stmts;
  bool failed = false;
  DecodeError derr;
  while (true) {
    if (static_cast<int>(stmts.size()) >= cap) {
      if (!session.advance(TokenKind::RBrace, "}")) {
        throw std::logic_error("forced block close rejected by grammar");
      }
      break;
    }
    auto out = sample_statement(session, gen, registry, &derr);
    if (!out) {
      failed = true;
      break;
    }
    if (out->block_closed) break;
    stmts.push_back(std::move(*out->stmt));
  }

  if (stats) stats->merge(session.stats());
  if (failed) {
    if (err) *err = derr;
    return std::nullopt;
  }
  return stmts;
}

std::optional<ModelProgram> generate_program(const Dataset& dataset, CandidateGenerator& gen,
                                             const DistributionRegistry& registry,
                                             const DecodeConfig& config, DecodeStats* stats,
                                             DecodeError* err) {
  ModelProgram prog;
  prog.data_decls = data_decls_for(dataset);
  auto prior = decode_block(prog, BlockKind::Prior, gen, dataset, registry, config, stats, err);
  if (!prior) return std::nullopt;
  prog.prior_stmts = std::move(*prior);
  auto like =
      decode_block(prog, BlockKind::Likelihood, gen, dataset, registry, config, stats, err);
  if (!like) return std::nullopt;
  prog.likelihood_stmts = std::move(*like);
  return prog;
}

BuiltinGrammarSampler::BuiltinGrammarSampler(uint64_t seed, double temperature)
    : rng_(seed), temperature_(temperature) {}

double BuiltinGrammarSampler::dist_weight(const std::string& name) const {
  if (name == "Normal" || name == "HalfNormal") return 3.0;
  return 1.0;
}

void BuiltinGrammarSampler::begin_block(const GenContext& ctx) { plan_block(ctx); }

namespace {

struct NamePicker {
  Rng& rng;
  std::set<std::string> taken;

  std::string fresh(const std::vector<std::string>& pool) {
    std::vector<std::string> open;
    for (const std::string& name : pool) {
      if (!taken.count(name)) open.push_back(name);
    }
    std::string picked;
    if (!open.empty()) {
      picked = open[rng.below(open.size())];
    } else {
      // full pool shadowed by the dataset; suffix until free
      for (int k = 2;; ++k) {
        picked = pool.front() + std::to_string(k);
        if (!taken.count(picked)) break;
      }
    }
    taken.insert(picked);
    return picked;
  }
};

bool integral_nonneg(const DataColumn& col) {
  if (!col.is_int) return false;
  for (double v : col.values) {
    if (v < 0.0) return false;
  }
  return true;
}

bool all_positive(const DataColumn& col) {
  for (double v : col.values) {
    if (!(v > 0.0)) return false;
  }
  return true;
}

}  // namespace

void BuiltinGrammarSampler::plan_block(const GenContext& ctx) {
  planned_.clear();
  queue_.clear();
  queue_pos_ = 0;
  if (ctx.dataset == nullptr) return;

  if (ctx.block == BlockKind::Prior) {
    NamePicker names{rng_, {}};
    for (const DataColumn& col : ctx.dataset->columns) names.taken.insert(col.name);

    static const std::vector<std::string> loc_sds = {"1", "2.5", "5", "10"};
    std::string loc = names.fresh(loc_name_pool());
    planned_.push_back(loc + " ~ Normal(0, " + loc_sds[rng_.below(loc_sds.size())] + ");");

    static const std::vector<std::string> scale_dists = {"HalfNormal", "HalfCauchy",
                                                         "Exponential"};
    std::vector<double> sw;
    for (const std::string& d : scale_dists) sw.push_back(dist_weight(d));
    const std::string& sd = scale_dists[pick_weighted(rng_, sw)];
    static const std::vector<std::string> scale_args = {"1", "2.5", "5"};
    static const std::vector<std::string> rate_args = {"0.2", "0.5", "1"};
    const auto& args = sd == "Exponential" ? rate_args : scale_args;
    std::string scale = names.fresh(scale_name_pool());
    planned_.push_back(scale + " ~ " + sd + "(" + args[rng_.below(args.size())] + ");");

    std::vector<long> lens;
    for (const DataColumn& col : ctx.dataset->columns) {
      long n = static_cast<long>(col.values.size());
      if (n > 1 && std::find(lens.begin(), lens.end(), n) == lens.end()) lens.push_back(n);
    }
    if (!lens.empty() && rng_.uniform() < 0.5) {
      std::string raw = names.fresh(raw_name_pool());
      std::string det = names.fresh(det_name_pool());
      long n = lens[rng_.below(lens.size())];
      planned_.push_back(raw + "[" + std::to_string(n) + "] ~ Normal(0, 1);");
      planned_.push_back(det + " = " + loc + " + " + scale + " * " + raw + ";");
    } else if (rng_.uniform() < 0.3) {
      static const std::vector<std::string> extra_dists = {"Normal", "Cauchy"};
      std::vector<double> ew;
      for (const std::string& d : extra_dists) ew.push_back(dist_weight(d));
      const std::string& ed = extra_dists[pick_weighted(rng_, ew)];
      std::string extra = names.fresh(extra_name_pool());
      planned_.push_back(extra + " ~ " + ed + "(0, " + loc_sds[rng_.below(loc_sds.size())] +
                         ");");
    }
    return;
  }

  std::size_t n_cols = ctx.dataset->columns.size();
  int want = (n_cols > 1 && rng_.uniform() < 0.2) ? 2 : 1;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n_cols; ++i) order.push_back(i);
  std::vector<std::size_t> responses;
  while (static_cast<int>(responses.size()) < want && !order.empty()) {
    std::size_t j = rng_.below(order.size());
    responses.push_back(order[j]);
    order.erase(order.begin() + static_cast<long>(j));
  }
  for (std::size_t idx : responses) {
    planned_.push_back(plan_likelihood_statement(ctx, idx));
  }
}

std::string BuiltinGrammarSampler::plan_likelihood_statement(const GenContext& ctx,
                                                             std::size_t response_index) {
  const Dataset& data = *ctx.dataset;
  const DataColumn& resp = data.columns[response_index];
  long resp_len = static_cast<long>(resp.values.size());
  const DistributionRegistry& registry = DistributionRegistry::builtin();

  // split the scope into location-like and positive scalar parameters plus
  // length-matched vector parameters, reading positivity off the prior
  std::vector<std::string> scalar_locs, scalar_scales, vector_locs;
  if (ctx.table != nullptr) {
    for (const auto& entry : ctx.table->entries()) {
      const Binding& b = entry.second;
      if (b.kind == BindingKind::Data) continue;
      if (b.shape.is_vector) {
        if (b.shape.length == resp_len) vector_locs.push_back(entry.first);
        continue;
      }
      bool positive = false;
      if (ctx.program != nullptr && b.kind == BindingKind::Parameter) {
        for (const Statement& s : ctx.program->prior_stmts) {
          if (s.kind != StatementKind::Stochastic || s.target != entry.first) continue;
          const DistributionSpec* spec = registry.find(s.dist.dist_name);
          positive = spec != nullptr && spec->support == ValueSupport::Positive;
        }
      }
      (positive ? scalar_scales : scalar_locs).push_back(entry.first);
    }
  }

  std::vector<std::string> pos_columns;
  for (const DataColumn& col : data.columns) {
    if (col.name != resp.name && !col.is_int && all_positive(col) &&
        static_cast<long>(col.values.size()) == resp_len) {
      pos_columns.push_back(col.name);
    }
  }

  auto pick_loc = [&]() -> std::string {
    std::vector<std::string> opts;
    std::vector<double> w;
    for (const std::string& v : vector_locs) {
      opts.push_back(v);
      w.push_back(3.0);
    }
    for (const std::string& s : scalar_locs) {
      opts.push_back(s);
      w.push_back(2.0);
    }
    if (opts.empty()) return "0";
    return opts[pick_weighted(rng_, w)];
  };
  auto pick_scale = [&]() -> std::string {
    std::vector<std::string> opts;
    std::vector<double> w;
    for (const std::string& s : scalar_scales) {
      opts.push_back(s);
      w.push_back(2.0);
    }
    for (const std::string& c : pos_columns) {
      opts.push_back(c);
      w.push_back(1.0);
    }
    if (opts.empty()) return "1";
    return opts[pick_weighted(rng_, w)];
  };

  if (integral_nonneg(resp)) {
    std::string trials;
    for (const DataColumn& col : data.columns) {
      if (col.name == resp.name || !col.is_int ||
          col.values.size() != resp.values.size()) {
        continue;
      }
      bool dominates = true;
      for (std::size_t i = 0; i < col.values.size(); ++i) {
        if (col.values[i] < resp.values[i]) {
          dominates = false;
          break;
        }
      }
      if (dominates) {
        trials = col.name;
        break;
      }
    }

    std::vector<int> heads;  // 0 Poisson(exp), 1 Poisson(scale), 2 Binomial
    std::vector<double> hw;
    if (!scalar_locs.empty() || !vector_locs.empty()) {
      heads.push_back(0);
      hw.push_back(2.0);
    }
    if (!scalar_scales.empty()) {
      heads.push_back(1);
      hw.push_back(1.0);
    }
    if (!trials.empty() && (!scalar_locs.empty() || !vector_locs.empty())) {
      heads.push_back(2);
      hw.push_back(2.0);
    }
    if (!heads.empty()) {
      switch (heads[pick_weighted(rng_, hw)]) {
        case 0:
          return resp.name + " ~ Poisson(exp(" + pick_loc() + "));";
        case 1:
          return resp.name + " ~ Poisson(" +
                 scalar_scales[rng_.below(scalar_scales.size())] + ");";
        default:
          return resp.name + " ~ Binomial(" + trials + ", invlogit(" + pick_loc() + "));";
      }
    }
  }

  static const std::vector<std::string> head_dists = {"Normal", "StudentT"};
  std::vector<double> hw;
  for (const std::string& d : head_dists) hw.push_back(dist_weight(d));
  const std::string& head = head_dists[pick_weighted(rng_, hw)];
  std::string loc = pick_loc();
  std::string scale = pick_scale();
  if (head == "StudentT") {
    return resp.name + " ~ StudentT(4, " + loc + ", " + scale + ");";
  }
  return resp.name + " ~ Normal(" + loc + ", " + scale + ");";
}

std::vector<double> BuiltinGrammarSampler::next_token_weights(const GenContext& ctx,
                                                              const Vocabulary& vocab,
                                                              const std::vector<bool>& mask) {
  if (ctx.fragment_pos == 0) {
    // statement start: the plan entry is indexed by what the block committed,
    // so a rejected statement naturally replays the same entry
    std::size_t entry = static_cast<std::size_t>(ctx.statements_in_block);
    std::string text = entry < planned_.size() ? planned_[entry] : "}";
    LexResult lexed = lex(text);
    if (!lexed.ok()) return {};
    queue_ = std::move(lexed.tokens);
    queue_pos_ = 0;
  } else if (ctx.fragment_pos != static_cast<int>(queue_pos_) &&
             ctx.fragment_pos < static_cast<int>(queue_.size())) {
    queue_pos_ = static_cast<std::size_t>(ctx.fragment_pos);  // partial backtrack
  }

  if (queue_pos_ >= queue_.size()) return {};

  const Token& want = queue_[queue_pos_];
  std::vector<double> w(vocab.size(), 0.0);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i].kind == want.kind && vocab[i].text == want.text && mask[i]) {
      w[i] = 1.0;
      ++queue_pos_;
      return w;
    }
  }
  return {};  // plan requires a token the vocabulary lacks; force a restart
}

ScriptedFragmentGenerator::ScriptedFragmentGenerator(std::vector<std::string> fragments,
                                                     bool cycle, double temperature)
    : fragments_(std::move(fragments)), cycle_(cycle), temperature_(temperature) {}

std::string ScriptedFragmentGenerator::propose_fragment(const GenContext&) {
  if (next_ >= fragments_.size()) {
    if (!cycle_ || fragments_.empty()) return "}";
    next_ = 0;
  }
  return fragments_[next_++];
}

ScriptedTokenGenerator::ScriptedTokenGenerator(std::vector<std::string> token_texts)
    : texts_(std::move(token_texts)) {}

std::vector<double> ScriptedTokenGenerator::next_token_weights(const GenContext&,
                                                               const Vocabulary& vocab,
                                                               const std::vector<bool>& mask) {
  std::string want;
  if (next_ < texts_.size()) {
    want = texts_[next_++];
  } else {
    want = "}";
  }
  std::vector<double> w(vocab.size(), 0.0);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i].text == want && mask[i]) {
      w[i] = 1.0;
      return w;
    }
  }
  return {};
}

}  // namespace ppsynth
