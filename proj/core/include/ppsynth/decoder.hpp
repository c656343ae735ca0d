#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppsynth/dataset.hpp"
#include "ppsynth/grammar.hpp"
#include "ppsynth/numutil.hpp"
#include "ppsynth/semantics.hpp"

namespace ppsynth {

// Concrete lexeme pool the token-level path samples from: fixed syntax
// tokens, distribution names, dataset columns, a fresh-name pool, and
// numeric literals.
struct VocabToken {
  TokenKind kind;
  std::string text;
};

using Vocabulary = std::vector<VocabToken>;

Vocabulary decoding_vocabulary(const Dataset& dataset);

// bit v set iff the grammar can consume vocab[v] next
std::vector<bool> build_mask(const PrefixState& state, const Vocabulary& vocab);

struct GenContext {
  std::string prompt;
  const std::vector<Token>* context_tokens = nullptr;
  BlockKind block = BlockKind::Prior;
  int statements_in_block = 0;
  // committed tokens of the statement being decoded; 0 means a fresh start
  int fragment_pos = 0;
  const Dataset* dataset = nullptr;
  const SymbolTable* table = nullptr;
  const ModelProgram* program = nullptr; // context blocks decoded so far
};

class CandidateGenerator {
 public:
  virtual ~CandidateGenerator() = default;
  virtual bool token_mode() const = 0;
  virtual void begin_block(const GenContext&) {}
  // token mode: nonnegative weight per vocab entry; the session zeroes
  // masked-out entries and renormalizes, so those end with probability 0
  virtual std::vector<double> next_token_weights(const GenContext&, const Vocabulary&,
                                                 const std::vector<bool>&) {
    return {};
  }
  // fragment mode: one statement's text; "}" or "" closes the block
  virtual std::string propose_fragment(const GenContext&) { return {}; }
  virtual double temperature() const { return 0.3; }
};

struct DecodeConfig {
  double temperature = 0.3;
  int max_prior_statements = 8;
  int max_likelihood_statements = 3;
  int fragment_retry_cap = 16;
  int max_fragment_tokens = 160; // hard stop for runaway expressions
  uint64_t seed = 0;
};

struct DecodeStats {
  long tokens_generated = 0; // every token the generator produced
  long tokens_retried = 0;   // tokens discarded by backtracking or rejection
  long fragment_retries = 0;

  void merge(const DecodeStats& o) {
    tokens_generated += o.tokens_generated;
    tokens_retried += o.tokens_retried;
    fragment_retries += o.fragment_retries;
  }
};

struct DecodeError {
  std::string message;
  ValidationReport last_report;
  int retries = 0;
};

// Decoding state for one block: grammar prefix, scope, and the snapshot
// stack that makes statement-level backtracking exact.
class DecodeSession {
 public:
  DecodeSession(std::vector<Token> context_tokens, SymbolTable table, BlockKind block,
                const Dataset& dataset, const DecodeConfig& config);

  const std::vector<Token>& context() const { return context_; }
  const PrefixState& state() const { return state_; }
  void set_context_program(const ModelProgram* p) { program_ = p; }
  int statements_done() const { return statements_done_; }
  void note_statement_done() { ++statements_done_; }
  GenContext gen_context(int fragment_pos) const;
  SymbolTable& table() { return table_; }
  const SymbolTable& table_ref() const { return table_; }
  BlockKind block() const { return block_; }
  const Dataset& dataset() const { return *dataset_; }
  const DecodeConfig& config() const { return config_; }
  DecodeStats& stats() { return stats_; }
  Rng& rng() { return rng_; }

  // consume one token; false when the grammar rejects it
  bool advance(TokenKind kind, const std::string& text);

  // roll the grammar state and context back to n_tokens total
  void truncate_to(int n_tokens);

  void push_snapshot();
  void pop_snapshot();  // restore context, grammar state, and table
  void drop_snapshot(); // commit

 private:
  struct Snapshot {
    int context_len;
    SymbolTable table;
  };

  std::vector<Token> context_;
  PrefixState state_;
  SymbolTable table_;
  BlockKind block_;
  const Dataset* dataset_;
  DecodeConfig config_;
  DecodeStats stats_;
  Rng rng_;
  std::vector<Snapshot> snapshots_;
  int char_cursor_ = 0;
  const ModelProgram* program_ = nullptr;
  int statements_done_ = 0;
};

struct FragmentOutcome {
  bool block_closed = false;
  std::optional<Statement> stmt;
};

// One validated statement (or a block close). On a validation failure the
// violating span is discarded and sampling resumes from the span start;
// after fragment_retry_cap failed attempts returns nullopt with err set.
std::optional<FragmentOutcome> sample_statement(DecodeSession& session, CandidateGenerator& gen,
                                                const DistributionRegistry& registry,
                                                DecodeError* err = nullptr);

// data block synthesized deterministically from the dataset schema
std::vector<DataDecl> data_decls_for(const Dataset& dataset);

std::string assemble_prompt(const Dataset& dataset, const std::string& partial_program,
                            BlockKind block);

std::optional<std::vector<Statement>> decode_block(const ModelProgram& context, BlockKind which,
                                                   CandidateGenerator& gen,
                                                   const Dataset& dataset,
                                                   const DistributionRegistry& registry,
                                                   const DecodeConfig& config,
                                                   DecodeStats* stats = nullptr,
                                                   DecodeError* err = nullptr);

std::optional<ModelProgram> generate_program(const Dataset& dataset, CandidateGenerator& gen,
                                             const DistributionRegistry& registry,
                                             const DecodeConfig& config,
                                             DecodeStats* stats = nullptr,
                                             DecodeError* err = nullptr);

// Seeded statement planner biased toward plausible models: weighted
// distribution choice (Normal/HalfNormal favored), hierarchical structure
// when a vector column exists, and support-aware likelihood heads. Emits
// tokens one-hot through the grammar mask.
class BuiltinGrammarSampler : public CandidateGenerator {
 public:
  explicit BuiltinGrammarSampler(uint64_t seed, double temperature = 0.3);

  bool token_mode() const override { return true; }
  void begin_block(const GenContext& ctx) override;
  std::vector<double> next_token_weights(const GenContext& ctx, const Vocabulary& vocab,
                                         const std::vector<bool>& mask) override;
  double temperature() const override { return temperature_; }

  double dist_weight(const std::string& name) const;

 private:
  void plan_block(const GenContext& ctx);
  std::string plan_likelihood_statement(const GenContext& ctx, std::size_t response_index);

  Rng rng_;
  double temperature_;
  std::vector<std::string> planned_; // statement texts for the current block
  std::vector<Token> queue_; // tokens of the statement being emitted
  std::size_t queue_pos_ = 0;
};

// Replays a fixed list of statement texts (fragment mode). With cycle=true
// the script repeats forever; otherwise exhaustion closes blocks.
class ScriptedFragmentGenerator : public CandidateGenerator {
 public:
  explicit ScriptedFragmentGenerator(std::vector<std::string> fragments, bool cycle = false,
                                     double temperature = 0.3);

  bool token_mode() const override { return false; }
  std::string propose_fragment(const GenContext& ctx) override;
  double temperature() const override { return temperature_; }

 private:
  std::vector<std::string> fragments_;
  std::size_t next_ = 0;
  bool cycle_;
  double temperature_;
};

// Replays a fixed token-text sequence one-hot (token mode); used to exercise
// span-level backtracking deterministically.
class ScriptedTokenGenerator : public CandidateGenerator {
 public:
  explicit ScriptedTokenGenerator(std::vector<std::string> token_texts);

  bool token_mode() const override { return true; }
  std::vector<double> next_token_weights(const GenContext& ctx, const Vocabulary& vocab,
                                         const std::vector<bool>& mask) override;

 private:
  std::vector<std::string> texts_;
  std::size_t next_ = 0;
};

} // namespace ppsynth
