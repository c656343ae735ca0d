#include "doctest.h"

#include <string>
#include <vector>

#include "ppsynth/grammar.hpp"
#include "ppsynth/semantics.hpp"

using namespace ppsynth;

namespace {

std::vector<Token> toks(const std::string& text) {
  LexResult r = lex(text);
  REQUIRE(r.ok());
  return r.tokens;
}

std::vector<DataDecl> schools_decls() {
  std::vector<DataDecl> decls;
  DataDecl y;
  y.name = "y";
  y.type = {ScalarKind::Real, true, 8};
  DataDecl sigma;
  sigma.name = "sigma";
  sigma.type = {ScalarKind::Real, true, 8};
  DataDecl k;
  k.name = "k";
  k.type = {ScalarKind::Int, true, 8};
  decls.push_back(y);
  decls.push_back(sigma);
  decls.push_back(k);
  return decls;
}

PrefixState prior_ctx() {
  PrefixState st = PrefixState::initial();
  for (const Token& t :
       toks("model { data { y: vector[8]; sigma: vector[8]; k: intvector[8]; } prior {")) {
    REQUIRE(st.advance(t.kind));
  }
  return st;
}

PrefixState likelihood_ctx(const std::string& prior_src) {
  PrefixState st = PrefixState::initial();
  for (const Token& t :
       toks("model { data { y: vector[8]; sigma: vector[8]; k: intvector[8]; } prior { " +
            prior_src + " } likelihood {")) {
    REQUIRE(st.advance(t.kind));
  }
  return st;
}

struct Checker {
  SymbolTable table = SymbolTable::from_data(schools_decls());
  const DistributionRegistry& reg = DistributionRegistry::builtin();

  void bind_priors(const std::string& src) {
    for (const std::string& stmt : split(src)) {
      FragmentParse p = parse_statement_tokens(toks(stmt), BlockKind::Prior);
      REQUIRE(p.ok());
      bind_statement(table, *p.stmt, BlockKind::Prior);
    }
  }

  static std::vector<std::string> split(const std::string& src) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      std::size_t semi = src.find(';', start);
      if (semi == std::string::npos) break;
      parts.push_back(src.substr(start, semi - start + 1));
      start = semi + 1;
    }
    return parts;
  }

  ValidationReport prior(const std::string& frag) {
    return validate_fragment(toks(frag), prior_ctx(), BlockKind::Prior, table, reg);
  }

  ValidationReport likelihood(const std::string& frag, const std::string& prior_src) {
    return validate_fragment(toks(frag), likelihood_ctx(prior_src), BlockKind::Likelihood,
                             table, reg);
  }
};

std::string span_text(const std::string& frag, const ValidationReport& rep) {
  REQUIRE(rep.violating_span.has_value());
  const Span& s = *rep.violating_span;
  return frag.substr(static_cast<std::size_t>(s.char_begin),
                     static_cast<std::size_t>(s.char_end - s.char_begin));
}

}  // namespace

TEST_CASE("well-formed prior statements validate and bind") {
  Checker c;
  ValidationReport ok = c.prior("mu ~ Normal(0, 5);");
  CHECK(ok.all_ok());
  CHECK_FALSE(ok.violating_span.has_value());

  CHECK(c.prior("tau ~ HalfNormal(sigma = 2.5);").all_ok());
  CHECK(c.prior("theta_raw[8] ~ Normal(0, 1);").all_ok());
  CHECK(c.prior("u ~ Uniform(-2, 2);").all_ok());

  // names visible once bound
  c.bind_priors("mu ~ Normal(0, 5); tau ~ HalfNormal(2.5); z[8] ~ Normal(0, 1);");
  CHECK(c.prior("theta = mu + tau * z;").all_ok());
  CHECK(c.table.find("mu")->kind == BindingKind::Parameter);
  CHECK(c.table.find("z")->shape == Shape::vector_real(8));
}

TEST_CASE("phi1 requires exactly one viable statement") {
  Checker c;
  ValidationReport empty = c.prior("");
  CHECK_FALSE(empty.phi1);

  ValidationReport two = c.prior("mu ~ Normal(0, 1); tau ~ HalfNormal(1);");
  CHECK_FALSE(two.phi1);

  ValidationReport junk = c.prior(") ~ Normal(0, 1);");
  CHECK_FALSE(junk.phi1);
  REQUIRE(junk.violating_span.has_value());
  CHECK(junk.violating_span->tok_begin == 0);

  ValidationReport partial = c.prior("mu ~ Normal(0,");
  CHECK_FALSE(partial.phi1);

  // violating token is the one that kills prefix viability, not the start
  std::string frag = "mu ~ Normal(0, 1)exp;";
  ValidationReport bad = c.prior(frag);
  CHECK_FALSE(bad.phi1);
  CHECK(span_text(frag, bad) == "exp");
}

TEST_CASE("phi2 flags unknown distributions at the name") {
  Checker c;
  std::string frag = "mu ~ ExtNormal(0, 1);";
  ValidationReport rep = c.prior(frag);
  CHECK(rep.phi1);
  CHECK_FALSE(rep.phi2);
  CHECK(span_text(frag, rep) == "ExtNormal");
  CHECK_FALSE(rep.all_ok());
}

TEST_CASE("phi3 checks parameter names, arity, duplicates, and literal domains") {
  Checker c;

  std::string named = "y ~ Normal(0, std=2);";
  ValidationReport std_rep = c.likelihood(named, "mu ~ Normal(0, 1);");
  CHECK(std_rep.phi2);
  CHECK_FALSE(std_rep.phi3);
  CHECK(span_text(named, std_rep) == "std");

  CHECK_FALSE(c.prior("mu ~ Normal(0);").phi3);
  CHECK_FALSE(c.prior("mu ~ Normal(0, 1, 2);").phi3);
  CHECK_FALSE(c.prior("mu ~ Normal(mu = 0, mu = 1);").phi3);

  std::string neg = "tau ~ HalfNormal(sigma = -1);";
  ValidationReport neg_rep = c.prior(neg);
  CHECK_FALSE(neg_rep.phi3);
  CHECK(span_text(neg, neg_rep) == "-1");

  CHECK_FALSE(c.prior("tau ~ HalfNormal(0);").phi3);       // strictly positive
  CHECK_FALSE(c.prior("p ~ Beta(0, 2);").phi3);
  CHECK_FALSE(c.prior("u ~ Uniform(3, -3);").phi3);        // bounds out of order
  CHECK_FALSE(c.prior("u ~ Uniform(2, 2);").phi3);
  ValidationReport bern = c.likelihood("k ~ Binomial(8, 1.5);", "mu ~ Normal(0, 1);");
  CHECK_FALSE(bern.phi3);

  // non-literal arguments cannot be domain-checked statically
  Checker c2;
  c2.bind_priors("tau ~ HalfNormal(1);");
  CHECK(c2.prior("mu ~ Normal(0, tau);").all_ok());
}

TEST_CASE("scope and shape rules") {
  Checker c;
  c.bind_priors("mu ~ Normal(0, 5); tau ~ HalfNormal(2.5); z[8] ~ Normal(0, 1);");

  std::string frag = "theta = mu + tau * w;";
  ValidationReport unknown = c.prior(frag);
  CHECK(unknown.phi3);
  CHECK_FALSE(unknown.scope_ok);
  CHECK(span_text(frag, unknown) == "w");

  // re-declaring an existing name
  CHECK_FALSE(c.prior("mu ~ Normal(0, 1);").scope_ok);
  CHECK_FALSE(c.prior("y ~ Normal(0, 1);").scope_ok);

  // vector length mismatch inside an expression
  c.bind_priors("v[3] ~ Normal(0, 1);");
  CHECK_FALSE(c.prior("q = z + v;").scope_ok);

  // replicate count must be at least one
  CHECK_FALSE(c.prior("r0[0] ~ Normal(0, 1);").scope_ok);

  // discrete draws cannot be priors
  CHECK_FALSE(c.prior("m ~ Poisson(3);").scope_ok);

  // prior Uniform bounds must be literals so the transform is fixed
  CHECK_FALSE(c.prior("u ~ Uniform(mu, tau);").scope_ok);
}

TEST_CASE("likelihood statements must target data columns compatibly") {
  Checker c;
  const std::string priors = "mu ~ Normal(0, 5); tau ~ HalfNormal(2.5);";
  c.bind_priors(priors);

  CHECK(c.likelihood("y ~ Normal(mu, tau);", priors).all_ok());
  CHECK(c.likelihood("y ~ Normal(mu, sigma);", priors).all_ok());  // data as argument
  CHECK(c.likelihood("k ~ Poisson(exp(mu));", priors).all_ok());

  // target must be a declared column, not a parameter or fresh name
  CHECK_FALSE(c.likelihood("mu ~ Normal(0, 1);", priors).scope_ok);
  CHECK_FALSE(c.likelihood("w ~ Normal(mu, tau);", priors).scope_ok);

  // discrete likelihoods need an integer column
  CHECK_FALSE(c.likelihood("y ~ Poisson(exp(mu));", priors).scope_ok);
  CHECK(c.likelihood("k ~ Binomial(8, invlogit(mu));", priors).all_ok());

  // argument vector lengths must match the response length
  Checker c12;
  c12.bind_priors("mu ~ Normal(0, 5); v[3] ~ Normal(0, 1);");
  CHECK_FALSE(c12.likelihood("y ~ Normal(v, 1);", "mu ~ Normal(0, 5); v[3] ~ Normal(0, 1);")
                   .scope_ok);
}

TEST_CASE("checks short-circuit in predicate order") {
  Checker c;
  // unparseable beats unknown distribution
  ValidationReport r1 = c.prior("mu ~ ExtNormal(0,");
  CHECK_FALSE(r1.phi1);
  CHECK(r1.phi2);

  // unknown distribution beats bad arguments and bad scope
  ValidationReport r2 = c.prior("w ~ ExtNormal(std = -1);");
  CHECK(r2.phi1);
  CHECK_FALSE(r2.phi2);
  CHECK(r2.phi3);
  CHECK(r2.scope_ok);

  // bad parameter name beats bad scope
  ValidationReport r3 = c.prior("w ~ Normal(std = w2, 1);");
  CHECK(r3.phi2);
  CHECK_FALSE(r3.phi3);
  CHECK(r3.scope_ok);
}

TEST_CASE("validate_program covers cross-block rules") {
  const DistributionRegistry& reg = DistributionRegistry::builtin();

  auto program = [&](const std::string& text) {
    ParseOutcome out = parse_program_text(text);
    REQUIRE(out.ok());
    return *out.program;
  };

  ValidationReport good = validate_program(
      program("model { data { y: vector[8]; sigma: vector[8]; } prior { mu ~ Normal(0, 5); "
              "tau ~ HalfNormal(5); theta_raw[8] ~ Normal(0, 1); theta = mu + tau * "
              "theta_raw; } likelihood { y ~ Normal(theta, sigma); } }"),
      reg);
  CHECK(good.all_ok());

  // likelihood referencing a name the resampled prior no longer defines
  ValidationReport stale = validate_program(
      program("model { data { y: vector[8]; } prior { mu ~ Normal(0, 5); } likelihood "
              "{ y ~ Normal(theta, 1); } }"),
      reg);
  CHECK_FALSE(stale.scope_ok);

  // duplicate data column names
  ValidationReport dup = validate_program(
      program("model { data { y: vector[8]; y: vector[8]; } prior { mu ~ Normal(0, 1); } "
              "likelihood { y ~ Normal(mu, 1); } }"),
      reg);
  CHECK_FALSE(dup.scope_ok);
}

TEST_CASE("binding records shapes for downstream lookups") {
  SymbolTable table = SymbolTable::from_data(schools_decls());
  CHECK(table.find("y")->kind == BindingKind::Data);
  CHECK(table.find("y")->shape.is_vector);
  CHECK(table.find("k")->shape.scalar == ScalarKind::Int);

  FragmentParse rep = parse_statement_tokens(toks("w[4] ~ Normal(0, 1);"), BlockKind::Prior);
  REQUIRE(rep.ok());
  bind_statement(table, *rep.stmt, BlockKind::Prior);
  CHECK(table.find("w")->kind == BindingKind::Parameter);
  CHECK(table.find("w")->shape == Shape::vector_real(4));

  FragmentParse det = parse_statement_tokens(toks("t = w * 2;"), BlockKind::Prior);
  REQUIRE(det.ok());
  bind_statement(table, *det.stmt, BlockKind::Prior);
  CHECK(table.find("t")->kind == BindingKind::Deterministic);
  CHECK(table.find("t")->shape == Shape::vector_real(4));
}

TEST_CASE("expression shape inference broadcasts scalars over vectors") {
  SymbolTable table = SymbolTable::from_data(schools_decls());
  table.declare("mu", {BindingKind::Parameter, Shape::scalar_real()});
  table.declare("z", {BindingKind::Parameter, Shape::vector_real(8)});

  auto shape_of = [&](const std::string& src) {
    FragmentParse p = parse_statement_tokens(toks("t = " + src + ";"), BlockKind::Prior);
    REQUIRE(p.ok());
    return infer_expr_shape(*p.stmt->expr, table, nullptr);
  };

  CHECK(*shape_of("mu + 1") == Shape::scalar_real());
  CHECK(*shape_of("mu + z") == Shape::vector_real(8));
  CHECK(*shape_of("exp(z) / (1 + mu)") == Shape::vector_real(8));
  CHECK(*shape_of("pow(z, 2)") == Shape::vector_real(8));
  CHECK(*shape_of("y * z") == Shape::vector_real(8));
  CHECK_FALSE(shape_of("z + k2").has_value());

  CHECK(*fold_literal(*Expr::make_number(2.5, false, {})) == 2.5);
  CHECK(*fold_literal(*Expr::make_unary_neg(Expr::make_number(3, true, {}), {})) == -3.0);
  CHECK_FALSE(fold_literal(*Expr::make_var("mu", {})).has_value());
}
