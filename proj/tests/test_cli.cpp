#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ppsynth/cli.hpp"
#include "ppsynth/grammar.hpp"
#include "ppsynth/numutil.hpp"
#include "ppsynth/serialization.hpp"

using namespace ppsynth;
using namespace ppsynth::cli;

namespace {

std::string tmp_file(const std::string& name) { return "/tmp/ppsynth_cli_" + name; }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::string kModelsDir = PPSYNTH_MODELS_DIR;

const char* kTinyModel =
    "model {\n"
    "data {\n"
    "y: vector[3];\n"
    "}\n"
    "prior {\n"
    "mu ~ Normal(0, 10);\n"
    "}\n"
    "likelihood {\n"
    "y ~ Normal(mu, 1);\n"
    "}\n"
    "}\n";

std::string tiny_dataset_file() {
  std::string path = tmp_file("tiny.json");
  write_file(path,
             "{\"name\": \"tiny\", \"columns\": {\"y\": [1.0, 2.0, 3.0]}, "
             "\"meta\": {\"description\": \"three points\"}}");
  return path;
}

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run eval(CliOptions opts) {
  std::ostringstream out, err;
  Run r;
  r.code = cmd_eval(opts, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

Run synth(CliOptions opts) {
  std::ostringstream out, err;
  Run r;
  r.code = cmd_synth(opts, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

Run diagnose(CliOptions opts) {
  std::ostringstream out, err;
  Run r;
  r.code = cmd_diagnose(opts, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

CliOptions quick_eval_opts() {
  CliOptions opts;
  opts.dataset = "eight_schools";
  opts.model_path = kModelsDir + "/eight_schools_noncentered.ppl";
  opts.seed = 11;
  opts.chains = 2;
  opts.draws = 500;
  opts.tune = 1000;  // the full adaptation window keeps divergences at zero
  return opts;
}

PosteriorDraws synthetic_draws(int chains, int iters) {
  PosteriorDraws post;
  post.coord_names = {"a"};
  post.num_observations = 2;
  for (int c = 0; c < chains; ++c) {
    Rng rng(300 + static_cast<unsigned long long>(c), 0);
    ChainDraws cd;
    cd.step_size = 0.5;
    for (int i = 0; i < iters; ++i) {
      double a = rng.normal();
      cd.draws.push_back({a});
      cd.energy.push_back(0.5 + 0.8 * rng.normal());
      cd.divergent.push_back(0);
      cd.pointwise_loglik.push_back({-1.2 + 0.1 * a, -0.8 - 0.05 * a});
    }
    post.chains.push_back(std::move(cd));
  }
  return post;
}

}  // namespace

TEST_CASE("eval scores the reference model as reliable") {
  Run r = eval(quick_eval_opts());
  CHECK(r.code == kExitOk);
  CHECK(r.err.empty());
  CHECK(r.out.find("seed: 11") != std::string::npos);
  CHECK(r.out.find("mu") != std::string::npos);
  CHECK(r.out.find("tau") != std::string::npos);
  CHECK(r.out.find("divergences: 0") != std::string::npos);
  CHECK(r.out.find("elpd: ") != std::string::npos);
  CHECK(r.out.find("indicators: rhat=pass") != std::string::npos);
  CHECK(r.out.find("(reliable at 5: yes)") != std::string::npos);
}

TEST_CASE("eval returns the unreliable code when the bar is not met") {
  CliOptions opts = quick_eval_opts();
  opts.model_path = kModelsDir + "/eight_schools_centered.ppl";
  opts.seed = 1234;
  opts.chains = 4;
  opts.draws = 1000;
  opts.tune = 1000;
  opts.zeta = 7;  // the centered model diverges, so it cannot hit 7
  Run r = eval(opts);
  CHECK(r.code == kExitUnreliable);
  CHECK(r.out.find("(reliable at 7: no)") != std::string::npos);
  CHECK(r.out.find("divergences: 0") == std::string::npos);
}

TEST_CASE("eval reports failure classes on stderr") {
  CliOptions opts = quick_eval_opts();

  SUBCASE("missing model file") {
    opts.model_path = tmp_file("nope.ppl");
    std::remove(opts.model_path.c_str());
    Run r = eval(opts);
    CHECK(r.code == kExitFailure);
    CHECK(r.err.find("failure: io: cannot open") != std::string::npos);
  }

  SUBCASE("unknown dataset") {
    opts.dataset = "nonesuch";
    Run r = eval(opts);
    CHECK(r.code == kExitFailure);
    CHECK(r.err.find("failure: dataset:") != std::string::npos);
  }

  SUBCASE("syntax error with offset") {
    std::string path = tmp_file("bad_syntax.ppl");
    write_file(path, "model { data { y: vector[8]; }\nprior { mu ~ }\n}");
    opts.model_path = path;
    Run r = eval(opts);
    CHECK(r.code == kExitFailure);
    CHECK(r.err.find("failure: syntax:") != std::string::npos);
    CHECK(r.err.find("(offset ") != std::string::npos);
  }

  SUBCASE("semantic error with offset") {
    std::string path = tmp_file("bad_semantic.ppl");
    write_file(path,
               "model { data { y: vector[8]; sigma: vector[8]; } "
               "prior { mu ~ ExtNormal(0, 1); } likelihood { y ~ Normal(mu, sigma); } }");
    opts.model_path = path;
    Run r = eval(opts);
    CHECK(r.code == kExitFailure);
    CHECK(r.err.find("failure: semantic:") != std::string::npos);
    CHECK(r.err.find("offset") != std::string::npos);
  }

  SUBCASE("bind failure against the dataset") {
    std::string path = tmp_file("bad_bind.ppl");
    write_file(path,
               "model { data { z: vector[8]; } prior { mu ~ Normal(0, 1); } "
               "likelihood { z ~ Normal(mu, 1); } }");
    opts.model_path = path;
    Run r = eval(opts);
    CHECK(r.code == kExitFailure);
    CHECK(r.err.find("failure: init:") != std::string::npos);
  }

  SUBCASE("initialization failure at sampling time") {
    std::string path = tmp_file("zero_width.ppl");
    write_file(path,
               "model { data { y: vector[8]; sigma: vector[8]; } "
               "prior { a ~ Normal(0, 1); } likelihood { y ~ Uniform(a, a); } }");
    opts.model_path = path;
    Run r = eval(opts);
    CHECK(r.code == kExitFailure);
    CHECK(r.err.find("failure: init: failed to initialize") != std::string::npos);
  }
}

TEST_CASE("eval works against a dataset file and echoes a drawn seed") {
  CliOptions opts;
  opts.dataset = tiny_dataset_file();
  std::string model_path = tmp_file("tiny.ppl");
  write_file(model_path, kTinyModel);
  opts.model_path = model_path;
  opts.chains = 2;
  opts.draws = 500;
  opts.tune = 300;

  Run r = eval(opts);  // no seed given
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("seed: ") != std::string::npos);
}

TEST_CASE("eval artifacts are reproducible for a fixed seed") {
  CliOptions opts = quick_eval_opts();
  opts.draws = 400;
  opts.tune = 300;

  opts.out_path = tmp_file("rep_a.json");
  opts.dump_draws_path = tmp_file("draws_a.json");
  Run a = eval(opts);
  opts.out_path = tmp_file("rep_b.json");
  opts.dump_draws_path = tmp_file("draws_b.json");
  Run b = eval(opts);

  CHECK(a.code == b.code);
  CHECK(a.out == b.out);  // stdout carries no timestamps

  // the draws dump has no timestamp either: byte-identical
  CHECK(read_file(tmp_file("draws_a.json")) == read_file(tmp_file("draws_b.json")));

  auto ra = load_report(tmp_file("rep_a.json"));
  auto rb = load_report(tmp_file("rep_b.json"));
  REQUIRE(ra.has_value());
  REQUIRE(rb.has_value());
  CHECK(ra->program_text == rb->program_text);
  CHECK(ra->diagnostics.score == rb->diagnostics.score);
  CHECK(ra->diagnostics.elpd == rb->diagnostics.elpd);
  CHECK_FALSE(ra->timestamp.empty());

  auto draws = load_draws(tmp_file("draws_a.json"));
  REQUIRE(draws.has_value());
  CHECK(draws->num_chains() == 2);
  CHECK(draws->num_draws() == 400);
  CHECK(draws->coord_names.size() == 10);
}

TEST_CASE("synth with a mock script accepts and records every round") {
  std::string script = tmp_file("trace_a.txt");
  write_file(script,
             "# always-valid cycle\n"
             "mu ~ Normal(0, 10);\n"
             "}\n"
             "y ~ Normal(mu, sigma);\n"
             "}\n");

  CliOptions opts;
  opts.dataset = "eight_schools";
  opts.generator = "mock";
  opts.mock_script = script;
  opts.seed = 5;
  opts.chains = 2;
  opts.draws = 500;
  opts.tune = 300;
  opts.out_path = tmp_file("synth_best.ppl");
  opts.report_path = tmp_file("synth_report.json");
  opts.record_path = tmp_file("synth_records.jsonl");

  Run r = synth(opts);
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("seed: 5") != std::string::npos);
  CHECK(r.out.find("retries 0") != std::string::npos);
  CHECK(r.out.find("accepted 4/4") != std::string::npos);
  CHECK(r.out.find("best model (score ") != std::string::npos);
  CHECK(r.out.find("accept") != std::string::npos);

  std::string best = read_file(tmp_file("synth_best.ppl"));
  ParseOutcome parsed = parse_program_text(best);
  CHECK(parsed.ok());

  auto report = load_report(tmp_file("synth_report.json"));
  REQUIRE(report.has_value());
  CHECK(report->program_text == best.substr(0, best.size() - 1));  // trailing newline
  CHECK(report->diagnostics.score >= 5);
  CHECK(report->run_record_path == tmp_file("synth_records.jsonl"));
  CHECK(report->tokens_generated > 0);

  auto records = load_run_records(tmp_file("synth_records.jsonl"));
  REQUIRE(records.has_value());
  REQUIRE(records->size() == 4);
  for (const RunRecord& rec : *records) {
    CHECK(rec.action == "accept");
    CHECK(rec.phi_ok);
    REQUIRE(rec.diagnostics.has_value());
    CHECK(rec.diagnostics->score >= 5);
  }
  CHECK((*records)[1].duplicate);
}

TEST_CASE("synth exhausts its budget and exits with the no-model code") {
  std::string script = tmp_file("trace_c.txt");
  write_file(script, "w ~ Normal(0, undefined_name);\n");

  CliOptions opts;
  opts.dataset = "eight_schools";
  opts.generator = "mock";
  opts.mock_script = script;
  opts.seed = 5;
  opts.r_max = 6;
  opts.record_path = tmp_file("trace_c.jsonl");

  Run r = synth(opts);
  CHECK(r.code == kExitNoValidModel);
  CHECK(r.out.find("no valid model within the retry budget") != std::string::npos);
  CHECK(r.out.find("decode-retry-cap") != std::string::npos);

  auto records = load_run_records(tmp_file("trace_c.jsonl"));
  REQUIRE(records.has_value());
  CHECK(records->size() == 6);
}

TEST_CASE("synth sweeps consecutive seeds") {
  std::string script = tmp_file("trace_sweep.txt");
  write_file(script, "mu ~ Normal(0, 10);\n}\ny ~ Normal(mu, sigma);\n}\n");

  CliOptions opts;
  opts.dataset = "eight_schools";
  opts.generator = "mock";
  opts.mock_script = script;
  opts.seed = 40;
  opts.seeds = 2;
  opts.beta = 1;
  opts.chains = 2;
  opts.draws = 400;
  opts.tune = 300;

  Run r = synth(opts);
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("seed 40:") != std::string::npos);
  CHECK(r.out.find("seed 41:") != std::string::npos);
}

TEST_CASE("synth configuration errors fail fast") {
  CliOptions opts;
  opts.dataset = "eight_schools";
  opts.generator = "warp";
  Run r = synth(opts);
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("failure: config: unknown generator 'warp'") != std::string::npos);

  opts.generator = "mock";
  opts.mock_script = "";
  r = synth(opts);
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("failure: config:") != std::string::npos);

  opts.mock_script = tmp_file("missing_script.txt");
  std::remove(opts.mock_script.c_str());
  r = synth(opts);
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("failure: io:") != std::string::npos);

  opts.generator = "http";
  opts.endpoint = "";
  r = synth(opts);
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("needs --endpoint") != std::string::npos);
}

TEST_CASE("diagnose recomputes a report from stored draws") {
  std::string path = tmp_file("diag_draws.json");
  LoadError lerr;
  REQUIRE(save_draws(synthetic_draws(4, 600), path, &lerr));

  CliOptions opts;
  opts.draws_path = path;
  Run r = diagnose(opts);
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("score: ") != std::string::npos);
  CHECK(r.out.find("indicators: rhat=") != std::string::npos);

  std::string narrow = tmp_file("diag_one_chain.json");
  REQUIRE(save_draws(synthetic_draws(1, 600), narrow, &lerr));
  opts.draws_path = narrow;
  r = diagnose(opts);
  CHECK(r.code == kExitFailure);
  CHECK(r.err.find("diagnostics need at least 2 chains") != std::string::npos);
}

TEST_CASE("dataset files round-trip and validate on load") {
  Dataset d;
  d.name = "rt";
  d.description = "round trip";
  d.columns.push_back({"x", {0.5, 1.5}, false});
  d.columns.push_back({"n", {3.0, 7.0}, true});

  std::string path = tmp_file("rt.json");
  LoadError lerr;
  REQUIRE(save_dataset_file(d, path, &lerr));
  auto back = load_dataset_file(path, &lerr);
  REQUIRE(back.has_value());
  CHECK(back->name == "rt");
  CHECK(back->description == "round trip");
  REQUIRE(back->columns.size() == 2);
  CHECK(back->columns[0].name == "x");
  CHECK_FALSE(back->columns[0].is_int);
  CHECK(back->columns[1].is_int);
  CHECK(back->columns[1].values == std::vector<double>{3.0, 7.0});

  auto reject = [&](const char* name, const std::string& body) {
    std::string p = tmp_file(name);
    write_file(p, body);
    LoadError e;
    auto loaded = load_dataset_file(p, &e);
    CHECK_FALSE(loaded.has_value());
    CHECK_FALSE(e.message.empty());
  };
  reject("no_columns.json", "{\"name\": \"x\"}");
  reject("empty_column.json", "{\"columns\": {\"y\": []}}");
  reject("non_numeric.json", "{\"columns\": {\"y\": [1, \"two\"]}}");
  reject("bad_int_name.json",
         "{\"columns\": {\"y\": [1]}, \"meta\": {\"int_columns\": [\"z\"]}}");
  reject("fractional_int.json",
         "{\"columns\": {\"y\": [1.5]}, \"meta\": {\"int_columns\": [\"y\"]}}");
  reject("not_json.json", "model { }");
}

TEST_CASE("loaders reject a foreign schema major version") {
  ReportData rd;
  rd.program_text = "model { }";
  rd.diagnostics.elpd = -3.0;
  rd.timestamp = current_timestamp();
  std::string path = tmp_file("schema.json");
  LoadError lerr;
  REQUIRE(save_report(rd, path, &lerr));

  std::string text = read_file(path);
  std::string needle = "\"major\": 1";
  auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, needle.size(), "\"major\": 9");
  write_file(path, text);

  auto loaded = load_report(path, &lerr);
  CHECK_FALSE(loaded.has_value());
  CHECK(lerr.message.find("unsupported schema major version") != std::string::npos);
}

TEST_CASE("print_report lays out the summary lines") {
  DiagnosticsReport d;
  d.coord_names = {"mu"};
  d.rhat = {1.002};
  d.ess_bulk = {512.0};
  d.ess_tail = {220.0};
  d.bfmi = {1.4, 1.6};
  d.divergences = 3;
  d.elpd = -30.7;
  d.elpd_se = 1.2;
  d.pareto_k = {0.2, 0.4};
  Thresholds th;
  apply_score(d, th);

  std::ostringstream out;
  print_report(out, d, 5);
  std::string s = out.str();
  CHECK(s.find("mu") != std::string::npos);
  CHECK(s.find("divergences: 3") != std::string::npos);
  CHECK(s.find("elpd: -30.70 (se 1.20)") != std::string::npos);
  CHECK(s.find("pareto_k: max 0.40, share <= 0.7: 1.00") != std::string::npos);
  CHECK(s.find("divergences=fail") != std::string::npos);
  CHECK(s.find("score: 6/7 (reliable at 5: yes)") != std::string::npos);
}

TEST_CASE("the argv entry point rejects malformed invocations") {
  const char* no_sub[] = {"ppsynth"};
  CHECK(run_cli(1, no_sub) != 0);

  const char* bad_flag[] = {"ppsynth", "eval", "--frobnicate"};
  CHECK(run_cli(3, bad_flag) != 0);

  const char* bad_sub[] = {"ppsynth", "transmogrify"};
  CHECK(run_cli(2, bad_sub) != 0);
}
