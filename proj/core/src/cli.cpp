#include "ppsynth/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "ppsynth/dataset.hpp"
#include "ppsynth/decoder.hpp"
#include "ppsynth/grammar.hpp"
#include "ppsynth/http_generator.hpp"
#include "ppsynth/model.hpp"
#include "ppsynth/refine.hpp"
#include "ppsynth/semantics.hpp"
#include "ppsynth/serialization.hpp"

namespace ppsynth::cli {

namespace {

std::string fmt(double v, int prec) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::optional<Dataset> resolve_dataset(const std::string& name, std::ostream& err) {
  if (auto builtin = builtin_dataset(name)) return builtin;
  LoadError lerr;
  if (auto file = load_dataset_file(name, &lerr)) return file;
  err << "failure: dataset: '" << name << "' is not a builtin dataset and " << lerr.message
      << "\n";
  return std::nullopt;
}

uint64_t resolve_seed(const CliOptions& opts, std::ostream& out) {
  uint64_t seed;
  if (opts.seed) {
    seed = *opts.seed;
  } else {
    std::random_device rd;
    seed = (static_cast<uint64_t>(rd()) << 32) ^ rd();
  }
  out << "seed: " << seed << "\n";
  return seed;
}

Thresholds thresholds_from(const CliOptions& opts) {
  Thresholds t;
  t.zeta = opts.zeta;
  return t;
}

SamplerConfig sampler_from(const CliOptions& opts, uint64_t seed) {
  SamplerConfig sc;
  sc.chains = opts.chains;
  sc.draws = opts.draws;
  sc.tune = opts.tune;
  sc.seed = seed;
  return sc;
}

std::unique_ptr<CandidateGenerator> make_generator(const CliOptions& opts, uint64_t seed,
                                                   std::ostream& err) {
  if (opts.generator == "builtin") {
    return std::make_unique<BuiltinGrammarSampler>(seed, opts.temperature);
  }
  if (opts.generator == "http") {
    if (opts.endpoint.empty()) {
      err << "failure: config: the http generator needs --endpoint\n";
      return nullptr;
    }
    HttpGeneratorConfig hc;
    hc.endpoint = opts.endpoint;
    hc.model = opts.http_model;
    hc.api_key_env = opts.api_key_env;
    hc.temperature = opts.temperature;
    return std::make_unique<HttpGenerator>(hc);
  }
  if (opts.generator == "mock") {
    if (opts.mock_script.empty()) {
      err << "failure: config: the mock generator needs --mock-script\n";
      return nullptr;
    }
    std::ifstream in(opts.mock_script);
    if (!in) {
      err << "failure: io: cannot open " << opts.mock_script << "\n";
      return nullptr;
    }
    std::vector<std::string> fragments;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      fragments.push_back(line);
    }
    return std::make_unique<ScriptedFragmentGenerator>(std::move(fragments), true);
  }
  err << "failure: config: unknown generator '" << opts.generator << "'\n";
  return nullptr;
}

bool write_file(const std::string& path, const std::string& text, std::ostream& err) {
  std::ofstream out(path);
  if (!out) {
    err << "failure: io: cannot open " << path << " for writing\n";
    return false;
  }
  out << text;
  return true;
}

std::string seed_path(const std::string& base, uint64_t seed, bool multi) {
  if (base.empty() || !multi) return base;
  return base + "." + std::to_string(seed);
}

}  // namespace

void print_report(std::ostream& out, const DiagnosticsReport& d, int zeta) {
  std::size_t width = 10;
  for (const auto& n : d.coord_names) width = std::max(width, n.size() + 2);
  out << std::left << std::setw(static_cast<int>(width)) << "parameter" << std::right
      << std::setw(8) << "rhat" << std::setw(10) << "ess_bulk" << std::setw(10) << "ess_tail"
      << "\n";
  for (std::size_t i = 0; i < d.coord_names.size(); ++i) {
    out << std::left << std::setw(static_cast<int>(width)) << d.coord_names[i] << std::right
        << std::setw(8) << (i < d.rhat.size() ? fmt(d.rhat[i], 3) : "-") << std::setw(10)
        << (i < d.ess_bulk.size() ? fmt(d.ess_bulk[i], 1) : "-") << std::setw(10)
        << (i < d.ess_tail.size() ? fmt(d.ess_tail[i], 1) : "-") << "\n";
  }

  out << "bfmi:";
  for (double b : d.bfmi) out << " " << fmt(b, 3);
  out << "\n";
  out << "divergences: " << d.divergences << "\n";
  out << "elpd: " << fmt(d.elpd, 2) << " (se " << fmt(d.elpd_se, 2) << ")\n";

  if (!d.pareto_k.empty()) {
    double kmax = -std::numeric_limits<double>::infinity();
    int good = 0;
    bool has_nan = false;
    for (double k : d.pareto_k) {
      if (std::isnan(k)) {
        has_nan = true;
        continue;
      }
      kmax = std::max(kmax, k);
      if (k <= 0.7) ++good;
    }
    out << "pareto_k: max " << (has_nan ? "nan" : fmt(kmax, 2)) << ", share <= 0.7: "
        << fmt(static_cast<double>(good) / static_cast<double>(d.pareto_k.size()), 2) << "\n";
  }

  static const char* kNames[7] = {"rhat",     "bfmi",        "ess-bulk", "divergences",
                                  "ess-tail", "elpd-finite", "pareto-k"};
  out << "indicators:";
  for (int i = 0; i < 7; ++i) {
    out << " " << kNames[i] << "=" << (d.indicators[static_cast<std::size_t>(i)] ? "pass" : "fail");
  }
  out << "\n";
  out << "score: " << d.score << "/7 (reliable at " << zeta << ": "
      << (d.score >= zeta ? "yes" : "no") << ")\n";
}

int cmd_eval(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  auto dataset = resolve_dataset(opts.dataset, err);
  if (!dataset) return kExitFailure;

  std::ifstream in(opts.model_path);
  if (!in) {
    err << "failure: io: cannot open " << opts.model_path << "\n";
    return kExitFailure;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  ParseOutcome parsed = parse_program_text(buf.str());
  if (!parsed.ok()) {
    err << "failure: syntax: " << parsed.error->message << " (offset "
        << parsed.error->char_pos << ")\n";
    return kExitFailure;
  }

  const DistributionRegistry& registry = DistributionRegistry::builtin();
  ValidationReport vrep = validate_program(*parsed.program, registry);
  if (!vrep.all_ok()) {
    err << "failure: semantic: " << vrep.message;
    if (vrep.violating_span) err << " (offset " << vrep.violating_span->char_begin << ")";
    err << "\n";
    return kExitFailure;
  }

  BindError berr;
  auto model = BoundModel::bind(*parsed.program, *dataset, registry, &berr);
  if (!model) {
    err << "failure: init: " << berr.message << "\n";
    return kExitFailure;
  }

  uint64_t seed = resolve_seed(opts, out);
  SamplerError serr;
  auto draws = nuts_sample(*model, sampler_from(opts, seed), &serr);
  if (!draws) {
    err << "failure: " << (serr.init_failure ? "init" : "sampler") << ": " << serr.message
        << "\n";
    return kExitFailure;
  }

  DiagnosticsReport report = compute_diagnostics(*draws, thresholds_from(opts));
  print_report(out, report, opts.zeta);

  if (!opts.dump_draws_path.empty()) {
    LoadError lerr;
    if (!save_draws(*draws, opts.dump_draws_path, &lerr)) {
      err << "failure: io: " << lerr.message << "\n";
      return kExitFailure;
    }
  }
  if (!opts.out_path.empty()) {
    ReportData rd;
    rd.program_text = render(*parsed.program);
    rd.diagnostics = report;
    rd.timestamp = current_timestamp();
    LoadError lerr;
    if (!save_report(rd, opts.out_path, &lerr)) {
      err << "failure: io: " << lerr.message << "\n";
      return kExitFailure;
    }
  }
  return report.score >= opts.zeta ? kExitOk : kExitUnreliable;
}

int cmd_synth(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  auto dataset = resolve_dataset(opts.dataset, err);
  if (!dataset) return kExitFailure;

  const DistributionRegistry& registry = DistributionRegistry::builtin();
  uint64_t seed0 = resolve_seed(opts, out);
  int n_runs = std::max(1, opts.seeds);
  bool multi = n_runs > 1;
  bool any_success = false;

  for (int k = 0; k < n_runs; ++k) {
    uint64_t seed = seed0 + static_cast<uint64_t>(k);
    auto gen = make_generator(opts, seed, err);
    if (!gen) return kExitFailure;

    RefineConfig rc;
    rc.r_max = opts.r_max;
    rc.alpha = opts.alpha;
    rc.beta = opts.beta;
    rc.score_min = opts.zeta;
    rc.thresholds = thresholds_from(opts);
    rc.sampler = sampler_from(opts, seed);
    rc.decode.temperature = opts.temperature;
    rc.seed = seed;

    SynthesisResult res = synthesize(*dataset, *gen, registry, rc);

    out << "seed " << seed << ": rounds " << res.records.size() << ", retries " << res.retries
        << ", accepted " << res.valid.size() << "/" << opts.beta << ", duplicates "
        << res.duplicates << ", tokens " << res.tokens_generated << " (+"
        << res.tokens_retried << " discarded)\n";
    for (const RunRecord& rec : res.records) {
      out << "  round " << std::setw(3) << rec.attempt << "  " << std::left << std::setw(20)
          << rec.action << std::right << "  ";
      if (!rec.failure.empty()) {
        out << rec.failure;
      } else if (rec.diagnostics) {
        out << "score " << rec.diagnostics->score << "/7, elpd "
            << fmt(rec.diagnostics->elpd, 2);
      } else {
        out << "rejected by validation";
      }
      if (rec.duplicate) out << " (duplicate)";
      out << "\n";
    }

    std::string record_path = seed_path(opts.record_path, seed, multi);
    if (!record_path.empty()) {
      LoadError lerr;
      if (!save_run_records(res.records, record_path, &lerr)) {
        err << "failure: io: " << lerr.message << "\n";
        return kExitFailure;
      }
    }

    if (!res.success()) {
      out << "no valid model within the retry budget";
      if (!record_path.empty()) out << " (see " << record_path << ")";
      out << "\n";
      continue;
    }
    any_success = true;

    const AcceptedProgram& best = res.valid[static_cast<std::size_t>(res.best)];
    out << "best model (score " << best.report.score << "/7, elpd " << fmt(best.report.elpd, 2)
        << " +- " << fmt(best.report.elpd_se, 2) << "):\n";
    out << best.text << "\n";

    if (!opts.out_path.empty() &&
        !write_file(seed_path(opts.out_path, seed, multi), best.text + "\n", err)) {
      return kExitFailure;
    }
    if (!opts.report_path.empty()) {
      ReportData rd;
      rd.program_text = best.text;
      rd.diagnostics = best.report;
      rd.run_record_path = record_path;
      rd.tokens_generated = res.tokens_generated;
      rd.tokens_retried = res.tokens_retried;
      rd.timestamp = current_timestamp();
      LoadError lerr;
      if (!save_report(rd, seed_path(opts.report_path, seed, multi), &lerr)) {
        err << "failure: io: " << lerr.message << "\n";
        return kExitFailure;
      }
    }
  }
  return any_success ? kExitOk : kExitNoValidModel;
}

int cmd_diagnose(const CliOptions& opts, std::ostream& out, std::ostream& err) {
  LoadError lerr;
  auto draws = load_draws(opts.draws_path, &lerr);
  if (!draws) {
    err << "failure: io: " << lerr.message << "\n";
    return kExitFailure;
  }
  if (draws->num_chains() < 2) {
    err << "failure: config: diagnostics need at least 2 chains, got "
        << draws->num_chains() << "\n";
    return kExitFailure;
  }
  DiagnosticsReport report = compute_diagnostics(*draws, thresholds_from(opts));
  print_report(out, report, opts.zeta);
  return report.score >= opts.zeta ? kExitOk : kExitUnreliable;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"model synthesis for a small probabilistic modeling language"};
  app.require_subcommand(1);
  CliOptions opts;

  auto add_sampler_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seed", opts.seed, "RNG seed (drawn when absent)");
    cmd->add_option("--chains", opts.chains, "number of chains");
    cmd->add_option("--draws", opts.draws, "posterior draws per chain");
    cmd->add_option("--tune", opts.tune, "warmup iterations per chain");
    cmd->add_option("--zeta", opts.zeta, "reliability score needed to pass");
  };

  CLI::App* eval = app.add_subcommand("eval", "fit one model file and score it");
  eval->add_option("--dataset", opts.dataset, "builtin dataset name or JSON file")->required();
  eval->add_option("--model", opts.model_path, "model source file")->required();
  eval->add_option("--out", opts.out_path, "write a report JSON here");
  eval->add_option("--dump-draws", opts.dump_draws_path, "write the posterior dump here");
  add_sampler_flags(eval);

  CLI::App* synth = app.add_subcommand("synth", "search for a reliable model");
  synth->add_option("--dataset", opts.dataset, "builtin dataset name or JSON file")->required();
  synth->add_option("--generator", opts.generator, "builtin | http | mock");
  synth->add_option("--endpoint", opts.endpoint, "http generator URL");
  synth->add_option("--http-model", opts.http_model, "model name sent to the endpoint");
  synth->add_option("--api-key-env", opts.api_key_env, "env var holding the bearer token");
  synth->add_option("--temperature", opts.temperature, "sampling temperature");
  synth->add_option("--mock-script", opts.mock_script, "fragment script for --generator mock");
  synth->add_option("--r-max", opts.r_max, "retry budget");
  synth->add_option("--alpha", opts.alpha, "likelihood redraws before the prior is redrawn");
  synth->add_option("--beta", opts.beta, "accepted programs to collect");
  synth->add_option("--seeds", opts.seeds, "sweep this many consecutive seeds");
  synth->add_option("--out", opts.out_path, "write the best program here");
  synth->add_option("--report", opts.report_path, "write a report JSON here");
  synth->add_option("--record", opts.record_path, "write the run log (JSONL) here");
  add_sampler_flags(synth);

  CLI::App* diagnose = app.add_subcommand("diagnose", "score a saved posterior dump");
  diagnose->add_option("--input", opts.draws_path, "posterior dump from eval --dump-draws")
      ->required();
  diagnose->add_option("--zeta", opts.zeta, "reliability score needed to pass");

  int rc = kExitOk;
  eval->callback([&] { rc = cmd_eval(opts, std::cout, std::cerr); });
  synth->callback([&] { rc = cmd_synth(opts, std::cout, std::cerr); });
  diagnose->callback([&] { rc = cmd_diagnose(opts, std::cout, std::cerr); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return rc;
}

}  // namespace ppsynth::cli
