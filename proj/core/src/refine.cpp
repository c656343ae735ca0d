#include "ppsynth/refine.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "ppsynth/model.hpp"

namespace ppsynth {

int select_best(const std::vector<AcceptedProgram>& valid) {
  int best = -1;
  double best_elpd = 0.0;
  int best_score = -1;
  for (int i = 0; i < static_cast<int>(valid.size()); ++i) {
    double e = valid[i].report.elpd;
    if (std::isnan(e)) e = -std::numeric_limits<double>::infinity();
    if (best < 0 || e > best_elpd ||
        (e == best_elpd && valid[i].report.score > best_score)) {
      best = i;
      best_elpd = e;
      best_score = valid[i].report.score;
    }
  }
  return best;
}

namespace {

// Decode one block of `prog` in place. Consumes a decode seed from the master
// stream either way so replays stay aligned. False means the retry cap hit
// and the block is left empty.
bool redraw_block(ModelProgram& prog, BlockKind which, CandidateGenerator& gen,
                  const Dataset& dataset, const DistributionRegistry& registry,
                  const RefineConfig& config, Rng& master, RunRecord& rec,
                  SynthesisResult& result) {
  DecodeConfig dc = config.decode;
  dc.seed = master.raw();
  DecodeStats stats;
  DecodeError derr;
  auto block = decode_block(prog, which, gen, dataset, registry, dc, &stats, &derr);
  rec.tokens_generated += stats.tokens_generated;
  rec.tokens_retried += stats.tokens_retried;
  result.tokens_generated += stats.tokens_generated;
  result.tokens_retried += stats.tokens_retried;
  auto& target = which == BlockKind::Prior ? prog.prior_stmts : prog.likelihood_stmts;
  if (!block) {
    target.clear();
    return false;
  }
  target = std::move(*block);
  return true;
}

}  // namespace

SynthesisResult synthesize(const Dataset& dataset, CandidateGenerator& gen,
                           const DistributionRegistry& registry, const RefineConfig& config) {
  SynthesisResult result;
  Rng master(config.seed);
  std::set<std::string> seen_texts;

  ModelProgram prog;
  prog.data_decls = data_decls_for(dataset);
  bool have_prior = false;
  bool have_likelihood = false;
  int r = 0;
  int ell = 0;
  int round = 0;

  while (r < config.r_max && static_cast<int>(result.valid.size()) < config.beta) {
    RunRecord rec;
    rec.attempt = round++;
    rec.action = "none";

    bool decode_ok = true;
    if (!have_prior) {
      have_prior = redraw_block(prog, BlockKind::Prior, gen, dataset, registry, config,
                                master, rec, result);
      decode_ok = have_prior;
    }
    if (decode_ok && !have_likelihood) {
      have_likelihood = redraw_block(prog, BlockKind::Likelihood, gen, dataset, registry,
                                     config, master, rec, result);
      decode_ok = have_likelihood;
    }
    if (!decode_ok) {
      rec.failure = "decode-retry-cap";
      ++r;
      result.records.push_back(std::move(rec));
      continue;
    }

    rec.program_text = render(prog);
    rec.duplicate = !seen_texts.insert(rec.program_text).second;
    if (rec.duplicate) ++result.duplicates;

    ValidationReport vrep = validate_program(prog, registry);
    rec.phi_ok = vrep.all_ok();
    if (!rec.phi_ok) {
      ++r;
      result.records.push_back(std::move(rec));
      continue;
    }

    std::optional<DiagnosticsReport> report;
    std::string failure;
    BindError berr;
    auto model = BoundModel::bind(prog, dataset, registry, &berr);
    if (!model) {
      failure = "init-failure";
    } else {
      SamplerConfig sc = config.sampler;
      sc.seed = master.raw();
      SamplerError serr;
      auto draws = nuts_sample(*model, sc, &serr);
      if (!draws) {
        failure = serr.init_failure ? "init-failure" : "sampler-error";
      } else {
        report = compute_diagnostics(*draws, config.thresholds);
      }
    }
    rec.failure = failure;
    rec.diagnostics = report;

    if (report && report->score >= config.score_min) {
      rec.action = "accept";
      result.valid.push_back({prog, rec.program_text, *report});
      prog.prior_stmts.clear();
      prog.likelihood_stmts.clear();
      have_prior = false;
      have_likelihood = false;
      result.records.push_back(std::move(rec));
      continue;
    }

    if (ell < config.alpha) {
      rec.action = "likelihood-resample";
      ++ell;
      ++result.likelihood_resamples;
      prog.likelihood_stmts.clear();
      have_likelihood = redraw_block(prog, BlockKind::Likelihood, gen, dataset, registry,
                                     config, master, rec, result);
    } else {
      rec.action = "prior-resample";
      prog.likelihood_stmts.clear();  // references into the old prior go stale
      have_likelihood = false;
      have_prior = redraw_block(prog, BlockKind::Prior, gen, dataset, registry, config,
                                master, rec, result);
    }
    ++r;
    result.records.push_back(std::move(rec));
  }

  result.retries = r;
  result.best = select_best(result.valid);
  return result;
}

}  // namespace ppsynth
