#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ppsynth/dataset.hpp"
#include "ppsynth/decoder.hpp"
#include "ppsynth/diagnostics.hpp"
#include "ppsynth/inference.hpp"

namespace ppsynth {

struct RefineConfig {
  int r_max = 100;     // retry budget; every non-accepting round consumes one
  int alpha = 2;       // likelihood redraws before the prior is redrawn
  int beta = 4;        // accepted programs to collect
  int score_min = 5;   // acceptance bar on the reliability score
  Thresholds thresholds;
  SamplerConfig sampler;
  DecodeConfig decode;
  uint64_t seed = 0;
};

// one synthesis round as written to the run log
struct RunRecord {
  int attempt = 0;
  std::string program_text;
  bool phi_ok = false;
  // empty on a clean round, else decode-retry-cap | init-failure | sampler-error
  std::string failure;
  std::optional<DiagnosticsReport> diagnostics;
  std::string action;  // accept | likelihood-resample | prior-resample | none
  long tokens_generated = 0;
  long tokens_retried = 0;
  bool duplicate = false;
};

struct AcceptedProgram {
  ModelProgram program;
  std::string text;
  DiagnosticsReport report;
};

struct SynthesisResult {
  std::vector<AcceptedProgram> valid;  // at most beta, in acceptance order
  int best = -1;                       // index into valid, -1 when empty
  std::vector<RunRecord> records;
  int retries = 0;
  int likelihood_resamples = 0;
  int duplicates = 0;
  long tokens_generated = 0;
  long tokens_retried = 0;

  bool success() const { return !valid.empty(); }
};

// highest elpd wins; ties break to the higher score, then to the earlier accept
int select_best(const std::vector<AcceptedProgram>& valid);

SynthesisResult synthesize(const Dataset& dataset, CandidateGenerator& gen,
                           const DistributionRegistry& registry, const RefineConfig& config);

}  // namespace ppsynth
