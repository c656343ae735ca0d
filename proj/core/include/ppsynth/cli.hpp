#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "ppsynth/diagnostics.hpp"

namespace ppsynth::cli {

// Exit codes: 0 success, 1 failure (the message names the class), 2 model
// fit but unreliable, 3 synthesis exhausted its budget.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUnreliable = 2;
inline constexpr int kExitNoValidModel = 3;

struct CliOptions {
  std::string dataset;            // builtin name or JSON file path
  std::string model_path;         // eval input
  std::string generator = "builtin";  // builtin | http | mock
  std::string endpoint;
  std::string http_model;
  std::string api_key_env = "PPSYNTH_API_KEY";
  std::string mock_script;        // mock: one fragment per line, replayed cyclically
  double temperature = 0.3;
  std::optional<uint64_t> seed;   // drawn and echoed when absent
  int chains = 4;
  int draws = 1000;
  int tune = 1000;
  int r_max = 100;
  int alpha = 2;
  int beta = 4;
  int zeta = 5;
  int seeds = 1;                  // synth: sweep this many consecutive seeds
  std::string out_path;           // synth: program text; eval: report JSON
  std::string report_path;        // synth: report JSON
  std::string record_path;        // synth: run log JSONL
  std::string draws_path;         // diagnose input
  std::string dump_draws_path;    // eval: posterior dump
};

void print_report(std::ostream& out, const DiagnosticsReport& report, int zeta);

int cmd_eval(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_synth(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_diagnose(const CliOptions& opts, std::ostream& out, std::ostream& err);

// argv-level entry point used by the ppsynth binary
int run_cli(int argc, const char* const* argv);

}  // namespace ppsynth::cli
