#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ppsynth/dataset.hpp"
#include "ppsynth/diagnostics.hpp"
#include "ppsynth/inference.hpp"
#include "ppsynth/refine.hpp"

namespace ppsynth {

// bumped on breaking layout changes; loaders reject a foreign major
inline constexpr int kSchemaMajor = 1;
inline constexpr int kSchemaMinor = 0;

struct LoadError {
  std::string message;
};

// Dataset files: {"name": ..., "columns": {col: [numbers]}, "meta":
// {"description": ..., "int_columns": [col]}}. Column order is preserved.
std::optional<Dataset> load_dataset_file(const std::string& path, LoadError* err = nullptr);
bool save_dataset_file(const Dataset& dataset, const std::string& path,
                       LoadError* err = nullptr);

struct ReportData {
  std::string program_text;
  DiagnosticsReport diagnostics;
  std::string run_record_path;  // empty when no run log was written
  long tokens_generated = 0;
  long tokens_retried = 0;
  std::string timestamp;
};

bool save_report(const ReportData& report, const std::string& path, LoadError* err = nullptr);
std::optional<ReportData> load_report(const std::string& path, LoadError* err = nullptr);

// full posterior dump consumed by the diagnose command
bool save_draws(const PosteriorDraws& draws, const std::string& path, LoadError* err = nullptr);
std::optional<PosteriorDraws> load_draws(const std::string& path, LoadError* err = nullptr);

// one JSON object per line, one line per synthesis round
bool save_run_records(const std::vector<RunRecord>& records, const std::string& path,
                      LoadError* err = nullptr);
std::optional<std::vector<RunRecord>> load_run_records(const std::string& path,
                                                       LoadError* err = nullptr);

std::string current_timestamp();  // UTC, RFC 3339

}  // namespace ppsynth
