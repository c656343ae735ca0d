#include "ppsynth/serialization.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace ppsynth {

namespace {

using ordered_json = nlohmann::ordered_json;

bool set_error(LoadError* err, const std::string& message) {
  if (err) err->message = message;
  return false;
}

// NaN has no JSON representation; null stands in for it
ordered_json num_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double num_from(const ordered_json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

ordered_json num_array(const std::vector<double>& v) {
  ordered_json out = ordered_json::array();
  for (double x : v) out.push_back(num_or_null(x));
  return out;
}

std::vector<double> num_vector(const ordered_json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(num_from(x));
  return out;
}

bool write_text(const std::string& path, const std::string& text, LoadError* err) {
  std::ofstream out(path);
  if (!out) return set_error(err, "cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) return set_error(err, "failed to write " + path);
  return true;
}

std::optional<ordered_json> parse_file(const std::string& path, LoadError* err) {
  std::ifstream in(path);
  if (!in) {
    set_error(err, "cannot open " + path);
    return std::nullopt;
  }
  ordered_json j = ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    set_error(err, path + " is not valid JSON");
    return std::nullopt;
  }
  return j;
}

ordered_json schema_header(const char* name) {
  return ordered_json{{"name", name}, {"major", kSchemaMajor}, {"minor", kSchemaMinor}};
}

bool check_schema(const ordered_json& j, const char* name, const std::string& path,
                  LoadError* err) {
  if (!j.contains("schema") || !j["schema"].is_object()) {
    return set_error(err, path + ": missing schema header");
  }
  const auto& s = j["schema"];
  if (s.value("name", std::string()) != name) {
    return set_error(err, path + ": expected schema '" + name + "'");
  }
  if (s.value("major", -1) != kSchemaMajor) {
    return set_error(err, path + ": unsupported schema major version " +
                              s.value("major", ordered_json()).dump());
  }
  return true;
}

ordered_json diagnostics_to_json(const DiagnosticsReport& d) {
  ordered_json j;
  j["coord_names"] = d.coord_names;
  j["rhat"] = num_array(d.rhat);
  j["ess_bulk"] = num_array(d.ess_bulk);
  j["ess_tail"] = num_array(d.ess_tail);
  j["bfmi"] = num_array(d.bfmi);
  j["divergences"] = d.divergences;
  j["elpd"] = num_or_null(d.elpd);
  j["elpd_se"] = num_or_null(d.elpd_se);
  j["pareto_k"] = num_array(d.pareto_k);
  ordered_json ind = ordered_json::array();
  for (bool b : d.indicators) ind.push_back(b);
  j["indicators"] = ind;
  j["score"] = d.score;
  return j;
}

DiagnosticsReport diagnostics_from_json(const ordered_json& j) {
  DiagnosticsReport d;
  if (j.contains("coord_names")) {
    d.coord_names = j["coord_names"].get<std::vector<std::string>>();
  }
  d.rhat = num_vector(j.value("rhat", ordered_json::array()));
  d.ess_bulk = num_vector(j.value("ess_bulk", ordered_json::array()));
  d.ess_tail = num_vector(j.value("ess_tail", ordered_json::array()));
  d.bfmi = num_vector(j.value("bfmi", ordered_json::array()));
  d.divergences = j.value("divergences", 0L);
  d.elpd = num_from(j.value("elpd", ordered_json()));
  d.elpd_se = num_from(j.value("elpd_se", ordered_json()));
  d.pareto_k = num_vector(j.value("pareto_k", ordered_json::array()));
  if (j.contains("indicators")) {
    const auto& ind = j["indicators"];
    for (std::size_t i = 0; i < d.indicators.size() && i < ind.size(); ++i) {
      d.indicators[i] = ind[static_cast<int>(i)].get<bool>();
    }
  }
  d.score = j.value("score", 0);
  return d;
}

ordered_json record_to_json(const RunRecord& rec) {
  ordered_json j;
  j["attempt"] = rec.attempt;
  j["program"] = rec.program_text;
  j["phi_ok"] = rec.phi_ok;
  j["failure"] = rec.failure;
  j["action"] = rec.action;
  j["tokens_generated"] = rec.tokens_generated;
  j["tokens_retried"] = rec.tokens_retried;
  j["duplicate"] = rec.duplicate;
  if (rec.diagnostics) j["diagnostics"] = diagnostics_to_json(*rec.diagnostics);
  return j;
}

RunRecord record_from_json(const ordered_json& j) {
  RunRecord rec;
  rec.attempt = j.value("attempt", 0);
  rec.program_text = j.value("program", std::string());
  rec.phi_ok = j.value("phi_ok", false);
  rec.failure = j.value("failure", std::string());
  rec.action = j.value("action", std::string());
  rec.tokens_generated = j.value("tokens_generated", 0L);
  rec.tokens_retried = j.value("tokens_retried", 0L);
  rec.duplicate = j.value("duplicate", false);
  if (j.contains("diagnostics")) rec.diagnostics = diagnostics_from_json(j["diagnostics"]);
  return rec;
}

}  // namespace

std::optional<Dataset> load_dataset_file(const std::string& path, LoadError* err) {
  auto j = parse_file(path, err);
  if (!j) return std::nullopt;
  if (!j->is_object() || !j->contains("columns") || !(*j)["columns"].is_object()) {
    set_error(err, path + ": expected an object with a 'columns' object");
    return std::nullopt;
  }

  Dataset d;
  d.name = j->value("name", std::string());
  std::vector<std::string> int_columns;
  if (j->contains("meta") && (*j)["meta"].is_object()) {
    const auto& meta = (*j)["meta"];
    d.description = meta.value("description", std::string());
    if (meta.contains("int_columns")) {
      int_columns = meta["int_columns"].get<std::vector<std::string>>();
    }
  }

  for (const auto& [key, value] : (*j)["columns"].items()) {
    if (!value.is_array() || value.empty()) {
      set_error(err, path + ": column '" + key + "' must be a non-empty array");
      return std::nullopt;
    }
    DataColumn col;
    col.name = key;
    for (const auto& x : value) {
      if (!x.is_number()) {
        set_error(err, path + ": column '" + key + "' contains a non-number");
        return std::nullopt;
      }
      col.values.push_back(x.get<double>());
    }
    d.columns.push_back(std::move(col));
  }

  for (const std::string& name : int_columns) {
    DataColumn* col = nullptr;
    for (auto& c : d.columns) {
      if (c.name == name) col = &c;
    }
    if (!col) {
      set_error(err, path + ": int_columns lists unknown column '" + name + "'");
      return std::nullopt;
    }
    for (double v : col->values) {
      if (v != std::floor(v)) {
        set_error(err, path + ": int column '" + name + "' has a non-integer value");
        return std::nullopt;
      }
    }
    col->is_int = true;
  }
  return d;
}

bool save_dataset_file(const Dataset& dataset, const std::string& path, LoadError* err) {
  ordered_json j;
  j["name"] = dataset.name;
  ordered_json cols = ordered_json::object();
  std::vector<std::string> int_columns;
  for (const DataColumn& c : dataset.columns) {
    cols[c.name] = num_array(c.values);
    if (c.is_int) int_columns.push_back(c.name);
  }
  j["columns"] = std::move(cols);
  ordered_json meta;
  meta["description"] = dataset.description;
  if (!int_columns.empty()) meta["int_columns"] = int_columns;
  j["meta"] = std::move(meta);
  return write_text(path, j.dump(2) + "\n", err);
}

bool save_report(const ReportData& report, const std::string& path, LoadError* err) {
  ordered_json j;
  j["schema"] = schema_header("ppsynth.report");
  j["timestamp"] = report.timestamp;
  j["program"] = report.program_text;
  j["diagnostics"] = diagnostics_to_json(report.diagnostics);
  j["tokens"] = ordered_json{{"generated", report.tokens_generated},
                             {"retried", report.tokens_retried}};
  if (!report.run_record_path.empty()) j["run_record_path"] = report.run_record_path;
  return write_text(path, j.dump(2) + "\n", err);
}

std::optional<ReportData> load_report(const std::string& path, LoadError* err) {
  auto j = parse_file(path, err);
  if (!j) return std::nullopt;
  if (!check_schema(*j, "ppsynth.report", path, err)) return std::nullopt;
  ReportData r;
  r.timestamp = j->value("timestamp", std::string());
  r.program_text = j->value("program", std::string());
  if (j->contains("diagnostics")) r.diagnostics = diagnostics_from_json((*j)["diagnostics"]);
  if (j->contains("tokens")) {
    r.tokens_generated = (*j)["tokens"].value("generated", 0L);
    r.tokens_retried = (*j)["tokens"].value("retried", 0L);
  }
  r.run_record_path = j->value("run_record_path", std::string());
  return r;
}

bool save_draws(const PosteriorDraws& draws, const std::string& path, LoadError* err) {
  ordered_json j;
  j["schema"] = schema_header("ppsynth.draws");
  j["layout"] = ordered_json{{"coord_names", draws.coord_names},
                             {"num_observations", draws.num_observations},
                             {"chains", draws.num_chains()},
                             {"draws", draws.num_draws()}};
  ordered_json dr = ordered_json::array();
  ordered_json en = ordered_json::array();
  ordered_json dv = ordered_json::array();
  ordered_json ll = ordered_json::array();
  ordered_json ss = ordered_json::array();
  for (const ChainDraws& c : draws.chains) {
    ordered_json cd = ordered_json::array();
    for (const auto& row : c.draws) cd.push_back(num_array(row));
    dr.push_back(std::move(cd));
    en.push_back(num_array(c.energy));
    ordered_json cdv = ordered_json::array();
    for (char d : c.divergent) cdv.push_back(d ? 1 : 0);
    dv.push_back(std::move(cdv));
    ordered_json cll = ordered_json::array();
    for (const auto& row : c.pointwise_loglik) cll.push_back(num_array(row));
    ll.push_back(std::move(cll));
    ss.push_back(c.step_size);
  }
  j["draws"] = std::move(dr);
  j["energy"] = std::move(en);
  j["divergent"] = std::move(dv);
  j["pointwise_loglik"] = std::move(ll);
  j["step_size"] = std::move(ss);
  return write_text(path, j.dump() + "\n", err);
}

std::optional<PosteriorDraws> load_draws(const std::string& path, LoadError* err) {
  auto j = parse_file(path, err);
  if (!j) return std::nullopt;
  if (!check_schema(*j, "ppsynth.draws", path, err)) return std::nullopt;
  if (!j->contains("layout") || !j->contains("draws")) {
    set_error(err, path + ": missing layout or draws");
    return std::nullopt;
  }

  PosteriorDraws out;
  const auto& layout = (*j)["layout"];
  out.coord_names = layout.value("coord_names", std::vector<std::string>());
  out.num_observations = layout.value("num_observations", 0);

  const auto& dr = (*j)["draws"];
  const auto& en = j->value("energy", ordered_json::array());
  const auto& dv = j->value("divergent", ordered_json::array());
  const auto& ll = j->value("pointwise_loglik", ordered_json::array());
  const auto& ss = j->value("step_size", ordered_json::array());
  for (std::size_t c = 0; c < dr.size(); ++c) {
    ChainDraws chain;
    for (const auto& row : dr[c]) chain.draws.push_back(num_vector(row));
    if (c < en.size()) chain.energy = num_vector(en[c]);
    if (c < dv.size()) {
      for (const auto& x : dv[c]) chain.divergent.push_back(x.get<int>() ? 1 : 0);
    }
    if (c < ll.size()) {
      for (const auto& row : ll[c]) chain.pointwise_loglik.push_back(num_vector(row));
    }
    if (c < ss.size()) chain.step_size = ss[c].get<double>();
    out.chains.push_back(std::move(chain));
  }
  return out;
}

bool save_run_records(const std::vector<RunRecord>& records, const std::string& path,
                      LoadError* err) {
  std::ostringstream out;
  for (const RunRecord& rec : records) out << record_to_json(rec).dump() << "\n";
  return write_text(path, out.str(), err);
}

std::optional<std::vector<RunRecord>> load_run_records(const std::string& path,
                                                       LoadError* err) {
  std::ifstream in(path);
  if (!in) {
    set_error(err, "cannot open " + path);
    return std::nullopt;
  }
  std::vector<RunRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      set_error(err, path + ":" + std::to_string(line_no) + ": invalid JSON");
      return std::nullopt;
    }
    records.push_back(record_from_json(j));
  }
  return records;
}

std::string current_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace ppsynth
