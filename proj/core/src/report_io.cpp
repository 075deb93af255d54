#include "tapamp/report_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "tapamp/errors.hpp"

namespace tapamp {

namespace {
using nlohmann::json;
}

// --- JsonWriter ---

void JsonWriter::pre_value() {
  if (after_key_) {
    after_key_ = false;
    return;
  }
  if (!needs_comma_.empty()) {
    if (needs_comma_.back()) out_ += ',';
    needs_comma_.back() = true;
  }
}

JsonWriter& JsonWriter::begin_object() {
  pre_value();
  out_ += '{';
  needs_comma_.push_back(false);
  return *this;
}

JsonWriter& JsonWriter::end_object() {
  needs_comma_.pop_back();
  out_ += '}';
  return *this;
}

JsonWriter& JsonWriter::begin_array() {
  pre_value();
  out_ += '[';
  needs_comma_.push_back(false);
  return *this;
}

JsonWriter& JsonWriter::end_array() {
  needs_comma_.pop_back();
  out_ += ']';
  return *this;
}

JsonWriter& JsonWriter::key(const std::string& name) {
  if (needs_comma_.back()) out_ += ',';
  needs_comma_.back() = true;
  out_ += '"';
  out_ += name;
  out_ += "\":";
  after_key_ = true;
  return *this;
}

std::string format_double_json(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_double_csv(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

JsonWriter& JsonWriter::value(double v) {
  pre_value();
  out_ += format_double_json(v);
  return *this;
}

JsonWriter& JsonWriter::value(int v) {
  pre_value();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(long v) {
  pre_value();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
  pre_value();
  out_ += std::to_string(v);
  return *this;
}

JsonWriter& JsonWriter::value(bool v) {
  pre_value();
  out_ += v ? "true" : "false";
  return *this;
}

JsonWriter& JsonWriter::value(const std::string& v) {
  pre_value();
  out_ += '"';
  for (char c : v) {
    if (c == '"' || c == '\\') out_ += '\\';
    out_ += c;
  }
  out_ += '"';
  return *this;
}

JsonWriter& JsonWriter::value(const char* v) { return value(std::string(v)); }

// --- CsvWriter ---

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out_ += ',';
    out_ += header[i];
  }
  out_ += '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw std::logic_error("CsvWriter: row width does not match the header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ += ',';
    out_ += cells[i];
  }
  out_ += '\n';
}

// --- config parsing ---

namespace {

void check_schema_version(const json& j) {
  if (!j.contains("schema_version")) return;
  const std::string v = j.at("schema_version").get<std::string>();
  const auto dot = v.find('.');
  if (v.substr(0, dot) != "1")
    throw ConfigError("config: unsupported schema_version major in \"" + v + "\"");
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
}

double require_number(const json& j, const char* field) {
  if (!j.contains(field))
    throw ConfigError(std::string("config: missing required field \"") + field + "\"");
  if (!j.at(field).is_number())
    throw ConfigError(std::string("config: field \"") + field + "\" must be a number");
  return j.at(field).get<double>();
}

int require_int(const json& j, const char* field) {
  const double v = require_number(j, field);
  return static_cast<int>(v);
}

}  // namespace

EnsembleConfig parse_ensemble_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  check_schema_version(j);

  EnsembleConfig cfg;
  cfg.params.beta = require_number(j, "beta");
  cfg.params.h = require_number(j, "h");
  if (j.contains("n_list")) {
    cfg.n_list = j.at("n_list").get<std::vector<int>>();
  } else if (j.contains("n")) {
    cfg.n_list = {require_int(j, "n")};
  } else {
    throw ConfigError("config: missing required field \"n\" (or \"n_list\")");
  }
  cfg.k_max = require_int(j, "k");
  cfg.replicas = require_int(j, "replicas");
  if (j.contains("seed")) cfg.base_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("choice"))
    cfg.choice = onsager_choice_from_string(j.at("choice").get<std::string>());
  if (j.contains("init")) {
    const json& init = j.at("init");
    if (init.is_number()) {
      cfg.init.constant = init.get<double>();
    } else if (init.is_object() && init.contains("constant")) {
      cfg.init.constant = init.at("constant").get<double>();
    } else if (init.is_object() && init.contains("vector")) {
      const auto vals = init.at("vector").get<std::vector<double>>();
      cfg.init.vector = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                                          static_cast<Eigen::Index>(vals.size()));
    } else {
      throw ConfigError("config: init must be a number, {\"constant\": c} or {\"vector\": [..]}");
    }
  }
  if (j.contains("track_derivatives")) cfg.track_derivatives = j.at("track_derivatives").get<bool>();
  if (j.contains("error_iterate")) cfg.error_iterate = j.at("error_iterate").get<int>();
  if (j.contains("track_fields")) {
    for (const auto& pair : j.at("track_fields")) {
      if (!pair.is_array() || pair.size() != 2)
        throw ConfigError("config: track_fields entries must be [site, iterate] pairs");
      cfg.track_fields.emplace_back(pair[0].get<int>(), pair[1].get<int>());
    }
  }
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("quadrature_order")) cfg.quadrature_order = j.at("quadrature_order").get<int>();
  return cfg;
}

namespace {

std::vector<double> parse_grid_axis(const json& j, const char* field) {
  if (!j.contains(field))
    throw ConfigError(std::string("config: missing required field \"") + field + "\"");
  const json& a = j.at(field);
  if (a.is_number()) return {a.get<double>()};
  if (a.is_array()) return a.get<std::vector<double>>();
  if (a.is_object()) {
    const double lo = require_number(a, "min");
    const double hi = require_number(a, "max");
    const int count = require_int(a, "count");
    if (count < 1) throw ConfigError("config: grid count must be >= 1");
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i)
      out[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1.0);
    return out;
  }
  throw ConfigError(std::string("config: field \"") + field +
                    "\" must be a number, array, or {min,max,count}");
}

}  // namespace

PhaseConfig parse_phase_config(const std::string& json_text) {
  const json j = parse_json(json_text);
  check_schema_version(j);
  PhaseConfig cfg;
  cfg.betas = parse_grid_axis(j, "beta");
  cfg.hs = parse_grid_axis(j, "h");
  if (cfg.betas.empty() || cfg.hs.empty()) throw ConfigError("config: empty phase grid");
  if (j.contains("quadrature_order")) cfg.quadrature_order = j.at("quadrature_order").get<int>();
  if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
  return cfg;
}

std::string phase_csv(const PhaseConfig& cfg) {
  const QuadratureRule rule = gauss_hermite(cfg.quadrature_order);
  CsvWriter csv({"beta", "h", "q", "q_tilde", "at_residual", "chi_q"});
  for (double beta : cfg.betas) {
    for (double h : cfg.hs) {
      const LimitSolution sol = solve_limit({beta, h}, rule, cfg.tol);
      csv.row({format_double_csv(beta), format_double_csv(h), format_double_csv(sol.q),
               format_double_csv(sol.q_tilde), format_double_csv(sol.at_residual),
               format_double_csv(sol.chi_q)});
    }
  }
  return csv.str();
}

ScalingConfig parse_scaling_config(const std::string& json_text) {
  ScalingConfig cfg;
  cfg.ensemble = parse_ensemble_config(json_text);
  cfg.ensemble.track_derivatives = true;
  const json j = parse_json(json_text);
  if (j.contains("quantity")) {
    const std::string q = j.at("quantity").get<std::string>();
    if (q == "epsilon") cfg.quantities = {ScalingQuantity::Epsilon};
    else if (q == "delta") cfg.quantities = {ScalingQuantity::Delta};
    else if (q == "choice_gap") cfg.quantities = {ScalingQuantity::ChoiceGap};
    else if (q == "all")
      cfg.quantities = {ScalingQuantity::Epsilon, ScalingQuantity::Delta,
                        ScalingQuantity::ChoiceGap};
    else
      throw ConfigError("config: unknown scaling quantity \"" + q + "\"");
  } else {
    cfg.quantities = {ScalingQuantity::Epsilon, ScalingQuantity::Delta};
  }
  return cfg;
}

// --- serialization ---

namespace {

// The thread count is deliberately not echoed: replays with different
// --threads must produce byte-identical files.
void write_config(JsonWriter& w, const EnsembleConfig& cfg) {
  w.key("config").begin_object();
  w.key("beta").value(cfg.params.beta);
  w.key("h").value(cfg.params.h);
  w.key("n_list").begin_array();
  for (int n : cfg.n_list) w.value(n);
  w.end_array();
  w.key("k").value(cfg.k_max);
  w.key("replicas").value(cfg.replicas);
  w.key("seed").value(cfg.base_seed);
  w.key("choice").value(to_string(cfg.choice));
  w.key("init").begin_object();
  if (cfg.init.vector) {
    w.key("vector").begin_array();
    for (Eigen::Index i = 0; i < cfg.init.vector->size(); ++i) w.value((*cfg.init.vector)[i]);
    w.end_array();
  } else if (cfg.init.constant) {
    w.key("constant").value(*cfg.init.constant);
  } else {
    w.key("default").value(true);
  }
  w.end_object();
  w.key("track_derivatives").value(cfg.track_derivatives);
  w.key("error_iterate").value(cfg.error_iterate);
  w.key("track_fields").begin_array();
  for (const auto& [site, it] : cfg.track_fields) {
    w.begin_array();
    w.value(site);
    w.value(it);
    w.end_array();
  }
  w.end_array();
  w.key("quadrature_order").value(cfg.quadrature_order);
  w.end_object();
}

void write_clt_rows(JsonWriter& w, const std::vector<CltRow>& rows) {
  w.begin_array();
  for (const auto& r : rows) {
    w.begin_object();
    w.key("kind").value(r.kind);
    w.key("k").value(r.k);
    w.key("kp").value(r.kp);
    w.key("observed").value(r.observed);
    w.key("expected").value(r.expected);
    w.key("se").value(r.se);
    w.key("skewness").value(r.skewness);
    w.key("excess_kurtosis").value(r.excess_kurtosis);
    w.key("samples").value(r.samples);
    w.end_object();
  }
  w.end_array();
}

}  // namespace

std::string serialize_report(const EnsembleReport& report) {
  JsonWriter w;
  w.begin_object();
  w.key("schema_version").value(kSchemaVersion);
  write_config(w, report.config);

  w.key("q_det").begin_object();
  w.key("q1").value(report.q_det.q1);
  w.key("m_bar").value(report.q_det.m_bar);
  w.key("k_max").value(report.q_det.k_max);
  w.key("table").begin_array();
  for (int a = 1; a <= report.q_det.k_max; ++a) {
    w.begin_array();
    for (int b = 1; b <= report.q_det.k_max; ++b) w.value(report.q_det.at(a, b));
    w.end_array();
  }
  w.end_array();
  w.end_object();

  w.key("results").begin_array();
  for (const auto& sz : report.per_n) {
    w.begin_object();
    w.key("n").value(sz.n);
    w.key("q_mc_mean").begin_array();
    for (int a = 0; a < sz.q_mc.k_max; ++a) {
      w.begin_array();
      for (int b = 0; b < sz.q_mc.k_max; ++b) w.value(sz.q_mc.mean(a, b));
      w.end_array();
    }
    w.end_array();
    w.key("q_mc_se").begin_array();
    for (int a = 0; a < sz.q_mc.k_max; ++a) {
      w.begin_array();
      for (int b = 0; b < sz.q_mc.k_max; ++b) w.value(sz.q_mc.se(a, b));
      w.end_array();
    }
    w.end_array();
    w.key("pseudo_conv").begin_array();
    for (double v : sz.pseudo_conv) w.value(v);
    w.end_array();
    w.key("field_samples").begin_array();
    for (const auto& [site, iterate] : report.config.track_fields) {
      if (site > sz.n) continue;
      const auto it = std::find(sz.tracked_iterates.begin(), sz.tracked_iterates.end(), iterate);
      if (it == sz.tracked_iterates.end()) continue;
      const Eigen::MatrixXd& y = sz.y_samples[static_cast<std::size_t>(it - sz.tracked_iterates.begin())];
      w.begin_object();
      w.key("site").value(site);
      w.key("iterate").value(iterate);
      w.key("values").begin_array();
      for (Eigen::Index r = 0; r < y.rows(); ++r) w.value(y(r, site - 1));
      w.end_array();
      w.end_object();
    }
    w.end_array();
    if (sz.errors_evaluated) {
      w.key("error_scaling").begin_object();
      w.key("mean_eps_sq").value(sz.mean_eps_sq);
      w.key("se_eps_sq").value(sz.se_eps_sq);
      w.key("mean_delta_sq").value(sz.mean_delta_sq);
      w.key("se_delta_sq").value(sz.se_delta_sq);
      w.end_object();
    }
    w.end_object();
  }
  w.end_array();

  w.key("clt");
  write_clt_rows(w, report.clt);
  w.end_object();
  std::string out = w.str();
  out += '\n';
  return out;
}

void write_text_file(const std::string& path, const std::string& content, bool force) {
  namespace fs = std::filesystem;
  if (!force && fs::exists(path))
    throw ConfigError("refusing to overwrite existing file " + path + " (use --force)");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw std::runtime_error("write failed for " + path);
}

void write_report_files(const EnsembleReport& report, const std::string& dir, bool force) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);

  write_text_file((base / "report.json").string(), serialize_report(report), force);

  {
    CsvWriter csv({"n", "k", "kp", "q_mc_mean", "q_mc_se", "q_det"});
    for (const auto& sz : report.per_n)
      for (int a = 1; a <= sz.q_mc.k_max; ++a)
        for (int b = 1; b <= sz.q_mc.k_max; ++b)
          csv.row({std::to_string(sz.n), std::to_string(a), std::to_string(b),
                   format_double_csv(sz.q_mc.mean(a - 1, b - 1)),
                   format_double_csv(sz.q_mc.se(a - 1, b - 1)),
                   format_double_csv(report.q_det.at(a, b))});
    write_text_file((base / "q_mc.csv").string(), csv.str(), force);
  }
  {
    CsvWriter csv({"n", "k", "pseudo_distance"});
    for (const auto& sz : report.per_n)
      for (std::size_t i = 0; i < sz.pseudo_conv.size(); ++i)
        csv.row({std::to_string(sz.n), std::to_string(static_cast<int>(i) + 2),
                 format_double_csv(sz.pseudo_conv[i])});
    write_text_file((base / "pseudo_conv.csv").string(), csv.str(), force);
  }
  if (!report.clt.empty()) {
    CsvWriter csv({"kind", "k", "kp", "observed", "expected", "se", "skewness",
                   "excess_kurtosis", "samples"});
    for (const auto& r : report.clt)
      csv.row({r.kind, std::to_string(r.k), std::to_string(r.kp),
               format_double_csv(r.observed), format_double_csv(r.expected),
               format_double_csv(r.se), format_double_csv(r.skewness),
               format_double_csv(r.excess_kurtosis), std::to_string(r.samples)});
    write_text_file((base / "clt_stats.csv").string(), csv.str(), force);
  }
  {
    bool any = false;
    for (const auto& sz : report.per_n) any = any || sz.errors_evaluated;
    if (any) {
      CsvWriter csv({"n", "mean_eps_sq", "se_eps_sq", "mean_delta_sq", "se_delta_sq"});
      for (const auto& sz : report.per_n)
        if (sz.errors_evaluated)
          csv.row({std::to_string(sz.n), format_double_csv(sz.mean_eps_sq),
                   format_double_csv(sz.se_eps_sq), format_double_csv(sz.mean_delta_sq),
                   format_double_csv(sz.se_delta_sq)});
      write_text_file((base / "error_scaling.csv").string(), csv.str(), force);
    }
  }
}

std::string serialize_scaling(const std::vector<SlopeFit>& fits, const EnsembleConfig& cfg) {
  JsonWriter w;
  w.begin_object();
  w.key("schema_version").value(kSchemaVersion);
  write_config(w, cfg);
  w.key("fits").begin_array();
  for (const auto& f : fits) {
    w.begin_object();
    w.key("quantity").value(to_string(f.quantity));
    w.key("n").begin_array();
    for (double n : f.n_values) w.value(static_cast<int>(n));
    w.end_array();
    w.key("mean").begin_array();
    for (double m : f.means) w.value(m);
    w.end_array();
    w.key("se").begin_array();
    for (double s : f.ses) w.value(s);
    w.end_array();
    w.key("degenerate").value(f.degenerate);
    if (!f.degenerate) {
      w.key("slope").value(f.slope);
      w.key("half_width").value(f.half_width);
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
  std::string out = w.str();
  out += '\n';
  return out;
}

std::string scaling_csv(const std::vector<SlopeFit>& fits) {
  CsvWriter csv({"quantity", "n", "mean", "se", "slope", "half_width", "degenerate"});
  for (const auto& f : fits) {
    for (std::size_t i = 0; i < f.n_values.size(); ++i)
      csv.row({to_string(f.quantity), format_double_csv(f.n_values[i]),
               format_double_csv(f.means[i]), format_double_csv(f.ses[i]),
               f.degenerate ? "" : format_double_csv(f.slope),
               f.degenerate ? "" : format_double_csv(f.half_width),
               f.degenerate ? "true" : "false"});
  }
  return csv.str();
}

std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides) {
  json j = parse_json(json_text);
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override must look like dotted.path=value: " + ov);
    std::string path = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    // "params.beta" / "params.h" address the top-level model parameters.
    if (path == "params.beta") path = "beta";
    if (path == "params.h") path = "h";

    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // plain string
    }

    json* node = &j;
    std::size_t start = 0;
    for (;;) {
      const auto dot = path.find('.', start);
      const std::string token = path.substr(start, dot - start);
      if (token.empty()) throw ConfigError("override has an empty path segment: " + ov);
      if (dot == std::string::npos) {
        (*node)[token] = value;
        break;
      }
      node = &(*node)[token];
      start = dot + 1;
    }
  }
  return j.dump();
}

}  // namespace tapamp
