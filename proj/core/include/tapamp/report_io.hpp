#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tapamp/ensemble.hpp"

namespace tapamp {

inline constexpr const char* kSchemaVersion = "1.0";

// Streaming JSON emitter with a pinned number format: 17 significant digits
// (round-trip exact for doubles), LF line endings, fixed key order. Replays
// of the same report are byte-identical.
class JsonWriter {
 public:
  JsonWriter& begin_object();
  JsonWriter& end_object();
  JsonWriter& begin_array();
  JsonWriter& end_array();
  JsonWriter& key(const std::string& name);
  JsonWriter& value(double v);
  JsonWriter& value(int v);
  JsonWriter& value(long v);
  JsonWriter& value(std::uint64_t v);
  JsonWriter& value(bool v);
  JsonWriter& value(const std::string& v);
  JsonWriter& value(const char* v);

  const std::string& str() const { return out_; }

 private:
  void pre_value();
  std::string out_;
  std::vector<bool> needs_comma_;
  bool after_key_ = false;
};

std::string format_double_json(double v);  // %.17g
std::string format_double_csv(double v);   // %.10g

// CSV dialect: comma-separated, header row, LF endings, UTF-8.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  const std::string& str() const { return out_; }

 private:
  std::size_t columns_;
  std::string out_;
};

std::string serialize_report(const EnsembleReport& report);

// report.json, q_mc.csv, pseudo_conv.csv, clt_stats.csv (when present),
// error_scaling.csv (when present) under dir. Existing files are refused
// unless force is set.
void write_report_files(const EnsembleReport& report, const std::string& dir, bool force);

void write_text_file(const std::string& path, const std::string& content, bool force);

// --- config parsing (JSON) ---

EnsembleConfig parse_ensemble_config(const std::string& json_text);

struct PhaseConfig {
  std::vector<double> betas;
  std::vector<double> hs;
  int quadrature_order = kDefaultQuadratureOrder;
  double tol = kDefaultFixedPointTol;
};
PhaseConfig parse_phase_config(const std::string& json_text);
std::string phase_csv(const PhaseConfig& cfg);

struct ScalingConfig {
  EnsembleConfig ensemble;
  std::vector<ScalingQuantity> quantities;
};
ScalingConfig parse_scaling_config(const std::string& json_text);

std::string serialize_scaling(const std::vector<SlopeFit>& fits, const EnsembleConfig& cfg);
std::string scaling_csv(const std::vector<SlopeFit>& fits);

// Apply "dotted.path=value" overrides to a config JSON text. A leading
// "params." prefix addresses the top-level model parameters (params.beta,
// params.h).
std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides);

}  // namespace tapamp
