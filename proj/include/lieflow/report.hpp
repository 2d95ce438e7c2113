#pragma once

#include <map>
#include <string>
#include <vector>

#include "lieflow/fields.hpp"

namespace lieflow {

/// One verification record. pass is recomputable: value <= tolerance for
/// op "le", value >= tolerance for op "ge".
struct CheckRecord {
  std::string name;
  int criterion = 0;  // acceptance criterion number, 0 for diagnostics
  double t = 0.0;
  double value = 0.0;
  double tolerance = 0.0;
  std::string op = "le";
  bool pass = true;
};

CheckRecord make_check(const std::string& name, int criterion, double t, double value,
                       double tolerance, const std::string& op);

/// Row of the ensemble dump (series.csv).
struct EnsembleRow {
  uint64_t path_index = 0;
  int point_index = 0;
  double t = 0.0;
  Vec x;
  Mat jacobian;
  double logdet = 0.0;
};

struct RunReport {
  std::string run_id;
  std::string experiment;
  std::map<std::string, std::string> config_echo;
  std::vector<CheckRecord> checks;
  std::map<std::string, double> slopes;
  std::map<std::string, double> max_residuals;
  std::map<std::string, double> diagnostics;
  std::vector<EnsembleRow> series;
  int series_dim = 0;
  double wall_seconds = 0.0;  // console only; never written to files

  bool all_pass() const;
};

/// Writers; all output is a pure function of the report content (no
/// timestamps), so regeneration is byte-identical.
void write_checks_csv(const std::string& path, const RunReport& report);
void write_series_csv(const std::string& path, const RunReport& report);
void write_summary_json(const std::string& path, const RunReport& report);
void write_all(const std::string& out_dir, const RunReport& report);

std::string format_double(double v);

}  // namespace lieflow
