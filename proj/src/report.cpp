#include "lieflow/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace lieflow {

CheckRecord make_check(const std::string& name, int criterion, double t, double value,
                       double tolerance, const std::string& op) {
  CheckRecord c;
  c.name = name;
  c.criterion = criterion;
  c.t = t;
  c.value = value;
  c.tolerance = tolerance;
  c.op = op;
  c.pass = (op == "le") ? (value <= tolerance) : (value >= tolerance);
  return c;
}

bool RunReport::all_pass() const {
  for (const CheckRecord& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_checks_csv(const std::string& path, const RunReport& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "run_id,check_name,t,value,tolerance,pass\n";
  for (const CheckRecord& c : report.checks)
    os << report.run_id << ',' << c.name << ',' << format_double(c.t) << ','
       << format_double(c.value) << ',' << format_double(c.tolerance) << ','
       << (c.pass ? 1 : 0) << '\n';
}

void write_series_csv(const std::string& path, const RunReport& report) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  const int n = report.series_dim;
  os << "run_id,path_index,point_index,t";
  for (int i = 1; i <= n; ++i) os << ",x_" << i;
  for (int r = 1; r <= n; ++r)
    for (int c = 1; c <= n; ++c) os << ",J_" << r << c;
  os << ",logdet\n";
  for (const EnsembleRow& row : report.series) {
    os << report.run_id << ',' << row.path_index << ',' << row.point_index << ','
       << format_double(row.t);
    for (int i = 0; i < n; ++i) os << ',' << format_double(row.x[i]);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) os << ',' << format_double(row.jacobian(r, c));
    os << ',' << format_double(row.logdet) << '\n';
  }
}

void write_summary_json(const std::string& path, const RunReport& report) {
  nlohmann::json j;
  j["run_id"] = report.run_id;
  j["experiment"] = report.experiment;
  j["config"] = report.config_echo;
  j["all_pass"] = report.all_pass();
  nlohmann::json checks = nlohmann::json::array();
  for (const CheckRecord& c : report.checks) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["criterion"] = c.criterion;
    cj["t"] = c.t;
    cj["value"] = c.value;
    cj["tolerance"] = c.tolerance;
    cj["op"] = c.op;
    cj["pass"] = c.pass;
    checks.push_back(cj);
  }
  j["checks"] = checks;
  j["refinement_slopes"] = report.slopes;
  j["max_residuals"] = report.max_residuals;
  j["diagnostics"] = report.diagnostics;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << "\n";
}

void write_all(const std::string& out_dir, const RunReport& report) {
  std::filesystem::create_directories(out_dir);
  write_checks_csv(out_dir + "/checks.csv", report);
  write_series_csv(out_dir + "/series.csv", report);
  write_summary_json(out_dir + "/summary.json", report);
}

}  // namespace lieflow
