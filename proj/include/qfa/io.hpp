#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qfa/model_select.hpp"
#include "qfa/panel.hpp"
#include "qfa/sim.hpp"

namespace qfa {

inline constexpr const char* kToolName = "qfa";
inline constexpr const char* kToolVersion = "0.1.0";

// Shortest-of-12-significant-digits formatting (printf %.12g), independent of
// the process locale. All CSV output goes through this.
std::string format_g12(double value);

// CSV layout: header row whose first cell names the time column and whose
// remaining cells are series labels; each data row is a time label followed
// by numeric values. Parse failures name the 1-based file row and column.
// Missing or non-numeric cells are hard errors.
Panel read_panel_csv(const std::string& path);
void write_panel_csv(const Panel& panel, const std::string& path);

void write_factors_csv(const Eigen::MatrixXd& factors,
                       const std::vector<std::string>& time_labels,
                       const std::string& path);
void write_loadings_csv(const Eigen::MatrixXd& loadings,
                        const std::vector<std::string>& series_labels,
                        const std::string& path);

struct FitSummary {
  double tau = 0.5;
  bool converged = false;
  int iterations = 0;
  double elbo = 0.0;
  std::vector<double> elbo_trace;
  std::vector<std::string> notes;  // e.g. quantile ignored by PCA
};

// Everything needed to reproduce a CLI run plus per-quantile outcomes.
// Wall-clock timings are opt-in so identical runs produce identical bytes.
struct RunReport {
  std::string command;
  std::string version = kToolVersion;
  nlohmann::ordered_json config_echo;
  std::uint64_t master_seed = 0;
  std::vector<FitSummary> fits;
  std::vector<SelectionReport> selections;
  std::optional<nlohmann::ordered_json> timings;
};

nlohmann::ordered_json report_to_json(const RunReport& report);
void write_report_json(const RunReport& report, const std::string& path);

// One row per (cell, estimator, tau, replication).
void write_sim_csv(const SimResult& result, std::ostream& os);
void write_sim_csv_file(const SimResult& result, const std::string& path);
nlohmann::ordered_json sim_summary_json(const SimResult& result);
void write_sim_summary_json(const SimResult& result, const std::string& path);

}  // namespace qfa
