#include "qfa/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace qfa {

std::string format_g12(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value,
                           std::chars_format::general, 12);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  if (begin == end)
    throw InputError("missing value at row " + std::to_string(row) +
                     ", column " + std::to_string(col));
  double value = 0.0;
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw InputError("cannot parse numeric cell '" + cell + "' at row " +
                     std::to_string(row) + ", column " + std::to_string(col));
  if (!std::isfinite(value))
    throw InputError("non-finite value at row " + std::to_string(row) +
                     ", column " + std::to_string(col));
  return value;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  return os;
}

}  // namespace

Panel read_panel_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open panel file '" + path + "'");

  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.size() < 2)
    throw InputError("panel file '" + path + "' needs a header and data rows");

  const auto& header = rows.front();
  if (header.size() < 3)
    throw InputError("panel file '" + path +
                     "' needs a time column and at least 2 series");
  std::vector<std::string> series_labels(header.begin() + 1, header.end());

  const std::size_t n = series_labels.size();
  const std::size_t T = rows.size() - 1;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(T),
                         static_cast<Eigen::Index>(n));
  std::vector<std::string> time_labels(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& row = rows[t + 1];
    if (row.size() != n + 1)
      throw InputError("row " + std::to_string(t + 2) + " has " +
                       std::to_string(row.size()) + " fields, expected " +
                       std::to_string(n + 1));
    time_labels[t] = row[0];
    for (std::size_t i = 0; i < n; ++i)
      values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          parse_cell(row[i + 1], t + 2, i + 2);
  }
  return Panel(std::move(values), std::move(time_labels),
               std::move(series_labels));
}

void write_panel_csv(const Panel& panel, const std::string& path) {
  auto os = open_for_write(path);
  os << "time";
  for (const auto& label : panel.series_labels) os << ',' << label;
  os << '\n';
  for (Eigen::Index t = 0; t < panel.rows(); ++t) {
    os << panel.time_labels[static_cast<std::size_t>(t)];
    for (Eigen::Index i = 0; i < panel.cols(); ++i)
      os << ',' << format_g12(panel.values(t, i));
    os << '\n';
  }
}

void write_factors_csv(const Eigen::MatrixXd& factors,
                       const std::vector<std::string>& time_labels,
                       const std::string& path) {
  auto os = open_for_write(path);
  os << "time";
  for (Eigen::Index j = 0; j < factors.cols(); ++j) os << ",f" << (j + 1);
  os << '\n';
  for (Eigen::Index t = 0; t < factors.rows(); ++t) {
    os << time_labels[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < factors.cols(); ++j)
      os << ',' << format_g12(factors(t, j));
    os << '\n';
  }
}

void write_loadings_csv(const Eigen::MatrixXd& loadings,
                        const std::vector<std::string>& series_labels,
                        const std::string& path) {
  auto os = open_for_write(path);
  os << "series";
  for (Eigen::Index j = 0; j < loadings.cols(); ++j) os << ",f" << (j + 1);
  os << '\n';
  for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
    os << series_labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < loadings.cols(); ++j)
      os << ',' << format_g12(loadings(i, j));
    os << '\n';
  }
}

nlohmann::ordered_json report_to_json(const RunReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["tool"] = {{"name", kToolName}, {"version", report.version}};
  j["command"] = report.command;
  j["master_seed"] = report.master_seed;
  j["config"] = report.config_echo;
  j["fits"] = nlohmann::ordered_json::array();
  for (const auto& fit : report.fits) {
    nlohmann::ordered_json f;
    f["tau"] = fit.tau;
    f["converged"] = fit.converged;
    f["iterations"] = fit.iterations;
    f["elbo"] = fit.elbo;
    f["elbo_trace"] = fit.elbo_trace;
    if (!fit.notes.empty()) f["notes"] = fit.notes;
    j["fits"].push_back(std::move(f));
  }
  j["selection"] = nlohmann::ordered_json::array();
  for (const auto& sel : report.selections) {
    nlohmann::ordered_json s;
    s["tau"] = sel.tau;
    s["chosen_r"] = sel.chosen_r;
    s["candidates"] = nlohmann::ordered_json::array();
    for (const auto& cand : sel.candidates) {
      nlohmann::ordered_json c;
      c["r"] = cand.r;
      c["failed"] = cand.failed;
      if (cand.failed) {
        c["error"] = cand.error;
      } else {
        c["elbo"] = cand.elbo;
        c["converged"] = cand.converged;
        c["iterations"] = cand.iters;
      }
      s["candidates"].push_back(std::move(c));
    }
    j["selection"].push_back(std::move(s));
  }
  if (report.timings) j["timings"] = *report.timings;
  return j;
}

void write_report_json(const RunReport& report, const std::string& path) {
  auto os = open_for_write(path);
  os << report_to_json(report).dump(2) << '\n';
}

void write_sim_csv(const SimResult& result, std::ostream& os) {
  os << "family,T,n,estimator,tau,rep,seed,trace_r2,failed\n";
  for (const auto& row : result.rows) {
    const auto& cell = result.cells[static_cast<std::size_t>(row.cell)];
    os << family_name(cell.family) << ',' << cell.T << ',' << cell.n << ','
       << estimator_name(row.estimator) << ',' << format_g12(row.tau) << ','
       << row.rep << ',' << row.seed << ','
       << (row.failed ? "" : format_g12(row.r2)) << ','
       << (row.failed ? 1 : 0) << '\n';
  }
}

void write_sim_csv_file(const SimResult& result, const std::string& path) {
  auto os = open_for_write(path);
  write_sim_csv(result, os);
}

nlohmann::ordered_json sim_summary_json(const SimResult& result) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& s : result.summaries) {
    const auto& cell = result.cells[static_cast<std::size_t>(s.cell)];
    nlohmann::ordered_json c;
    c["family"] = family_name(cell.family);
    c["T"] = cell.T;
    c["n"] = cell.n;
    c["r"] = cell.r;
    if (cell.snr_target) c["snr_target"] = *cell.snr_target;
    c["estimator"] = estimator_name(s.estimator);
    c["tau"] = s.tau;
    c["mean_trace_r2"] = s.mean;
    c["std_error"] = s.std_error;
    c["replications_ok"] = s.n_ok;
    c["replications_failed"] = s.n_fail;
    c["flagged"] = s.flagged;
    j["cells"].push_back(std::move(c));
  }
  return j;
}

void write_sim_summary_json(const SimResult& result, const std::string& path) {
  auto os = open_for_write(path);
  os << sim_summary_json(result).dump(2) << '\n';
}

}  // namespace qfa
