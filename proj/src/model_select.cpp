#include "qfa/model_select.hpp"

#include "qfa/vbqfa.hpp"

namespace qfa {

SelectionReport select_r(const Panel& panel, const EstimatorConfig& config,
                         const QuantileSpec& tau,
                         const std::vector<int>& r_candidates) {
  if (r_candidates.empty())
    throw ConfigError("select_r: candidate list must not be empty");
  for (int r : r_candidates)
    if (r < 1 || r >= panel.cols())
      throw ConfigError("select_r: every candidate must satisfy 1 <= r < n, got r=" +
                        std::to_string(r));

  SelectionReport report;
  report.tau = tau.tau;
  for (int r : r_candidates) {
    SelectionCandidate cand;
    cand.r = r;
    EstimatorConfig cfg = config;
    cfg.n_factors = r;
    try {
      QfaFit f = fit(panel, cfg, tau);
      cand.elbo = f.elbo_trace.back();
      cand.converged = f.converged;
      cand.iters = f.iters_used;
      cand.elbo_trace = f.elbo_trace;
    } catch (const std::exception& e) {
      cand.failed = true;
      cand.error = e.what();
    }
    report.candidates.push_back(std::move(cand));
  }

  bool any = false;
  double best = 0.0;
  for (const auto& cand : report.candidates) {
    if (cand.failed) continue;
    if (!any || cand.elbo > best) {
      any = true;
      best = cand.elbo;
      report.chosen_r = cand.r;
    }
  }
  if (!any)
    throw NumericalError("select_r: every candidate fit failed");
  return report;
}

}  // namespace qfa
