#pragma once

#include <string>
#include <vector>

#include "qfa/panel.hpp"

namespace qfa {

struct SelectionCandidate {
  int r = 0;
  double elbo = 0.0;  // converged ELBO (last trace entry)
  bool converged = false;
  int iters = 0;
  bool failed = false;
  std::string error;
  std::vector<double> elbo_trace;
};

struct SelectionReport {
  double tau = 0.5;
  std::vector<SelectionCandidate> candidates;  // in candidate order
  int chosen_r = 0;  // argmax ELBO among non-failed, ties toward smaller r
};

// Fits each candidate factor count independently (fresh PCA initialization,
// no warm starts) and picks the one with the highest converged ELBO. Failed
// candidates are excluded and flagged; throws if every candidate fails.
SelectionReport select_r(const Panel& panel, const EstimatorConfig& config,
                         const QuantileSpec& tau,
                         const std::vector<int>& r_candidates);

}  // namespace qfa
