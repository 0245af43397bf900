#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qfa/panel.hpp"

namespace qfa {

// Smoothed check loss (tau - 1/2) u + sqrt(u^2 + eps^2) / 2, i.e. rho_tau(u)
// with |u| replaced by sqrt(u^2 + eps^2). Strictly convex and smooth.
double smoothed_check_loss(double u, double tau, double eps);

struct QregOptions {
  double eps = 1e-6;
  int max_iters = 500;
  double tol = 1e-10;  // relative loss-change stopping rule
};

// Quantile regression of y on X by iteratively reweighted least squares on
// the smoothed check loss, annealing the smoothing down to opts.eps from a
// least-squares start. The reweighting step is a majorize-minimize update,
// so the smoothed loss decreases every iteration. When `start` is given the
// final-stage descent begins there and the returned coefficients never have
// higher smoothed loss than the start.
Eigen::VectorXd qreg_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         double tau, const QregOptions& opts = {},
                         const Eigen::VectorXd* start = nullptr);

struct CdgFit {
  Eigen::MatrixXd factors;   // T x r, normalized so factors'factors / T = I
  Eigen::MatrixXd loadings;  // n x r
  double final_loss = 0.0;   // unsmoothed total check loss
  int iters = 0;
  bool converged = false;
  std::vector<double> loss_trace;  // smoothed total loss per outer iteration
};

// Loss-based quantile factor estimator: PCA start, then alternate quantile
// regressions of each series on the factors and of each cross-section on the
// loadings, renormalizing after every outer iteration.
CdgFit cdg_fit(const Panel& panel, int r, double tau, int max_outer = 100,
               double tol = 1e-9);

}  // namespace qfa
