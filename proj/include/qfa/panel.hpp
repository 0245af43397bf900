#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "qfa/errors.hpp"

namespace qfa {

// T x n data panel: rows are time periods, columns are observed series.
// Construction validates shape, label counts, and rejects non-finite entries.
struct Panel {
  Eigen::MatrixXd values;
  std::vector<std::string> time_labels;
  std::vector<std::string> series_labels;

  Panel(Eigen::MatrixXd values_in, std::vector<std::string> time_labels_in,
        std::vector<std::string> series_labels_in);

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Panel with generated labels t1..tT / s1..sn.
Panel make_panel(Eigen::MatrixXd values);

// Quantile level with the constants of the location-scale normal mixture:
//   u = kappa1 * z + kappa2 * sqrt(sigma z) * v,  z ~ Exp(sigma), v ~ N(0,1).
struct QuantileSpec {
  double tau;
  double kappa1;  // (1 - 2 tau) / (tau (1 - tau))
  double kappa2;  // sqrt(2 / (tau (1 - tau)))
};

QuantileSpec make_quantile_spec(double tau);

// Check loss rho_tau(u) = u * (tau - 1{u <= 0}).
double check_loss(double u, double tau);

struct EstimatorConfig {
  int n_factors = 3;
  std::vector<QuantileSpec> quantiles;
  double tolerance = 1e-6;
  int max_iters = 300;
  double a0 = 1e-4;  // loading-precision prior shape
  double b0 = 1e-4;  // loading-precision prior rate
  double r0 = 0.01;  // scale prior shape
  double s0 = 0.01;  // scale prior scale
  std::uint64_t seed = 0;

  // Throws ConfigError unless 1 <= n_factors < n_series, every tau lies in
  // (0,1), tolerance > 0, max_iters >= 1, and all prior hyperparameters > 0.
  void validate(Eigen::Index n_series) const;
};

// Converged variational fit for one (panel, tau, r) problem. Together the
// fields determine the full variational posterior, so the ELBO can be
// recomputed from a stored fit.
struct QfaFit {
  double tau = 0.5;
  Eigen::MatrixXd factor_mean;               // T x r
  std::vector<Eigen::MatrixXd> factor_cov;   // T blocks, r x r, SPD
  Eigen::MatrixXd loading_mean;              // n x r
  std::vector<Eigen::MatrixXd> loading_cov;  // n blocks, r x r, SPD
  std::vector<double> elbo_trace;            // one entry per sweep
  bool converged = false;
  int iters_used = 0;
  Eigen::VectorXd sigma_shape, sigma_scale;  // n, inverse-gamma posteriors
  Eigen::MatrixXd alpha_shape, alpha_rate;   // n x r, gamma posteriors
  Eigen::MatrixXd z_a, z_b;                  // n x T, GIG(1/2, a, b) posteriors
};

}  // namespace qfa
