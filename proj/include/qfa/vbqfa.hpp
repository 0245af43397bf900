#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qfa/panel.hpp"

namespace qfa {

// Mean-field variational state for one (panel, tau, r) problem. Gaussian
// factors and loadings, gamma loading precisions, inverse-gamma scales, and
// GIG(1/2) mixture weights.
struct VariationalState {
  Eigen::MatrixXd mu_lambda;                  // n x r
  std::vector<Eigen::MatrixXd> sigma_lambda;  // n blocks, r x r, SPD
  Eigen::MatrixXd mu_f;                       // T x r
  std::vector<Eigen::MatrixXd> sigma_f;       // T blocks, r x r, SPD
  Eigen::MatrixXd alpha_shape, alpha_rate;    // n x r
  Eigen::VectorXd sigma_shape, sigma_scale;   // n
  Eigen::MatrixXd z_a, z_b;                   // n x T
  double elbo = -1000.0;

  Eigen::Index n_time() const { return mu_f.rows(); }
  Eigen::Index n_series() const { return mu_lambda.rows(); }
  Eigen::Index n_factors() const { return mu_f.cols(); }
};

// PCA-initialized state: mu_f from pca_factors, zero loading means, 10*I
// covariance blocks, priors for the precision and scale factors, z at (1,1).
VariationalState init_state(const Panel& panel, const EstimatorConfig& config,
                            const QuantileSpec& tau);

// One exact coordinate update each. The loading and factor precisions carry
// the full second moments of the other Gaussian block, and the z/sigma
// updates use the full residual second moment
// E[(x - lambda'f)^2] = resid^2 + f'Sl f + l'Sf l + tr(Sl Sf), so every
// update maximizes the bound over its own block given the rest.
void update_factors(VariationalState& state, const Panel& panel,
                    const QuantileSpec& tau);
void update_loadings(VariationalState& state, const Panel& panel,
                     const QuantileSpec& tau);
void update_alpha(VariationalState& state, const EstimatorConfig& config);
void update_z(VariationalState& state, const Panel& panel,
              const QuantileSpec& tau);
void update_sigma(VariationalState& state, const Panel& panel,
                  const QuantileSpec& tau, const EstimatorConfig& config);

// Evidence lower bound of the mixture-representation model under the current
// state: expected conditionally-Gaussian log likelihood plus expected log
// priors minus the variational entropies, every constant included so values
// are comparable across factor counts.
double compute_elbo(const VariationalState& state, const Panel& panel,
                    const QuantileSpec& tau, const EstimatorConfig& config);

// Full CAVI run: sweeps loadings, alpha, z, sigma, factors until the ELBO
// change falls below config.tolerance or max_iters is hit. The loading
// update runs first so the first sweep regresses on the PCA factors.
QfaFit fit(const Panel& panel, const EstimatorConfig& config,
           const QuantileSpec& tau);

struct MultiQuantileFit {
  std::map<double, QfaFit> fits;  // keyed by tau
  std::vector<std::pair<double, std::string>> failures;
};

// Independent fits per quantile level; per-level failures are collected
// instead of aborting the remaining levels.
MultiQuantileFit fit_all_quantiles(const Panel& panel,
                                   const EstimatorConfig& config);

// Rebuilds the variational state stored in a fit, e.g. to recompute its ELBO.
VariationalState state_from_fit(const QfaFit& fit);

}  // namespace qfa
