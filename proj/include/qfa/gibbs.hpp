#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qfa/panel.hpp"
#include "qfa/rng.hpp"

namespace qfa {

struct GibbsConfig {
  int n_draws = 5000;
  int burn_in = 1000;
  int thin = 2;
  std::uint64_t seed = 0;

  void validate() const;  // n_draws > burn_in >= 0, thin >= 1
};

// Diagnostic switches: a disabled block keeps its current value through the
// whole chain. Used by conjugacy sanity checks.
struct GibbsBlocks {
  bool factors = true;
  bool loadings = true;
  bool alpha = true;
  bool z = true;
  bool sigma = true;
};

struct GibbsDraws {
  std::vector<Eigen::MatrixXd> factor_draws;   // each T x r
  std::vector<Eigen::MatrixXd> loading_draws;  // each n x r
  std::vector<Eigen::VectorXd> sigma_draws;    // each n
  std::vector<Eigen::MatrixXd> z_draws;        // each n x T
  std::vector<Eigen::MatrixXd> alpha_draws;    // each n x r

  Eigen::MatrixXd mean_factors() const;
  Eigen::MatrixXd mean_loadings() const;
};

// Draw from GIG(1/2, a, b) via the reciprocal of an inverse-Gaussian variate:
// 1/z ~ IG(mean sqrt(a/b), shape a).
double sample_gig_half(double a, double b, Rng& rng);

// Gibbs sampler for the mixture-representation model with the same priors as
// the variational engine. Full conditionals are the engine's update formulas
// with variational expectations replaced by the current draws; the model is
// conditionally conjugate throughout. Draws are kept at offsets
// burn_in + k * thin.
GibbsDraws gibbs_fit(const Panel& panel, const EstimatorConfig& config,
                     const QuantileSpec& tau, const GibbsConfig& gibbs,
                     const GibbsBlocks& blocks = {});

}  // namespace qfa
