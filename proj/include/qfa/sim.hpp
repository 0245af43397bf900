#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qfa/gibbs.hpp"
#include "qfa/panel.hpp"
#include "qfa/rng.hpp"

namespace qfa {

// Idiosyncratic error families of the synthetic designs.
enum class ErrorFamily { M1, M2, M3, M4, M5, M6 };

const char* family_name(ErrorFamily family);
ErrorFamily family_from_name(const std::string& name);

double draw_error(ErrorFamily family, Rng& rng);

// Analytic first two central moments of each family.
double error_family_mean(ErrorFamily family);
double error_family_variance(ErrorFamily family);

struct DgpConfig {
  int T = 100;
  int n = 100;
  int r = 3;
  double ar_coef = 0.8;
  ErrorFamily family = ErrorFamily::M1;
  std::optional<double> snr_target;  // population common-component R^2
  std::uint64_t seed = 0;

  void validate() const;
};

struct GeneratedPanel {
  Panel panel;
  Eigen::MatrixXd true_factors;   // T x r
  Eigen::MatrixXd true_loadings;  // n x r
  double common_scale;            // multiplier applied for SNR calibration
};

// x_it = scale * sum_j lambda_ji f_jt + u_it with lambda iid N(0,1), factors
// AR(1) started from the stationary distribution, and u from the error
// family. When snr_target is set the common component is rescaled so its
// population variance share equals the target.
GeneratedPanel generate_panel(const DgpConfig& cfg);

// tr(est' P est) / tr(est' est) with P the projection onto col(truth).
double trace_r2(const Eigen::MatrixXd& est_factors,
                const Eigen::MatrixXd& true_factors);

enum class Estimator { Vbqfa, Cdg, Pca, Gibbs };

const char* estimator_name(Estimator est);
Estimator estimator_from_name(const std::string& name);

struct MonteCarloPlan {
  std::vector<DgpConfig> cells;  // one per (family, T, n); seeds are derived
  std::vector<Estimator> estimators;
  std::vector<double> taus;
  int reps = 100;
  std::uint64_t master_seed = 0;
  bool standardize = true;
  EstimatorConfig est_config;  // n_factors, tolerance, priors for VBQFA
  GibbsConfig gibbs;           // used when the Gibbs estimator is requested
  int cdg_max_outer = 100;
  double cdg_tol = 1e-9;
};

struct RepScore {
  int cell = 0;
  int rep = 0;
  Estimator estimator = Estimator::Pca;
  double tau = 0.5;
  std::uint64_t seed = 0;
  double r2 = 0.0;
  bool failed = false;
  std::string error;
};

struct CellSummary {
  int cell = 0;
  Estimator estimator = Estimator::Pca;
  double tau = 0.5;
  double mean = 0.0;
  double std_error = 0.0;
  int n_ok = 0;
  int n_fail = 0;
  bool flagged = false;  // more than 5% of replications failed
};

struct SimResult {
  std::vector<DgpConfig> cells;
  std::vector<RepScore> rows;
  std::vector<CellSummary> summaries;
};

SimResult run_monte_carlo(const MonteCarloPlan& plan);

}  // namespace qfa
