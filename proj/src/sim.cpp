#include "qfa/sim.hpp"

#include <cmath>

#include "qfa/cdg.hpp"
#include "qfa/pca.hpp"
#include "qfa/vbqfa.hpp"

namespace qfa {

const char* family_name(ErrorFamily family) {
  switch (family) {
    case ErrorFamily::M1: return "M1";
    case ErrorFamily::M2: return "M2";
    case ErrorFamily::M3: return "M3";
    case ErrorFamily::M4: return "M4";
    case ErrorFamily::M5: return "M5";
    case ErrorFamily::M6: return "M6";
  }
  return "?";
}

ErrorFamily family_from_name(const std::string& name) {
  for (auto f : {ErrorFamily::M1, ErrorFamily::M2, ErrorFamily::M3,
                 ErrorFamily::M4, ErrorFamily::M5, ErrorFamily::M6})
    if (name == family_name(f)) return f;
  throw ConfigError("unknown error family '" + name + "' (expected M1..M6)");
}

namespace {
struct MixtureComponent {
  double weight, mean, sd;
};

// Gaussian mixture specifications for M2..M6.
const MixtureComponent kM2[] = {{2.0 / 3.0, 0.0, 1.0}, {1.0 / 3.0, 0.0, 0.1}};
const MixtureComponent kM3[] = {{0.1, 0.0, 1.0}, {0.9, 0.0, 0.1}};
const MixtureComponent kM4[] = {{0.5, -1.0, 2.0 / 3.0}, {0.5, 1.0, 2.0 / 3.0}};
const MixtureComponent kM5[] = {{0.5, -1.5, 0.5}, {0.5, 1.5, 0.5}};
const MixtureComponent kM6[] = {{0.75, -0.43, 1.0}, {0.25, 1.07, 1.0 / 3.0}};

const MixtureComponent* family_mixture(ErrorFamily family) {
  switch (family) {
    case ErrorFamily::M2: return kM2;
    case ErrorFamily::M3: return kM3;
    case ErrorFamily::M4: return kM4;
    case ErrorFamily::M5: return kM5;
    case ErrorFamily::M6: return kM6;
    default: return nullptr;
  }
}
}  // namespace

double draw_error(ErrorFamily family, Rng& rng) {
  if (family == ErrorFamily::M1) return rng.student_t(3.0);
  const MixtureComponent* mix = family_mixture(family);
  const MixtureComponent& c = rng.uniform() < mix[0].weight ? mix[0] : mix[1];
  return c.mean + c.sd * rng.normal();
}

double error_family_mean(ErrorFamily family) {
  if (family == ErrorFamily::M1) return 0.0;
  const MixtureComponent* mix = family_mixture(family);
  return mix[0].weight * mix[0].mean + mix[1].weight * mix[1].mean;
}

double error_family_variance(ErrorFamily family) {
  if (family == ErrorFamily::M1) return 3.0;  // t_3: dof / (dof - 2)
  const MixtureComponent* mix = family_mixture(family);
  double m = error_family_mean(family);
  double second = 0.0;
  for (int k = 0; k < 2; ++k)
    second += mix[k].weight * (mix[k].sd * mix[k].sd + mix[k].mean * mix[k].mean);
  return second - m * m;
}

void DgpConfig::validate() const {
  if (T < 2 || n < 2) throw ConfigError("DGP requires T >= 2 and n >= 2");
  if (r < 1 || r >= n) throw ConfigError("DGP requires 1 <= r < n");
  if (!(std::abs(ar_coef) < 1.0))
    throw ConfigError("DGP requires |ar_coef| < 1 for stationary factors");
  if (snr_target && !(*snr_target > 0.0 && *snr_target < 1.0))
    throw ConfigError("snr_target must lie in (0,1)");
}

GeneratedPanel generate_panel(const DgpConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  // Factors first, then loadings, then errors: the draw order is part of the
  // reproducibility contract.
  Eigen::MatrixXd factors(cfg.T, cfg.r);
  const double stat_sd = 1.0 / std::sqrt(1.0 - cfg.ar_coef * cfg.ar_coef);
  for (int j = 0; j < cfg.r; ++j) {
    factors(0, j) = stat_sd * rng.normal();
    for (int t = 1; t < cfg.T; ++t)
      factors(t, j) = cfg.ar_coef * factors(t - 1, j) + rng.normal();
  }

  Eigen::MatrixXd loadings(cfg.n, cfg.r);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.r; ++j) loadings(i, j) = rng.normal();

  Eigen::MatrixXd noise(cfg.T, cfg.n);
  for (int i = 0; i < cfg.n; ++i)
    for (int t = 0; t < cfg.T; ++t) noise(t, i) = draw_error(cfg.family, rng);

  double scale = 1.0;
  if (cfg.snr_target) {
    // Population variances: common = r * var(f), noise from the mixture.
    double v_common = cfg.r / (1.0 - cfg.ar_coef * cfg.ar_coef);
    double v_noise = error_family_variance(cfg.family);
    scale = std::sqrt(*cfg.snr_target / (1.0 - *cfg.snr_target) * v_noise /
                      v_common);
  }

  Eigen::MatrixXd values = scale * factors * loadings.transpose() + noise;
  return GeneratedPanel{make_panel(std::move(values)), std::move(factors),
                        std::move(loadings), scale};
}

double trace_r2(const Eigen::MatrixXd& est_factors,
                const Eigen::MatrixXd& true_factors) {
  if (est_factors.rows() != true_factors.rows())
    throw InputError("trace_r2: factor matrices must have matching rows");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(true_factors);
  if (qr.rank() < true_factors.cols())
    throw NumericalError("trace_r2: true factor matrix is rank deficient");
  Eigen::MatrixXd q = qr.householderQ() *
                      Eigen::MatrixXd::Identity(true_factors.rows(),
                                                true_factors.cols());
  double denom = est_factors.squaredNorm();
  if (!(denom > 0.0)) throw InputError("trace_r2: estimated factors are zero");
  double num = (q.transpose() * est_factors).squaredNorm();
  double value = num / denom;
  return std::min(1.0, std::max(0.0, value));
}

const char* estimator_name(Estimator est) {
  switch (est) {
    case Estimator::Vbqfa: return "vbqfa";
    case Estimator::Cdg: return "cdg";
    case Estimator::Pca: return "pca";
    case Estimator::Gibbs: return "gibbs";
  }
  return "?";
}

Estimator estimator_from_name(const std::string& name) {
  for (auto e : {Estimator::Vbqfa, Estimator::Cdg, Estimator::Pca,
                 Estimator::Gibbs})
    if (name == estimator_name(e)) return e;
  throw ConfigError("unknown estimator '" + name +
                    "' (expected vbqfa, cdg, pca, or gibbs)");
}

SimResult run_monte_carlo(const MonteCarloPlan& plan) {
  if (plan.reps < 1) throw ConfigError("Monte Carlo requires reps >= 1");
  if (plan.cells.empty()) throw ConfigError("Monte Carlo requires >= 1 cell");
  if (plan.estimators.empty())
    throw ConfigError("Monte Carlo requires >= 1 estimator");
  if (plan.taus.empty()) throw ConfigError("Monte Carlo requires >= 1 tau");
  for (const auto& cell : plan.cells) cell.validate();

  SimResult result;
  result.cells = plan.cells;

  for (std::size_t c = 0; c < plan.cells.size(); ++c) {
    for (int rep = 0; rep < plan.reps; ++rep) {
      DgpConfig dgp = plan.cells[c];
      dgp.seed = derive_seed(plan.master_seed, c, static_cast<std::uint64_t>(rep));
      GeneratedPanel gen = generate_panel(dgp);
      const Panel panel =
          plan.standardize ? standardize(gen.panel).panel : gen.panel;

      EstimatorConfig config = plan.est_config;
      config.n_factors = dgp.r;

      for (std::size_t e = 0; e < plan.estimators.size(); ++e) {
        Estimator est = plan.estimators[e];

        // PCA ignores the quantile level; compute once per replication.
        double pca_r2 = 0.0;
        bool pca_failed = false;
        std::string pca_error;
        if (est == Estimator::Pca) {
          try {
            pca_r2 = trace_r2(pca_factors(panel, dgp.r).factors,
                              gen.true_factors);
          } catch (const std::exception& ex) {
            pca_failed = true;
            pca_error = ex.what();
          }
        }

        for (std::size_t q = 0; q < plan.taus.size(); ++q) {
          RepScore row;
          row.cell = static_cast<int>(c);
          row.rep = rep;
          row.estimator = est;
          row.tau = plan.taus[q];
          row.seed = dgp.seed;
          try {
            switch (est) {
              case Estimator::Pca:
                if (pca_failed) throw NumericalError(pca_error);
                row.r2 = pca_r2;
                break;
              case Estimator::Vbqfa: {
                QfaFit f = fit(panel, config, make_quantile_spec(plan.taus[q]));
                row.r2 = trace_r2(f.factor_mean, gen.true_factors);
                break;
              }
              case Estimator::Cdg: {
                CdgFit f = cdg_fit(panel, dgp.r, plan.taus[q],
                                   plan.cdg_max_outer, plan.cdg_tol);
                row.r2 = trace_r2(f.factors, gen.true_factors);
                break;
              }
              case Estimator::Gibbs: {
                GibbsConfig g = plan.gibbs;
                g.seed = derive_seed(dgp.seed, 1 + e, q);
                GibbsDraws draws =
                    gibbs_fit(panel, config, make_quantile_spec(plan.taus[q]), g);
                row.r2 = trace_r2(draws.mean_factors(), gen.true_factors);
                break;
              }
            }
          } catch (const std::exception& ex) {
            row.failed = true;
            row.error = ex.what();
          }
          result.rows.push_back(std::move(row));
        }
      }
    }
  }

  // Aggregate per (cell, estimator, tau) in plan order.
  for (std::size_t c = 0; c < plan.cells.size(); ++c) {
    for (Estimator est : plan.estimators) {
      for (double tau : plan.taus) {
        CellSummary s;
        s.cell = static_cast<int>(c);
        s.estimator = est;
        s.tau = tau;
        double sum = 0.0, sum2 = 0.0;
        for (const auto& row : result.rows) {
          if (row.cell != s.cell || row.estimator != est || row.tau != tau)
            continue;
          if (row.failed) {
            ++s.n_fail;
            continue;
          }
          ++s.n_ok;
          sum += row.r2;
          sum2 += row.r2 * row.r2;
        }
        if (s.n_ok > 0) {
          s.mean = sum / s.n_ok;
          if (s.n_ok > 1) {
            double var = (sum2 - sum * sum / s.n_ok) / (s.n_ok - 1);
            s.std_error = std::sqrt(std::max(0.0, var) / s.n_ok);
          }
        }
        s.flagged = s.n_fail * 20 > (s.n_ok + s.n_fail);  // > 5% failures
        result.summaries.push_back(std::move(s));
      }
    }
  }
  return result;
}

}  // namespace qfa
