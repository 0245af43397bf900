#include "qfa/gibbs.hpp"

#include <cmath>
#include <sstream>

#include "qfa/pca.hpp"

namespace qfa {

void GibbsConfig::validate() const {
  if (burn_in < 0) throw ConfigError("gibbs: burn_in must be >= 0");
  if (n_draws <= burn_in)
    throw ConfigError("gibbs: n_draws must exceed burn_in, got n_draws=" +
                      std::to_string(n_draws) + ", burn_in=" +
                      std::to_string(burn_in));
  if (thin < 1) throw ConfigError("gibbs: thin must be >= 1");
}

namespace {

constexpr double kParamFloor = 1e-12;

Eigen::MatrixXd mean_of(const std::vector<Eigen::MatrixXd>& draws) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(draws.front().rows(),
                                              draws.front().cols());
  for (const auto& d : draws) acc += d;
  return acc / static_cast<double>(draws.size());
}

// Draw from N(P^-1 b, P^-1) given the precision P and linear term b.
Eigen::VectorXd sample_gaussian_from_precision(const Eigen::MatrixXd& prec,
                                               const Eigen::VectorXd& b,
                                               Rng& rng, const char* block,
                                               Eigen::Index idx) {
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "gibbs: " << block << " precision not positive definite at index "
        << (idx + 1);
    throw NumericalError(msg.str());
  }
  Eigen::VectorXd mean = llt.solve(b);
  Eigen::VectorXd shock(b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) shock(j) = rng.normal();
  // cov(L'^-1 shock) = P^-1 for P = L L'.
  return mean + llt.matrixU().solve(shock);
}

}  // namespace

Eigen::MatrixXd GibbsDraws::mean_factors() const {
  if (factor_draws.empty()) throw NumericalError("gibbs: no kept draws");
  return mean_of(factor_draws);
}

Eigen::MatrixXd GibbsDraws::mean_loadings() const {
  if (loading_draws.empty()) throw NumericalError("gibbs: no kept draws");
  return mean_of(loading_draws);
}

double sample_gig_half(double a, double b, Rng& rng) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::domain_error("sample_gig_half: parameters must be > 0");
  // 1/z is inverse Gaussian with mean sqrt(a/b) and shape a.
  return 1.0 / rng.inverse_gaussian(std::sqrt(a / b), a);
}

GibbsDraws gibbs_fit(const Panel& panel, const EstimatorConfig& config,
                     const QuantileSpec& tau, const GibbsConfig& gibbs,
                     const GibbsBlocks& blocks) {
  config.validate(panel.cols());
  gibbs.validate();

  const Eigen::Index T = panel.rows(), n = panel.cols();
  const int r = config.n_factors;
  const double k2sq = tau.kappa2 * tau.kappa2;
  const double k1 = tau.kappa1;
  const double a_z = 2.0 + k1 * k1 / k2sq;

  Rng rng(gibbs.seed);

  // Start at the PCA factors with least-squares loadings; latent blocks at
  // their prior-neutral values.
  Eigen::MatrixXd factors = pca_factors(panel, r).factors;
  Eigen::MatrixXd loadings =
      panel.values.transpose() * factors / static_cast<double>(T);
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(n, T);
  Eigen::VectorXd sigma = Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Ones(n, r);

  GibbsDraws out;
  const int kept =
      (gibbs.n_draws - gibbs.burn_in + gibbs.thin - 1) / gibbs.thin;
  out.factor_draws.reserve(kept);
  out.loading_draws.reserve(kept);
  out.sigma_draws.reserve(kept);
  out.z_draws.reserve(kept);
  out.alpha_draws.reserve(kept);

  for (int draw = 0; draw < gibbs.n_draws; ++draw) {
    try {
      if (blocks.factors) {
        const Eigen::VectorXd pull =
            (k1 / k2sq) * (loadings.transpose() * sigma.cwiseInverse());
        for (Eigen::Index t = 0; t < T; ++t) {
          Eigen::ArrayXd w =
              1.0 / (k2sq * sigma.array() * z.col(t).array());
          Eigen::MatrixXd prec =
              loadings.transpose() * w.matrix().asDiagonal() * loadings +
              Eigen::MatrixXd::Identity(r, r);
          Eigen::VectorXd b =
              loadings.transpose() *
                  (w * panel.values.row(t).transpose().array()).matrix() -
              pull;
          factors.row(t) =
              sample_gaussian_from_precision(prec, b, rng, "factor", t)
                  .transpose();
        }
      }

      if (blocks.loadings) {
        const Eigen::VectorXd fsum = factors.colwise().sum();
        for (Eigen::Index i = 0; i < n; ++i) {
          Eigen::ArrayXd w =
              1.0 / (k2sq * sigma(i) * z.row(i).transpose().array());
          Eigen::MatrixXd prec =
              factors.transpose() * w.matrix().asDiagonal() * factors;
          prec.diagonal() += alpha.row(i).transpose();
          Eigen::VectorXd b =
              factors.transpose() * (w * panel.values.col(i).array()).matrix() -
              (k1 / (k2sq * sigma(i))) * fsum;
          loadings.row(i) =
              sample_gaussian_from_precision(prec, b, rng, "loading", i)
                  .transpose();
        }
      }

      if (blocks.alpha) {
        for (Eigen::Index i = 0; i < n; ++i)
          for (int j = 0; j < r; ++j)
            alpha(i, j) = rng.gamma(config.a0 + 0.5,
                                    config.b0 +
                                        0.5 * loadings(i, j) * loadings(i, j));
      }

      Eigen::MatrixXd resid =
          panel.values - factors * loadings.transpose();  // T x n

      if (blocks.z) {
        for (Eigen::Index i = 0; i < n; ++i) {
          double a = std::max(a_z / sigma(i), kParamFloor);
          for (Eigen::Index t = 0; t < T; ++t) {
            double b = std::max(resid(t, i) * resid(t, i) / (k2sq * sigma(i)),
                                kParamFloor);
            z(i, t) = sample_gig_half(a, b, rng);
          }
        }
      }

      if (blocks.sigma) {
        const double shape = config.r0 + 1.5 * static_cast<double>(T);
        for (Eigen::Index i = 0; i < n; ++i) {
          double scale = config.s0;
          for (Eigen::Index t = 0; t < T; ++t) {
            double u = resid(t, i);
            scale += u * u / (2.0 * k2sq * z(i, t)) - k1 * u / k2sq +
                     (1.0 + k1 * k1 / (2.0 * k2sq)) * z(i, t);
          }
          if (!(scale > 0.0))
            throw NumericalError("gibbs: sigma scale nonpositive for series " +
                                 std::to_string(i + 1));
          sigma(i) = rng.inv_gamma(shape, scale);
        }
      }
    } catch (const NumericalError& e) {
      throw NumericalError("draw " + std::to_string(draw + 1) + ": " +
                           e.what());
    }

    if (draw >= gibbs.burn_in && (draw - gibbs.burn_in) % gibbs.thin == 0) {
      out.factor_draws.push_back(factors);
      out.loading_draws.push_back(loadings);
      out.sigma_draws.push_back(sigma);
      out.z_draws.push_back(z);
      out.alpha_draws.push_back(alpha);
    }
  }
  return out;
}

}  // namespace qfa
