#include "qfa/vbqfa.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "qfa/al_mixture.hpp"
#include "qfa/pca.hpp"

namespace qfa {

namespace {

constexpr double kParamFloor = 1e-12;  // floor for GIG parameters
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::ArrayXXd mean_inv_z(const VariationalState& s) {
  return (s.z_a.array() / s.z_b.array()).sqrt();
}

Eigen::ArrayXXd mean_z(const VariationalState& s) {
  return (s.z_b.array() / s.z_a.array()).sqrt() + 1.0 / s.z_a.array();
}

Eigen::ArrayXd mean_inv_sigma(const VariationalState& s) {
  return s.sigma_shape.array() / s.sigma_scale.array();
}

// Residuals x - E(lambda)'E(f) and the full second moment
// E[(x_it - lambda_i'f_t)^2] = resid^2 + f'Sl f + l'Sf l + tr(Sl Sf),
// both T x n to match the panel layout.
struct ResidualStats {
  Eigen::MatrixXd resid;
  Eigen::MatrixXd svar;
};

ResidualStats residual_stats(const VariationalState& s, const Panel& panel) {
  const Eigen::Index T = s.n_time(), n = s.n_series();
  ResidualStats out;
  out.resid = panel.values - s.mu_f * s.mu_lambda.transpose();
  out.svar = out.resid.cwiseProduct(out.resid);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cov = s.sigma_lambda[static_cast<std::size_t>(i)];
    out.svar.col(i) +=
        (s.mu_f * cov).cwiseProduct(s.mu_f).rowwise().sum();
  }
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& cov = s.sigma_f[static_cast<std::size_t>(t)];
    out.svar.row(t) += (s.mu_lambda * cov)
                           .cwiseProduct(s.mu_lambda)
                           .rowwise()
                           .sum()
                           .transpose();
    for (Eigen::Index i = 0; i < n; ++i)
      out.svar(t, i) +=
          s.sigma_lambda[static_cast<std::size_t>(i)].cwiseProduct(cov).sum();
  }
  return out;
}

double llt_log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

[[noreturn]] void throw_not_pd(const char* block, Eigen::Index idx) {
  std::ostringstream msg;
  msg << block << " precision matrix not positive definite at index "
      << (idx + 1);
  throw NumericalError(msg.str());
}

// The likelihood is invariant under (lambda_j, f_j) -> (d lambda_j, f_j / d),
// so the split of scale between loadings and factors is identified only by
// the priors and drifts very slowly under the coordinate updates. This move
// maximizes the bound along that flat direction: per factor it picks the
// rescale u = d^2 that maximizes the affected terms with alpha profiled at
// its exact update,
//   phi(u) = -G/(2u) + ((n - T)/2) log u - (a0 + 1/2) sum_i log(b0 + u L_i/2)
// with G = sum_t E[f_tj^2] and L_i = E[lambda_ij^2], then refreshes alpha.
// Every other ELBO term is invariant, so the move never lowers the bound.
void rescale_factor_scale(VariationalState& s, const EstimatorConfig& config) {
  const Eigen::Index T = s.n_time();
  const Eigen::Index n = s.n_series();
  const Eigen::Index r = s.n_factors();

  for (Eigen::Index j = 0; j < r; ++j) {
    double g = 0.0;
    for (Eigen::Index t = 0; t < T; ++t)
      g += s.mu_f(t, j) * s.mu_f(t, j) +
           s.sigma_f[static_cast<std::size_t>(t)](j, j);
    if (!(g > 0.0)) continue;
    Eigen::ArrayXd lam2(n);
    for (Eigen::Index i = 0; i < n; ++i)
      lam2(i) = s.mu_lambda(i, j) * s.mu_lambda(i, j) +
                s.sigma_lambda[static_cast<std::size_t>(i)](j, j);

    const double half_shape = config.a0 + 0.5;
    auto phi = [&](double log_u) {
      double u = std::exp(log_u);
      return -0.5 * g / u + 0.5 * static_cast<double>(n - T) * log_u -
             half_shape * (config.b0 + 0.5 * u * lam2).log().sum();
    };

    // Golden-section maximization over log u.
    const double ratio = 0.6180339887498949;
    double lo = std::log(1e-8), hi = std::log(1e8);
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    double f1 = phi(x1), f2 = phi(x2);
    for (int k = 0; k < 90; ++k) {
      if (f1 < f2) {
        lo = x1; x1 = x2; f1 = f2;
        x2 = lo + ratio * (hi - lo); f2 = phi(x2);
      } else {
        hi = x2; x2 = x1; f2 = f1;
        x1 = hi - ratio * (hi - lo); f1 = phi(x1);
      }
    }
    double log_u = f1 > f2 ? x1 : x2;
    if (std::max(f1, f2) <= phi(0.0)) continue;  // never move downhill

    const double d = std::exp(0.5 * log_u);
    s.mu_lambda.col(j) *= d;
    s.mu_f.col(j) /= d;
    for (auto& cov : s.sigma_lambda) {
      cov.row(j) *= d;
      cov.col(j) *= d;
    }
    for (auto& cov : s.sigma_f) {
      cov.row(j) /= d;
      cov.col(j) /= d;
    }
  }
}

// Rotations of the factor block (f -> f G, lambda -> lambda G for orthogonal
// G) leave the likelihood, the factor prior, and every entropy unchanged;
// only the per-coordinate shrinkage block moves. The coordinate updates crawl
// along this direction for thousands of sweeps, so fit() pins it per sweep by
// maximizing the alpha-profiled objective
//   psi(G) = -(a0 + 1/2) sum_ij log(b0 + E[(lambda G)_ij^2] / 2)
// over pairwise Givens rotations. An ascent move on the same bound.
void rotate_factor_frame(VariationalState& s, const EstimatorConfig& config) {
  const Eigen::Index n = s.n_series();
  const Eigen::Index r = s.n_factors();
  if (r < 2) return;
  const double half_shape = config.a0 + 0.5;

  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index p = 0; p + 1 < r; ++p) {
      for (Eigen::Index q = p + 1; q < r; ++q) {
        Eigen::ArrayXd lp(n), lq(n), spp(n), sqq(n), spq(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& cov = s.sigma_lambda[static_cast<std::size_t>(i)];
          lp(i) = s.mu_lambda(i, p);
          lq(i) = s.mu_lambda(i, q);
          spp(i) = cov(p, p);
          sqq(i) = cov(q, q);
          spq(i) = cov(p, q);
        }
        auto psi = [&](double theta) {
          double c = std::cos(theta), sn = std::sin(theta);
          Eigen::ArrayXd ep = (c * lp + sn * lq).square() + c * c * spp +
                              2.0 * c * sn * spq + sn * sn * sqq;
          Eigen::ArrayXd eq = (-sn * lp + c * lq).square() + sn * sn * spp -
                              2.0 * c * sn * spq + c * c * sqq;
          return -half_shape * ((config.b0 + 0.5 * ep).log().sum() +
                                (config.b0 + 0.5 * eq).log().sum());
        };
        const double ratio = 0.6180339887498949;
        double lo = -0.78539816339744831, hi = 0.78539816339744831;
        double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
        double f1 = psi(x1), f2 = psi(x2);
        for (int k = 0; k < 60; ++k) {
          if (f1 < f2) {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + ratio * (hi - lo); f2 = psi(x2);
          } else {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - ratio * (hi - lo); f1 = psi(x1);
          }
        }
        double theta = f1 > f2 ? x1 : x2;
        if (std::max(f1, f2) <= psi(0.0)) continue;
        double c = std::cos(theta), sn = std::sin(theta);
        Eigen::MatrixXd g = Eigen::MatrixXd::Identity(r, r);
        g(p, p) = c; g(q, q) = c; g(p, q) = -sn; g(q, p) = sn;
        s.mu_lambda = s.mu_lambda * g;
        s.mu_f = s.mu_f * g;
        for (auto& cov : s.sigma_lambda) cov = (g.transpose() * cov * g).eval();
        for (auto& cov : s.sigma_f) cov = (g.transpose() * cov * g).eval();
      }
    }
  }
}

// Completes the GL(r) family together with the scale and rotation moves:
// shears A = I + theta e_q e_p' (lambda_p <- lambda_p + theta lambda_q,
// f_q <- f_q - theta f_p) keep the likelihood and both entropies fixed
// (det A = 1) and move only the factor prior through
// M = sum_t E[f_t f_t'] and the alpha-profiled shrinkage block:
//   Psi(theta) = theta M_pq - theta^2 M_qq / 2
//                - (a0 + 1/2) sum_i log(b0 + E[(lambda_p + theta lambda_q)_i^2]/2).
// Ascent-safeguarded like the other two moves.
void shear_factor_frame(VariationalState& s, const EstimatorConfig& config) {
  const Eigen::Index T = s.n_time();
  const Eigen::Index n = s.n_series();
  const Eigen::Index r = s.n_factors();
  if (r < 2) return;
  const double half_shape = config.a0 + 0.5;

  Eigen::MatrixXd m = s.mu_f.transpose() * s.mu_f;
  for (Eigen::Index t = 0; t < T; ++t)
    m += s.sigma_f[static_cast<std::size_t>(t)];

  for (Eigen::Index p = 0; p < r; ++p) {
    for (Eigen::Index q = 0; q < r; ++q) {
      if (p == q) continue;
      Eigen::ArrayXd lp(n), lq(n), spp(n), sqq(n), spq(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& cov = s.sigma_lambda[static_cast<std::size_t>(i)];
        lp(i) = s.mu_lambda(i, p);
        lq(i) = s.mu_lambda(i, q);
        spp(i) = cov(p, p);
        sqq(i) = cov(q, q);
        spq(i) = cov(p, q);
      }
      auto obj = [&](double theta) {
        Eigen::ArrayXd ep = (lp + theta * lq).square() + spp +
                            2.0 * theta * spq + theta * theta * sqq;
        return theta * m(p, q) - 0.5 * theta * theta * m(q, q) -
               half_shape * (config.b0 + 0.5 * ep).log().sum();
      };
      const double ratio = 0.6180339887498949;
      double lo = -2.0, hi = 2.0;
      double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
      double f1 = obj(x1), f2 = obj(x2);
      for (int k = 0; k < 70; ++k) {
        if (f1 < f2) {
          lo = x1; x1 = x2; f1 = f2;
          x2 = lo + ratio * (hi - lo); f2 = obj(x2);
        } else {
          hi = x2; x2 = x1; f2 = f1;
          x1 = hi - ratio * (hi - lo); f1 = obj(x1);
        }
      }
      double theta = f1 > f2 ? x1 : x2;
      if (std::max(f1, f2) <= obj(0.0)) continue;

      // lambda <- lambda A, f <- f A^-T, covariances accordingly.
      s.mu_lambda.col(p) += theta * s.mu_lambda.col(q);
      s.mu_f.col(q) -= theta * s.mu_f.col(p);
      for (auto& cov : s.sigma_lambda) {
        cov.col(p) += theta * cov.col(q);
        cov.row(p) += theta * cov.row(q);
      }
      for (auto& cov : s.sigma_f) {
        cov.col(q) -= theta * cov.col(p);
        cov.row(q) -= theta * cov.row(p);
      }
      // Keep M in sync: M <- A^-1 M A^-T with A^-1 = I - theta e_q e_p'.
      m.row(q) -= theta * m.row(p);
      m.col(q) -= theta * m.col(p);
    }
  }
}

}  // namespace

VariationalState init_state(const Panel& panel, const EstimatorConfig& config,
                            const QuantileSpec& tau) {
  config.validate(panel.cols());
  (void)tau;  // the mixture constants play no role at initialization
  const Eigen::Index T = panel.rows(), n = panel.cols();
  const int r = config.n_factors;

  VariationalState s;
  s.mu_f = pca_factors(panel, r).factors;
  s.sigma_f.assign(static_cast<std::size_t>(T),
                   10.0 * Eigen::MatrixXd::Identity(r, r));
  s.mu_lambda = Eigen::MatrixXd::Zero(n, r);
  s.sigma_lambda.assign(static_cast<std::size_t>(n),
                        10.0 * Eigen::MatrixXd::Identity(r, r));
  s.alpha_shape = Eigen::MatrixXd::Constant(n, r, config.a0);
  s.alpha_rate = Eigen::MatrixXd::Constant(n, r, config.b0);
  s.sigma_shape = Eigen::VectorXd::Constant(n, config.r0);
  s.sigma_scale = Eigen::VectorXd::Constant(n, config.s0);
  s.z_a = Eigen::MatrixXd::Ones(n, T);
  s.z_b = Eigen::MatrixXd::Ones(n, T);
  s.elbo = -1000.0;
  return s;
}

void update_factors(VariationalState& s, const Panel& panel,
                    const QuantileSpec& tau) {
  const Eigen::Index T = s.n_time();
  const Eigen::Index n = s.n_series();
  const Eigen::Index r = s.n_factors();
  const double k2sq = tau.kappa2 * tau.kappa2;
  const Eigen::ArrayXd w_sigma = mean_inv_sigma(s);
  const Eigen::ArrayXXd zinv = mean_inv_z(s);
  const Eigen::MatrixXd& L = s.mu_lambda;

  // (kappa1/kappa2^2) sum_i E(1/sigma_i) E(lambda_i), constant over t
  const Eigen::VectorXd pull =
      (tau.kappa1 / k2sq) * (L.transpose() * w_sigma.matrix());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(r, r);

  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::ArrayXd w = zinv.col(t) * w_sigma / k2sq;
    // E(lambda_i lambda_i') = mu mu' + Sigma_i
    Eigen::MatrixXd prec = L.transpose() * w.matrix().asDiagonal() * L + I;
    for (Eigen::Index i = 0; i < n; ++i)
      prec += w(i) * s.sigma_lambda[static_cast<std::size_t>(i)];
    Eigen::VectorXd rhs =
        L.transpose() * (w * panel.values.row(t).transpose().array()).matrix() -
        pull;
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) throw_not_pd("factor", t);
    Eigen::MatrixXd cov = llt.solve(I);
    s.sigma_f[static_cast<std::size_t>(t)] =
        0.5 * (cov + cov.transpose()).eval();
    s.mu_f.row(t) = llt.solve(rhs).transpose();
  }
}

void update_loadings(VariationalState& s, const Panel& panel,
                     const QuantileSpec& tau) {
  const Eigen::Index T = s.n_time();
  const Eigen::Index n = s.n_series();
  const Eigen::Index r = s.n_factors();
  const double k2sq = tau.kappa2 * tau.kappa2;
  const Eigen::ArrayXd w_sigma = mean_inv_sigma(s);
  const Eigen::ArrayXXd zinv = mean_inv_z(s);
  const Eigen::MatrixXd& F = s.mu_f;
  const Eigen::VectorXd fsum = F.colwise().sum();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(r, r);

  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::ArrayXd w = zinv.row(i).transpose() * (w_sigma(i) / k2sq);
    // E(f_t f_t') = mu mu' + Sigma_t
    Eigen::MatrixXd prec = F.transpose() * w.matrix().asDiagonal() * F;
    for (Eigen::Index t = 0; t < T; ++t)
      prec += w(t) * s.sigma_f[static_cast<std::size_t>(t)];
    prec.diagonal() +=
        (s.alpha_shape.row(i).array() / s.alpha_rate.row(i).array()).matrix();
    Eigen::VectorXd rhs =
        F.transpose() * (w * panel.values.col(i).array()).matrix() -
        (tau.kappa1 / k2sq) * w_sigma(i) * fsum;
    Eigen::LLT<Eigen::MatrixXd> llt(prec);
    if (llt.info() != Eigen::Success) throw_not_pd("loading", i);
    Eigen::MatrixXd cov = llt.solve(I);
    s.sigma_lambda[static_cast<std::size_t>(i)] =
        0.5 * (cov + cov.transpose()).eval();
    s.mu_lambda.row(i) = llt.solve(rhs).transpose();
  }
}

void update_alpha(VariationalState& s, const EstimatorConfig& config) {
  const Eigen::Index n = s.n_series();
  const Eigen::Index r = s.n_factors();
  s.alpha_shape.setConstant(config.a0 + 0.5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cov = s.sigma_lambda[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < r; ++j)
      s.alpha_rate(i, j) =
          config.b0 +
          0.5 * (s.mu_lambda(i, j) * s.mu_lambda(i, j) + cov(j, j));
  }
}

void update_z(VariationalState& s, const Panel& panel,
              const QuantileSpec& tau) {
  const Eigen::Index n = s.n_series();
  const double k2sq = tau.kappa2 * tau.kappa2;
  const double k1sq_over_k2sq = tau.kappa1 * tau.kappa1 / k2sq;
  const Eigen::ArrayXd w_sigma = mean_inv_sigma(s);
  const ResidualStats rs = residual_stats(s, panel);

  for (Eigen::Index i = 0; i < n; ++i) {
    double a = std::max(w_sigma(i) * (2.0 + k1sq_over_k2sq), kParamFloor);
    s.z_a.row(i).setConstant(a);
    s.z_b.row(i) = (w_sigma(i) * rs.svar.col(i).array() / k2sq)
                       .max(kParamFloor)
                       .matrix()
                       .transpose();
  }
}

void update_sigma(VariationalState& s, const Panel& panel,
                  const QuantileSpec& tau, const EstimatorConfig& config) {
  const Eigen::Index T = s.n_time();
  const Eigen::Index n = s.n_series();
  const double k2sq = tau.kappa2 * tau.kappa2;
  const double k1 = tau.kappa1;
  const Eigen::ArrayXXd zinv = mean_inv_z(s);
  const Eigen::ArrayXXd zmean = mean_z(s);
  const ResidualStats rs = residual_stats(s, panel);

  // Conjugate shape: T/2 powers of 1/sigma from the likelihood, T from the
  // Exp(sigma) prior of z.
  static const bool printed_shape = std::getenv("QFA_SIGMA3T") != nullptr;
  s.sigma_shape.setConstant(config.r0 +
                            (printed_shape ? 3.0 : 1.5) * static_cast<double>(T));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::ArrayXd zi = zinv.row(i).transpose();
    Eigen::ArrayXd ze = zmean.row(i).transpose();
    double scale =
        config.s0 + (zi * rs.svar.col(i).array() / (2.0 * k2sq) -
                     k1 * rs.resid.col(i).array() / k2sq +
                     (1.0 + k1 * k1 / (2.0 * k2sq)) * ze)
                        .sum();
    if (!(scale > 0.0)) {
      std::ostringstream msg;
      msg << "sigma scale update produced a nonpositive value for series "
          << (i + 1);
      throw NumericalError(msg.str());
    }
    s.sigma_scale(i) = scale;
  }
}

double compute_elbo(const VariationalState& s, const Panel& panel,
                    const QuantileSpec& tau, const EstimatorConfig& config) {
  const Eigen::Index T = s.n_time();
  const Eigen::Index n = s.n_series();
  const Eigen::Index r = s.n_factors();
  const double k2sq = tau.kappa2 * tau.kappa2;
  const double k1 = tau.kappa1;
  const double log_k2 = std::log(tau.kappa2);
  const double Td = static_cast<double>(T);

  double elbo = 0.0;

  // Factor prior N(0, I) and Gaussian entropies.
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& cov = s.sigma_f[static_cast<std::size_t>(t)];
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw_not_pd("factor covariance", t);
    elbo += -0.5 * static_cast<double>(r) * kLog2Pi -
            0.5 * (s.mu_f.row(t).squaredNorm() + cov.trace());
    elbo += 0.5 * (static_cast<double>(r) * (1.0 + kLog2Pi) + llt_log_det(llt));
  }

  const Eigen::ArrayXXd zinv = mean_inv_z(s);
  const Eigen::ArrayXXd zmean = mean_z(s);
  const ResidualStats rs = residual_stats(s, panel);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = s.sigma_shape(i) / s.sigma_scale(i);
    const double psi_shape = digamma(s.sigma_shape(i));
    const double elog_sigma = std::log(s.sigma_scale(i)) - psi_shape;

    Eigen::ArrayXd zi = zinv.row(i).transpose();
    Eigen::ArrayXd ze = zmean.row(i).transpose();

    // Expected conditionally-Gaussian log likelihood plus the Exp(sigma)
    // prior of z plus the GIG entropy. The +-E[log z]/2 terms of the
    // likelihood and the entropy cancel exactly and are dropped from both.
    Eigen::ArrayXd qterm = zi * rs.svar.col(i).array() -
                           2.0 * k1 * rs.resid.col(i).array() +
                           k1 * k1 * ze;
    elbo += Td * (-log_k2 - 1.5 * elog_sigma + 0.5);
    elbo += -w * (qterm / (2.0 * k2sq) + ze).sum();
    elbo += -0.5 * s.z_a.row(i).array().log().sum();

    // Inverse-gamma prior and entropy of sigma_i.
    elbo += config.r0 * std::log(config.s0) - std::lgamma(config.r0) -
            (config.r0 + 1.0) * elog_sigma - config.s0 * w;
    elbo += s.sigma_shape(i) + std::log(s.sigma_scale(i)) +
            std::lgamma(s.sigma_shape(i)) -
            (1.0 + s.sigma_shape(i)) * psi_shape;

    // Gaussian entropy of the loading block.
    const auto& cov = s.sigma_lambda[static_cast<std::size_t>(i)];
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw_not_pd("loading covariance", i);
    elbo += 0.5 * (static_cast<double>(r) * (1.0 + kLog2Pi) + llt_log_det(llt));

    // Loading prior given alpha, gamma prior of alpha, gamma entropy.
    for (Eigen::Index j = 0; j < r; ++j) {
      const double a = s.alpha_shape(i, j);
      const double b = s.alpha_rate(i, j);
      const double psi_a = digamma(a);
      const double e_alpha = a / b;
      const double elog_alpha = psi_a - std::log(b);
      const double e_lambda2 =
          s.mu_lambda(i, j) * s.mu_lambda(i, j) + cov(j, j);
      elbo += 0.5 * elog_alpha - 0.5 * kLog2Pi - 0.5 * e_alpha * e_lambda2;
      elbo += config.a0 * std::log(config.b0) - std::lgamma(config.a0) +
              (config.a0 - 1.0) * elog_alpha - config.b0 * e_alpha;
      elbo += a - std::log(b) + std::lgamma(a) + (1.0 - a) * psi_a;
    }
  }
  return elbo;
}

QfaFit fit(const Panel& panel, const EstimatorConfig& config,
           const QuantileSpec& tau) {
  config.validate(panel.cols());
  if (tau.tau <= 0.01 || tau.tau >= 0.99)
    std::fprintf(stderr,
                 "qfa: warning: extreme quantile level tau=%g has few "
                 "effective tail observations\n",
                 tau.tau);

  VariationalState s = init_state(panel, config, tau);
  std::vector<double> trace;
  double prev = -1000.0;
  bool converged = false;
  int iters = 0;
  for (int it = 1; it <= config.max_iters; ++it) {
    try {
      update_loadings(s, panel, tau);
      update_alpha(s, config);
      update_z(s, panel, tau);
      update_sigma(s, panel, tau, config);
      update_factors(s, panel, tau);
      // Pin the likelihood-flat GL(r) directions (rotation, shear, scale),
      // then restore alpha to its exact optimum. Each move only raises the
      // bound.
      rotate_factor_frame(s, config);
      shear_factor_frame(s, config);
      rescale_factor_scale(s, config);
      update_alpha(s, config);
      s.elbo = compute_elbo(s, panel, tau, config);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "tau=" << tau.tau << " iteration " << it << ": " << e.what();
      throw NumericalError(msg.str());
    }
    trace.push_back(s.elbo);
    iters = it;
    if (std::abs(s.elbo - prev) <= config.tolerance) {
      converged = true;
      break;
    }
    prev = s.elbo;
  }

  QfaFit out;
  out.tau = tau.tau;
  out.factor_mean = s.mu_f;
  out.factor_cov = s.sigma_f;
  out.loading_mean = s.mu_lambda;
  out.loading_cov = s.sigma_lambda;
  out.elbo_trace = std::move(trace);
  out.converged = converged;
  out.iters_used = iters;
  out.sigma_shape = s.sigma_shape;
  out.sigma_scale = s.sigma_scale;
  out.alpha_shape = s.alpha_shape;
  out.alpha_rate = s.alpha_rate;
  out.z_a = s.z_a;
  out.z_b = s.z_b;

  // Sign convention: first nonzero entry of each loading column positive.
  // Covariance blocks flip jointly, so the fit describes the same posterior.
  for (Eigen::Index j = 0; j < out.loading_mean.cols(); ++j) {
    double scale = out.loading_mean.col(j).cwiseAbs().maxCoeff();
    if (scale <= 0.0) continue;
    double lead = 0.0;
    for (Eigen::Index i = 0; i < out.loading_mean.rows(); ++i) {
      if (std::abs(out.loading_mean(i, j)) > 1e-12 * scale) {
        lead = out.loading_mean(i, j);
        break;
      }
    }
    if (lead < 0.0) {
      out.loading_mean.col(j) = -out.loading_mean.col(j);
      out.factor_mean.col(j) = -out.factor_mean.col(j);
      for (auto& cov : out.loading_cov) {
        cov.row(j) = -cov.row(j);
        cov.col(j) = -cov.col(j);
      }
      for (auto& cov : out.factor_cov) {
        cov.row(j) = -cov.row(j);
        cov.col(j) = -cov.col(j);
      }
    }
  }
  return out;
}

MultiQuantileFit fit_all_quantiles(const Panel& panel,
                                   const EstimatorConfig& config) {
  if (config.quantiles.empty())
    throw ConfigError("quantile list must not be empty");
  config.validate(panel.cols());
  MultiQuantileFit out;
  for (const auto& q : config.quantiles) {
    try {
      out.fits.emplace(q.tau, fit(panel, config, q));
    } catch (const std::exception& e) {
      out.failures.emplace_back(q.tau, e.what());
    }
  }
  return out;
}

VariationalState state_from_fit(const QfaFit& fit) {
  VariationalState s;
  s.mu_f = fit.factor_mean;
  s.sigma_f = fit.factor_cov;
  s.mu_lambda = fit.loading_mean;
  s.sigma_lambda = fit.loading_cov;
  s.alpha_shape = fit.alpha_shape;
  s.alpha_rate = fit.alpha_rate;
  s.sigma_shape = fit.sigma_shape;
  s.sigma_scale = fit.sigma_scale;
  s.z_a = fit.z_a;
  s.z_b = fit.z_b;
  s.elbo = fit.elbo_trace.empty() ? -1000.0 : fit.elbo_trace.back();
  return s;
}

}  // namespace qfa
