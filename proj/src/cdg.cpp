#include "qfa/cdg.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "qfa/pca.hpp"

namespace qfa {

double smoothed_check_loss(double u, double tau, double eps) {
  return (tau - 0.5) * u + 0.5 * std::sqrt(u * u + eps * eps);
}

namespace {

double total_smoothed_loss(const Eigen::MatrixXd& resid, double tau,
                           double eps) {
  return ((tau - 0.5) * resid.array() +
          0.5 * (resid.array().square() + eps * eps).sqrt())
      .sum();
}

double total_check_loss(const Eigen::MatrixXd& resid, double tau) {
  return (resid.array() *
          (tau - (resid.array() <= 0.0).cast<double>()))
      .sum();
}

}  // namespace

namespace {

double stage_loss(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                  double tau, double eps2, const Eigen::VectorXd& beta) {
  Eigen::ArrayXd u = (y - X * beta).array();
  return ((tau - 0.5) * u + 0.5 * (u.square() + eps2).sqrt()).sum();
}

// One IRLS pass at fixed eps. Reweighting majorizes the smoothed loss, so
// every iteration decreases it. Returns the achieved loss.
double irls_stage(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                  double tau, double eps, double tol, int max_iters,
                  Eigen::VectorXd& beta) {
  const Eigen::VectorXd xsum = X.colwise().sum();
  const double eps2 = eps * eps;
  Eigen::ArrayXd u = (y - X * beta).array();
  double loss = ((tau - 0.5) * u + 0.5 * (u.square() + eps2).sqrt()).sum();
  for (int it = 0; it < max_iters; ++it) {
    Eigen::ArrayXd w = 0.5 / (u.square() + eps2).sqrt();
    Eigen::MatrixXd xtwx = X.transpose() * w.matrix().asDiagonal() * X;
    Eigen::VectorXd rhs =
        X.transpose() * (w * y.array()).matrix() + (tau - 0.5) * xsum;
    Eigen::LLT<Eigen::MatrixXd> llt(xtwx);
    if (llt.info() != Eigen::Success)
      throw NumericalError("qreg_fit: weighted design became rank deficient");
    beta = llt.solve(rhs);
    u = (y - X * beta).array();
    double next = ((tau - 0.5) * u + 0.5 * (u.square() + eps2).sqrt()).sum();
    double change = loss - next;
    loss = next;
    if (std::abs(change) <= tol * (1.0 + std::abs(next))) return loss;
  }
  return loss;
}

// Damped Newton on the smoothed loss. The objective is convex with Hessian
// X' diag(eps^2 / (2 s^3)) X, s = sqrt(u^2 + eps^2); backtracking keeps every
// step a descent, and convergence near the optimum is quadratic where plain
// IRLS contracts only like 1 - O(eps). Falls back to an IRLS pass whenever
// the Newton system or the line search fails. Returns the achieved loss, or
// NaN if the decrement never reached tol within the budget.
double newton_stage(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                    double tau, double eps, double tol, int max_iters,
                    Eigen::VectorXd& beta) {
  const double eps2 = eps * eps;
  double loss = stage_loss(y, X, tau, eps2, beta);
  for (int it = 0; it < max_iters; ++it) {
    Eigen::ArrayXd u = (y - X * beta).array();
    Eigen::ArrayXd s = (u.square() + eps2).sqrt();
    Eigen::VectorXd grad =
        -(X.transpose() * ((tau - 0.5) + 0.5 * u / s).matrix());
    Eigen::ArrayXd curv = 0.5 * eps2 / (s * s * s);
    Eigen::MatrixXd hess = X.transpose() * curv.matrix().asDiagonal() * X;
    hess.diagonal().array() += 1e-13 * (1.0 + hess.trace());

    double next = loss;
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    bool stepped = false;
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd dir = -llt.solve(grad);
      double slope = grad.dot(dir);
      if (slope < 0.0) {
        double step = 1.0;
        for (int half = 0; half < 40; ++half) {
          Eigen::VectorXd cand = beta + step * dir;
          double cand_loss = stage_loss(y, X, tau, eps2, cand);
          if (cand_loss <= loss + 1e-4 * step * slope) {
            beta = cand;
            next = cand_loss;
            stepped = true;
            break;
          }
          step *= 0.5;
        }
      }
    }
    if (!stepped) next = irls_stage(y, X, tau, eps, 0.0, 1, beta);
    double change = loss - next;
    loss = next;
    if (std::abs(change) <= tol * (1.0 + std::abs(next))) return loss;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

Eigen::VectorXd qreg_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         double tau, const QregOptions& opts,
                         const Eigen::VectorXd* start) {
  const Eigen::Index T = X.rows(), k = X.cols();
  if (T <= k)
    throw ConfigError("qreg_fit: need more observations than regressors (T=" +
                      std::to_string(T) + ", k=" + std::to_string(k) + ")");
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("qreg_fit: tau must lie strictly in (0,1)");

  Eigen::VectorXd beta;
  if (start) {
    beta = *start;
  } else {
    Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::LLT<Eigen::MatrixXd> llt0(xtx);
    if (llt0.info() != Eigen::Success)
      throw NumericalError("qreg_fit: design matrix is rank deficient");
    beta = llt0.solve(X.transpose() * y);

    // Smoothing continuation: at the target eps alone the IRLS tail
    // contracts like 1 - O(eps), so anneal from a coarse smoothing first.
    double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    for (double eps = 0.1 * scale; eps > opts.eps; eps *= 0.1)
      irls_stage(y, X, tau, eps, 1e-9, 50, beta);
  }

  // Final-stage descent from either the continuation result or the caller's
  // warm start. The smoothed loss at the returned beta never exceeds the
  // loss at the warm start even when the budget runs out.
  double loss =
      newton_stage(y, X, tau, opts.eps, opts.tol, opts.max_iters, beta);
  if (std::isnan(loss) && !start)
    throw NumericalError("qreg_fit: solver did not converge within " +
                         std::to_string(opts.max_iters) + " iterations");
  return beta;
}

CdgFit cdg_fit(const Panel& panel, int r, double tau, int max_outer,
               double tol) {
  const Eigen::Index T = panel.rows(), n = panel.cols();
  if (r < 1 || r >= std::min(T, n))
    throw ConfigError("cdg_fit: r must satisfy 1 <= r < min(T,n)");
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("cdg_fit: tau must lie strictly in (0,1)");
  if (max_outer < 1) throw ConfigError("cdg_fit: max_outer must be >= 1");

  // Inner solves warm-start from the incumbent coefficients, so each half
  // step is a monotone descent of the smoothed loss no matter how early the
  // inner iteration stops.
  QregOptions opts;
  opts.max_iters = 80;
  opts.tol = 1e-11;
  Eigen::MatrixXd factors = pca_factors(panel, r).factors;
  Eigen::MatrixXd loadings = Eigen::MatrixXd::Zero(n, r);

  CdgFit out;
  double prev = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= max_outer; ++outer) {
    out.iters = outer;
    static const bool cold = std::getenv("QFA_CDG_COLD") != nullptr;
    for (Eigen::Index i = 0; i < n; ++i) {
      try {
        Eigen::VectorXd warm = loadings.row(i).transpose();
        loadings.row(i) =
            qreg_fit(panel.values.col(i), factors, tau, opts,
                     (outer == 1 || cold) ? nullptr : &warm);
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "cdg_fit: loading step failed for series " << (i + 1)
            << " at outer iteration " << outer << ": " << e.what();
        throw NumericalError(msg.str());
      }
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      try {
        Eigen::VectorXd warm = factors.row(t).transpose();
        factors.row(t) = qreg_fit(panel.values.row(t).transpose(), loadings,
                                  tau, opts, cold ? nullptr : &warm);
      } catch (const std::exception& e) {
        std::ostringstream msg;
        msg << "cdg_fit: factor step failed for period " << (t + 1)
            << " at outer iteration " << outer << ": " << e.what();
        throw NumericalError(msg.str());
      }
    }

    // Renormalize to factors'factors / T = I without changing the product.
    Eigen::MatrixXd gram = factors.transpose() * factors / static_cast<double>(T);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
      throw NumericalError("cdg_fit: factor gram matrix is rank deficient");
    Eigen::MatrixXd chol = llt.matrixL();
    factors = chol.triangularView<Eigen::Lower>()
                  .transpose()
                  .solve<Eigen::OnTheRight>(factors);
    loadings = loadings * chol;
    apply_sign_convention(loadings, factors);

    Eigen::MatrixXd resid = panel.values - factors * loadings.transpose();
    double loss = total_smoothed_loss(resid, tau, opts.eps);
    out.loss_trace.push_back(loss);
    if (prev - loss < tol * (1.0 + std::abs(loss))) {
      out.converged = true;
      break;
    }
    prev = loss;
  }

  out.factors = std::move(factors);
  out.loadings = std::move(loadings);
  Eigen::MatrixXd resid = panel.values - out.factors * out.loadings.transpose();
  out.final_loss = total_check_loss(resid, tau);
  return out;
}

}  // namespace qfa
