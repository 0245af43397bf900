#include "qfa/pca.hpp"

#include <cmath>
#include <string>

namespace qfa {

StandardizedPanel standardize(const Panel& panel) {
  const Eigen::Index T = panel.rows(), n = panel.cols();
  Eigen::VectorXd means(n), sds(n);
  Eigen::MatrixXd out(T, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = panel.values.col(i).mean();
    double ss = (panel.values.col(i).array() - m).square().sum();
    double sd = std::sqrt(ss / static_cast<double>(T - 1));
    if (!(sd > 0.0))
      throw InputError("series '" + panel.series_labels[static_cast<std::size_t>(i)] +
                       "' is constant and cannot be standardized");
    means(i) = m;
    sds(i) = sd;
    out.col(i) = (panel.values.col(i).array() - m) / sd;
  }
  return StandardizedPanel{Panel(std::move(out), panel.time_labels, panel.series_labels),
                           std::move(means), std::move(sds)};
}

void apply_sign_convention(Eigen::MatrixXd& loadings, Eigen::MatrixXd& factors) {
  for (Eigen::Index j = 0; j < loadings.cols(); ++j) {
    double scale = loadings.col(j).cwiseAbs().maxCoeff();
    if (scale <= 0.0) continue;
    double lead = 0.0;
    for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
      if (std::abs(loadings(i, j)) > 1e-12 * scale) {
        lead = loadings(i, j);
        break;
      }
    }
    if (lead < 0.0) {
      loadings.col(j) = -loadings.col(j);
      factors.col(j) = -factors.col(j);
    }
  }
}

PcaFit pca_factors(const Panel& panel, int r) {
  const Eigen::Index T = panel.rows(), n = panel.cols();
  if (r < 1 || r > std::min(T, n))
    throw ConfigError("pca_factors: r must satisfy 1 <= r <= min(T,n), got r=" +
                      std::to_string(r) + " for a " + std::to_string(T) + "x" +
                      std::to_string(n) + " panel");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(panel.values,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double tol = static_cast<double>(std::max(T, n)) *
               std::numeric_limits<double>::epsilon() * sv(0);
  if (sv(r - 1) <= tol)
    throw NumericalError("pca_factors: data matrix has rank below r=" +
                         std::to_string(r));

  PcaFit fit;
  fit.factors = std::sqrt(static_cast<double>(T)) * svd.matrixU().leftCols(r);
  fit.loadings = panel.values.transpose() * fit.factors / static_cast<double>(T);
  apply_sign_convention(fit.loadings, fit.factors);
  fit.explained_variance.resize(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j)
    fit.explained_variance[static_cast<std::size_t>(j)] =
        sv(j) * sv(j) / static_cast<double>(T - 1);
  return fit;
}

}  // namespace qfa
