#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qfa/panel.hpp"

namespace qfa {

struct StandardizedPanel {
  Panel panel;            // per-series mean 0, sample sd 1
  Eigen::VectorXd means;  // n
  Eigen::VectorXd sds;    // n, sample sd (T-1 divisor)
};

// Throws InputError naming the offending series if any column is constant.
StandardizedPanel standardize(const Panel& panel);

struct PcaFit {
  Eigen::MatrixXd factors;   // T x r, normalized so factors'factors / T = I
  Eigen::MatrixXd loadings;  // n x r, least squares of the panel on factors
  std::vector<double> explained_variance;  // nonincreasing, variance units
};

// Principal-component factors via the SVD of the data matrix:
// factors = sqrt(T) * U_r, loadings = X'F / T. Column signs are fixed so each
// loading column's first nonzero entry is positive.
PcaFit pca_factors(const Panel& panel, int r);

// Shared sign convention: flips columns of (loadings, factors) jointly so the
// first entry of each loading column that is nonzero (relative to the column
// scale) is positive.
void apply_sign_convention(Eigen::MatrixXd& loadings, Eigen::MatrixXd& factors);

}  // namespace qfa
