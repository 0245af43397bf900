#include "qfa/panel.hpp"

#include <cmath>
#include <utility>

namespace qfa {

Panel::Panel(Eigen::MatrixXd values_in, std::vector<std::string> time_labels_in,
             std::vector<std::string> series_labels_in)
    : values(std::move(values_in)),
      time_labels(std::move(time_labels_in)),
      series_labels(std::move(series_labels_in)) {
  if (values.rows() < 2 || values.cols() < 2)
    throw InputError("panel must have at least 2 rows and 2 columns, got " +
                     std::to_string(values.rows()) + "x" +
                     std::to_string(values.cols()));
  if (static_cast<Eigen::Index>(time_labels.size()) != values.rows())
    throw InputError("panel has " + std::to_string(values.rows()) +
                     " rows but " + std::to_string(time_labels.size()) +
                     " time labels");
  if (static_cast<Eigen::Index>(series_labels.size()) != values.cols())
    throw InputError("panel has " + std::to_string(values.cols()) +
                     " columns but " + std::to_string(series_labels.size()) +
                     " series labels");
  for (Eigen::Index t = 0; t < values.rows(); ++t)
    for (Eigen::Index i = 0; i < values.cols(); ++i)
      if (!std::isfinite(values(t, i)))
        throw InputError("non-finite panel entry at row " + std::to_string(t + 1) +
                         ", series " + series_labels[static_cast<std::size_t>(i)]);
}

Panel make_panel(Eigen::MatrixXd values) {
  std::vector<std::string> times, series;
  times.reserve(static_cast<std::size_t>(values.rows()));
  series.reserve(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index t = 0; t < values.rows(); ++t)
    times.push_back("t" + std::to_string(t + 1));
  for (Eigen::Index i = 0; i < values.cols(); ++i)
    series.push_back("s" + std::to_string(i + 1));
  return Panel(std::move(values), std::move(times), std::move(series));
}

QuantileSpec make_quantile_spec(double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("quantile level must lie strictly in (0,1), got " +
                      std::to_string(tau));
  double denom = tau * (1.0 - tau);
  return QuantileSpec{tau, (1.0 - 2.0 * tau) / denom, std::sqrt(2.0 / denom)};
}

double check_loss(double u, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw ConfigError("quantile level must lie strictly in (0,1), got " +
                      std::to_string(tau));
  return u * (tau - (u <= 0.0 ? 1.0 : 0.0));
}

void EstimatorConfig::validate(Eigen::Index n_series) const {
  if (n_factors < 1)
    throw ConfigError("n_factors must be >= 1, got " + std::to_string(n_factors));
  if (n_factors >= n_series)
    throw ConfigError("n_factors must be smaller than the number of series (" +
                      std::to_string(n_factors) + " >= " +
                      std::to_string(n_series) + ")");
  for (const auto& q : quantiles)
    if (!(q.tau > 0.0 && q.tau < 1.0))
      throw ConfigError("quantile level must lie strictly in (0,1), got " +
                        std::to_string(q.tau));
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(a0 > 0.0 && b0 > 0.0 && r0 > 0.0 && s0 > 0.0))
    throw ConfigError("prior hyperparameters must all be > 0");
}

}  // namespace qfa
