#include "qfa/al_mixture.hpp"

#include <cmath>
#include <stdexcept>

#include "qfa/panel.hpp"

namespace qfa {

GigMoments gig_moments(const GigHalf& p) {
  if (!(p.a > 0.0) || !(p.b > 0.0))
    throw std::domain_error("gig_moments: parameters must be > 0");
  return GigMoments{std::sqrt(p.b / p.a) + 1.0 / p.a, std::sqrt(p.a / p.b)};
}

double inv_gamma_mean_inverse(const InvGammaParams& p) {
  if (!(p.shape > 0.0) || !(p.scale > 0.0))
    throw std::domain_error("inv_gamma_mean_inverse: parameters must be > 0");
  return p.shape / p.scale;
}

double inv_gamma_mean_log(const InvGammaParams& p) {
  return std::log(p.scale) - digamma(p.shape);
}

double inv_gamma_entropy(const InvGammaParams& p) {
  return p.shape + std::log(p.scale) + std::lgamma(p.shape) -
         (1.0 + p.shape) * digamma(p.shape);
}

double gamma_mean(const GammaParams& p) { return p.shape / p.rate; }

double gamma_mean_log(const GammaParams& p) {
  return digamma(p.shape) - std::log(p.rate);
}

double gamma_entropy(const GammaParams& p) {
  return p.shape - std::log(p.rate) + std::lgamma(p.shape) +
         (1.0 - p.shape) * digamma(p.shape);
}

double al_log_density(double u, double tau, double sigma) {
  if (!(sigma > 0.0))
    throw std::domain_error("al_log_density: sigma must be > 0");
  return std::log(tau * (1.0 - tau) / sigma) - check_loss(u, tau) / sigma;
}

double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: argument must be > 0");
  double value = 0.0;
  // Recurrence up to the asymptotic region.
  while (x < 10.0) {
    value -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x;
  double inv2 = inv * inv;
  // log(x) - 1/(2x) - sum B_{2k} / (2k x^{2k})
  double series = inv2 * (1.0 / 12.0 -
                  inv2 * (1.0 / 120.0 -
                  inv2 * (1.0 / 252.0 -
                  inv2 * (1.0 / 240.0 -
                  inv2 * (1.0 / 132.0 -
                  inv2 * (691.0 / 32760.0))))));
  return value + std::log(x) - 0.5 * inv - series;
}

}  // namespace qfa
