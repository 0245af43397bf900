#pragma once

namespace qfa {

// GIG(1/2, a, b): density proportional to z^{-1/2} exp(-(a z + b / z) / 2).
struct GigHalf {
  double a;
  double b;
};

// Inverse gamma with density proportional to x^{-shape-1} exp(-scale / x).
struct InvGammaParams {
  double shape;
  double scale;
};

// Gamma in shape/rate form, density proportional to x^{shape-1} exp(-rate x).
struct GammaParams {
  double shape;
  double rate;
};

struct GigMoments {
  double mean_z;      // E[z]
  double mean_inv_z;  // E[1/z]
};

// Closed-form GIG(1/2) moments. The Bessel ratio K_{3/2}(x)/K_{1/2}(x)
// equals 1 + 1/x at half-integer order, which collapses the general
// expressions to
//   E[z]   = sqrt(b/a) + 1/a,
//   E[1/z] = sqrt(a/b).
// These are exact for any argument size, so no large-argument branch is
// needed where exp(-sqrt(ab)) would underflow in the Bessel form.
GigMoments gig_moments(const GigHalf& p);

double inv_gamma_mean_inverse(const InvGammaParams& p);  // E[1/x] = shape/scale
double inv_gamma_mean_log(const InvGammaParams& p);      // E[log x]
double inv_gamma_entropy(const InvGammaParams& p);

double gamma_mean(const GammaParams& p);      // E[x] = shape/rate
double gamma_mean_log(const GammaParams& p);  // E[log x]
double gamma_entropy(const GammaParams& p);

// Log density of the asymmetric Laplace distribution at quantile level tau
// with scale sigma: log(tau (1-tau) / sigma) - rho_tau(u) / sigma.
double al_log_density(double u, double tau, double sigma);

double digamma(double x);

}  // namespace qfa
