#include "qfa/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace qfa {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double Rng::uniform() {
  // 53-bit mantissa; map 0 to the smallest representable step.
  double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  return u > 0.0 ? u : 0x1.0p-53;
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double radius = std::sqrt(-2.0 * std::log(u1));
  spare_ = radius * std::sin(kTwoPi * u2);
  have_spare_ = true;
  return radius * std::cos(kTwoPi * u2);
}

double Rng::exponential(double mean) {
  if (mean <= 0.0) throw std::domain_error("exponential: mean must be > 0");
  return -mean * std::log(uniform());
}

double Rng::gamma(double shape, double rate) {
  if (shape <= 0.0 || rate <= 0.0)
    throw std::domain_error("gamma: shape and rate must be > 0");
  // Marsaglia-Tsang squeeze; boost shapes below one.
  if (shape < 1.0) {
    double g = gamma(shape + 1.0, 1.0);
    double u = uniform();
    return g * std::pow(u, 1.0 / shape) / rate;
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double Rng::inv_gamma(double shape, double scale) {
  return 1.0 / gamma(shape, scale);
}

double Rng::chi_squared(double dof) { return gamma(0.5 * dof, 0.5); }

double Rng::student_t(double dof) {
  return normal() / std::sqrt(chi_squared(dof) / dof);
}

double Rng::inverse_gaussian(double mean, double shape) {
  if (mean <= 0.0 || shape <= 0.0)
    throw std::domain_error("inverse_gaussian: mean and shape must be > 0");
  // Michael-Schucany-Haas transformation.
  double z = normal();
  double v = z * z;
  double x = mean + mean * mean * v / (2.0 * shape) -
             mean / (2.0 * shape) *
                 std::sqrt(4.0 * mean * shape * v + mean * mean * v * v);
  if (uniform() <= mean / (mean + x)) return x;
  return mean * mean / x;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index) {
  // splitmix64 finalizer applied twice over the mixed words.
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return mix(mix(master ^ mix(stream)) + index);
}

}  // namespace qfa
