#pragma once

#include <cstdint>
#include <random>

namespace qfa {

// Random generator used everywhere the library needs draws. The engine is
// std::mt19937_64 but every distribution transform is implemented here, so
// a fixed seed yields the same stream on any standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on (0, 1); never returns 0 so logs are safe.
  double uniform();

  double normal();
  double exponential(double mean);

  // Shape/rate parameterization (mean = shape / rate).
  double gamma(double shape, double rate);

  // Shape/scale parameterization; reciprocal of a gamma draw.
  double inv_gamma(double shape, double scale);

  double chi_squared(double dof);
  double student_t(double dof);

  // Wald distribution with the given mean and shape parameter.
  double inverse_gaussian(double mean, double shape);

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Hash-mixes (master, stream, index) into a seed for an independent stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index);

}  // namespace qfa
