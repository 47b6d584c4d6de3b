#ifndef UHMOM_NUMERICS_HPP
#define UHMOM_NUMERICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>

// Scalar special functions, quadrature rules and the seeded RNG shared by the
// whole library. Everything here is deterministic and platform-independent:
// the RNG layer draws through explicit bit recipes instead of the unspecified
// std <random> distributions.

namespace uhm::num {

double norm_pdf(double x);
double norm_cdf(double x);

// Inverse standard normal CDF, Wichura's rational approximation (AS 241,
// PPND16 precision). Relative error below 1e-15 on (0,1).
double norm_quantile(double p);

// Regularized incomplete gamma P(a,x) and Q(a,x) = 1 - P(a,x), by the usual
// series / continued-fraction split at x = a + 1.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Chi-square survival function and quantile with d degrees of freedom.
// chi2_quantile inverts the survival function by bracketed bisection to 1e-9.
double chi2_sf(double x, int d);
double chi2_quantile(double zeta, int d);

// Gauss-Hermite rule for the physicists' weight exp(-x^2), computed from the
// Jacobi matrix (Golub-Welsch). sum_i w_i f(x_i) ~ int f(x) exp(-x^2) dx.
struct QuadRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};
QuadRule gauss_hermite(int n);

// Same rule transformed to the standard normal weight:
// sum_i w_i f(x_i) ~ int f(x) phi(x) dx.
QuadRule gauss_hermite_normal(int n);

// 64-bit finalizer from splitmix64; used to derive independent substream
// seeds as mix64(master + GOLDEN * (index + 1)).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Seeded generator. mt19937_64 is fully specified by the standard, and the
// draws below are explicit functions of its raw output, so every stream is
// bit-reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on (0,1): top 53 bits, offset so 0 is excluded.
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }
  // Standard normal by inverse-CDF sampling.
  double normal() { return norm_quantile(uniform()); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Index j with probability masses[j]; masses need not be normalized.
  int discrete(const Eigen::VectorXd& masses);

 private:
  std::mt19937_64 gen_;
};

}  // namespace uhm::num

#endif
