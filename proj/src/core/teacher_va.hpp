#ifndef UHMOM_TEACHER_VA_HPP
#define UHMOM_TEACHER_VA_HPP

#include <Eigen/Dense>
#include <functional>

// Debiased moments for analytic functionals E[r(alpha)] in the Gaussian
// deconvolution model Y = alpha + theta0 u, u ~ N(0,1) independent of alpha.
// Hermite polynomials (probabilists' convention) turn powers of alpha into
// observable transforms of Y; an auxiliary estimating equation for theta0
// supplies the correction direction.

namespace uhm::tva {

// H_0 = 1, H_1 = x, H_{j+1} = x H_j - j H_{j-1}.
double hermite(int j, double x);
// H_j' = j H_{j-1}.
double hermite_derivative(int j, double x);

// theta^k H_k(y/theta); conditional mean alpha^k given alpha.
double moment_basis(int k, double y, double theta);

struct Functional {
  // Maclaurin coefficients r_0..r_J of r(alpha) = sum r_j alpha^j.
  Eigen::VectorXd r;
  // dr_j/dtheta when the coefficients themselves depend on theta; empty
  // means all zero (the usual case).
  Eigen::VectorXd r_dtheta;
  double R = 0.5;  // radius parameter of the admissibility condition
};

struct AdmissibilityReport {
  bool pass = false;
  double keysum = 0.0;     // sum of j! theta^{2j} r_j^2 / R^j over included j
  double tail_ratio = 0.0; // last ratio of consecutive nonzero terms
};
// Finite-sum diagnostic for the variance condition: the series passes when
// its terms are shrinking (tail ratio < 1) or already negligible.
AdmissibilityReport check_admissibility(const Functional& f, double theta);

// g0(y, theta) = sum_j theta^j r_j H_j(y/theta). Throws if the
// admissibility diagnostic fails.
double analytic_moment(const Functional& f, double y, double theta);
double analytic_moment_dtheta(const Functional& f, double y, double theta);

// Magnitude of the last nonzero series term at y, a practical proxy for the
// truncation error of g0.
double tail_bound(const Functional& f, double y, double theta);

// Smallest truncation (index of last kept coefficient) whose term magnitude
// at max_abs_y falls below 1e-10, capped at 60.
int adaptive_truncation(const Functional& f, double theta, double max_abs_y);

struct Auxiliary {
  std::function<double(double y, double theta)> g1;
  std::function<double(double y, double theta)> g1_dtheta;
};

// The simulation harness's auxiliary equation: g1 = (y - mu_y)^2 - theta^2
// - sigma_alpha_sq, valid when alpha has known variance.
Auxiliary variance_auxiliary(double mu_y, double sigma_alpha_sq);

struct Orthogonalized {
  double gamma0 = 0.0;
  double dg0_mean = 0.0;  // sample mean of dg0/dtheta
  double dg1_mean = 0.0;  // sample mean of dg1/dtheta
  double theta = 0.0;
  double psi0 = 0.0;
};

// Gamma0 = mean(dg0/dtheta) / mean(dg1/dtheta) on the sample; requires the
// denominator to stay away from zero (relevance of the auxiliary equation).
Orthogonalized orthogonalize(const Functional& f, const Auxiliary& aux,
                             const Eigen::VectorXd& y, double theta_hat,
                             double psi0);

// g(y) = g0(y, theta) - psi0 - Gamma0 g1(y, theta).
double eval_lr(const Functional& f, const Auxiliary& aux,
               const Orthogonalized& orth, double y);

}  // namespace uhm::tva

#endif
