#ifndef UHMOM_KOTLARSKI_HPP
#define UHMOM_KOTLARSKI_HPP

#include <Eigen/Dense>
#include <vector>

// Debiased moment construction for E[alpha^k] in the two-measurement factor
// model Y1 = alpha + eps1, Y2 = beta0 alpha + eps2 with independent
// components. The building blocks a_k depend only on (beta0, lower moments);
// the correction coefficients gamma are produced by a backward triangular
// recursion so that the combined moment has conditional mean
// beta0 (psi_k - alpha^k) given alpha, hence mean zero at the truth.

namespace uhm::kotlarski {

struct Sample {
  Eigen::VectorXd y1;
  Eigen::VectorXd y2;
};

// Raw data moments feeding the coefficient recursion. Index m holds E[Y1^m]
// (m = 0..K) and E[Y2 Y1^m] (m = 0..K-1). Sample means by default; tests can
// inject analytic values.
struct DataMoments {
  std::vector<double> y1_pow;
  std::vector<double> y2_y1_pow;
};
DataMoments sample_moments(const Sample& s, int K);

struct Coefficients {
  int K = 0;
  double beta0 = 0.0;
  double y1_mean = 0.0;
  // c(k-1, j-1) = c_{k,j}; lower triangular with c_{k,k} = beta0.
  Eigen::MatrixXd c;
  // b_known(k-1) = b_k - psi_k, the part built from moments of order < k.
  Eigen::VectorXd b_known;
  // gamma[k-1](j-1) = gamma_{k,j} for j = 1..k-1.
  std::vector<Eigen::VectorXd> gamma;
  // gamma_{k,0} = gamma0_const(k-1) + gamma0_slope * psi_k (affine in the
  // order-k moment, which is unknown while estimating order k).
  Eigen::VectorXd gamma0_const;
  double gamma0_slope = 0.0;
  Eigen::VectorXd psi_lower;  // psi_1..psi_{K-1} used to build b
};

// Builds every order k = 1..K. psi_lower supplies the lower moments
// psi_1..psi_{K-1} entering b and gamma_{k,0}. Requires |E[Y1]| > 1e-10.
Coefficients coefficients(int K, double beta0, const DataMoments& dm,
                          const Eigen::VectorXd& psi_lower);

// a_k(z) = beta0 psi_k - y2 y1^{k-1}
//          + sum_{j<k} [C(k-1,j-1) beta0 y1^{k-j} - C(k-1,j) y2 y1^{k-j-1}] psi_j.
// psi holds psi_1..psi_k.
double eval_a(int k, double y1, double y2, double beta0, const Eigen::VectorXd& psi);

// g_k(z) = a_k + sum_{j<k} gamma_{k,j} a_j + gamma_{k,0} (y2 - beta0 y1),
// evaluated at the trial value psi_k for the order-k moment. The correction
// term has conditional mean zero given alpha, and its sign is chosen so the
// beta-derivative of E[g_k] vanishes at the truth.
double eval_g(int k, double y1, double y2, const Coefficients& coeffs, double psi_k);

struct MomentFit {
  Eigen::VectorXd psi;     // estimated moments, orders 1..K
  Eigen::VectorXd moment;  // sample mean of g_k at the solution (~ 0)
  Eigen::VectorXd slope;   // d mean(g_k) / d psi_k, the solve's denominator
};

// Sequential estimation: for k = 1..K plug the previous solutions into the
// coefficients, then solve mean(g_k) = 0 for psi_k (g_k is affine in psi_k).
MomentFit estimate_moments(const Sample& s, double beta0, int K);

}  // namespace uhm::kotlarski

#endif
