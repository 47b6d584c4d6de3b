#include "core/kotlarski.hpp"

#include <cmath>
#include <stdexcept>

namespace uhm::kotlarski {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return factorial(n) / (factorial(k) * factorial(n - k));
}

}  // namespace

DataMoments sample_moments(const Sample& s, int K) {
  if (s.y1.size() != s.y2.size() || s.y1.size() < 2) {
    throw std::invalid_argument("sample_moments: need paired observations, n >= 2");
  }
  const int n = static_cast<int>(s.y1.size());
  DataMoments dm;
  dm.y1_pow.assign(K + 1, 0.0);
  dm.y2_y1_pow.assign(K, 0.0);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int m = 0; m <= K; ++m) {
      dm.y1_pow[m] += p;
      if (m < K) dm.y2_y1_pow[m] += s.y2(i) * p;
      p *= s.y1(i);
    }
  }
  for (double& v : dm.y1_pow) v /= n;
  for (double& v : dm.y2_y1_pow) v /= n;
  return dm;
}

Coefficients coefficients(int K, double beta0, const DataMoments& dm,
                          const Eigen::VectorXd& psi_lower) {
  if (K < 1) throw std::invalid_argument("coefficients: K must be positive");
  if (beta0 == 0.0) throw std::invalid_argument("coefficients: beta0 must be nonzero");
  if (static_cast<int>(dm.y1_pow.size()) < K + 1 ||
      static_cast<int>(dm.y2_y1_pow.size()) < K) {
    throw std::invalid_argument("coefficients: data moments shorter than K");
  }
  if (psi_lower.size() < K - 1) {
    throw std::invalid_argument("coefficients: need the K-1 lower moments");
  }

  Coefficients co;
  co.K = K;
  co.beta0 = beta0;
  co.y1_mean = dm.y1_pow[1];
  if (std::abs(co.y1_mean) <= 1e-10) {
    throw std::runtime_error(
        "coefficients: E[Y1] is numerically zero; the mean-correction step "
        "divides by it, so a nonzero first moment of Y1 is required");
  }
  co.psi_lower = psi_lower.head(K - 1);

  co.c = Eigen::MatrixXd::Zero(K, K);
  for (int k = 1; k <= K; ++k) {
    co.c(k - 1, k - 1) = beta0;
    for (int j = 1; j < k; ++j) {
      const double fac = factorial(k - 1);
      co.c(k - 1, j - 1) =
          fac * (dm.y1_pow[k - j] * beta0 / (factorial(k - j) * factorial(j - 1)) -
                 dm.y2_y1_pow[k - j - 1] / (factorial(k - j - 1) * factorial(j)));
    }
  }

  // b_k is the beta-derivative of E[a_k]: psi_k plus the psi_j terms whose
  // coefficients are the C(k-1, j-1) binomials from a_k itself.
  co.b_known = Eigen::VectorXd::Zero(K);
  for (int k = 1; k <= K; ++k) {
    double acc = 0.0;
    for (int j = 1; j < k; ++j) {
      acc += dm.y1_pow[k - j] / (factorial(j - 1) * factorial(k - j)) *
             co.psi_lower(j - 1);
    }
    co.b_known(k - 1) = factorial(k - 1) * acc;
  }

  // Backward substitution j = k-1, ..., 1 for each order.
  co.gamma.resize(K);
  for (int k = 1; k <= K; ++k) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(k - 1);
    for (int j = k - 1; j >= 1; --j) {
      double acc = co.c(k - 1, j - 1);
      for (int h = j + 1; h <= k - 1; ++h) acc += g(h - 1) * co.c(h - 1, j - 1);
      g(j - 1) = -acc / beta0;
    }
    co.gamma[k - 1] = g;
  }

  co.gamma0_slope = 1.0 / co.y1_mean;
  co.gamma0_const = Eigen::VectorXd::Zero(K);
  for (int k = 1; k <= K; ++k) {
    double acc = co.b_known(k - 1);
    for (int h = 1; h <= k - 1; ++h) {
      const double b_h = co.psi_lower(h - 1) + co.b_known(h - 1);
      acc += co.gamma[k - 1](h - 1) * b_h;
    }
    co.gamma0_const(k - 1) = acc / co.y1_mean;
  }
  return co;
}

double eval_a(int k, double y1, double y2, double beta0, const Eigen::VectorXd& psi) {
  if (k < 1 || psi.size() < k) {
    throw std::invalid_argument("eval_a: psi must hold orders 1..k");
  }
  double val = beta0 * psi(k - 1) - y2 * std::pow(y1, k - 1);
  for (int j = 1; j < k; ++j) {
    val += (binom(k - 1, j - 1) * beta0 * std::pow(y1, k - j) -
            binom(k - 1, j) * y2 * std::pow(y1, k - j - 1)) *
           psi(j - 1);
  }
  return val;
}

double eval_g(int k, double y1, double y2, const Coefficients& coeffs, double psi_k) {
  if (k < 1 || k > coeffs.K) throw std::invalid_argument("eval_g: order out of range");
  // full psi vector for order k: stored lower moments plus the trial value
  Eigen::VectorXd psi(k);
  for (int j = 1; j < k; ++j) psi(j - 1) = coeffs.psi_lower(j - 1);
  psi(k - 1) = psi_k;

  double val = eval_a(k, y1, y2, coeffs.beta0, psi);
  for (int j = 1; j < k; ++j) {
    val += coeffs.gamma[k - 1](j - 1) * eval_a(j, y1, y2, coeffs.beta0, psi);
  }
  // The mean correction carries a plus sign: its beta-derivative
  // -gamma_{k,0} E[Y1] then cancels b_k + sum_h gamma_{k,h} b_h exactly,
  // which is what makes the moment insensitive to the plugged-in loading.
  const double gamma0 = coeffs.gamma0_const(k - 1) + coeffs.gamma0_slope * psi_k;
  val += gamma0 * (y2 - coeffs.beta0 * y1);
  return val;
}

MomentFit estimate_moments(const Sample& s, double beta0, int K) {
  const DataMoments dm = sample_moments(s, K);
  const int n = static_cast<int>(s.y1.size());

  MomentFit fit;
  fit.psi = Eigen::VectorXd::Zero(K);
  fit.moment = Eigen::VectorXd::Zero(K);
  fit.slope = Eigen::VectorXd::Zero(K);

  for (int k = 1; k <= K; ++k) {
    const Coefficients co = coefficients(k, beta0, dm, fit.psi.head(std::max(k - 1, 0)));
    // mean(g_k) is affine in psi_k; two evaluations pin the line
    double m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < n; ++i) {
      m0 += eval_g(k, s.y1(i), s.y2(i), co, 0.0);
      m1 += eval_g(k, s.y1(i), s.y2(i), co, 1.0);
    }
    m0 /= n;
    m1 /= n;
    const double slope = m1 - m0;
    fit.slope(k - 1) = slope;
    if (std::abs(slope) < 1e-10) {
      throw std::runtime_error(
          "estimate_moments: the order-" + std::to_string(k) +
          " moment does not respond to psi_" + std::to_string(k) +
          "; the target is not identified on this sample");
    }
    fit.psi(k - 1) = -m0 / slope;
    double at_sol = 0.0;
    for (int i = 0; i < n; ++i) {
      at_sol += eval_g(k, s.y1(i), s.y2(i), co, fit.psi(k - 1));
    }
    fit.moment(k - 1) = at_sol / n;
  }
  return fit;
}

}  // namespace uhm::kotlarski
