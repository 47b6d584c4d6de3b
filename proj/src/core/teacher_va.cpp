#include "teacher_va.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace uhm::tva {

double hermite(int j, double x) {
  if (j < 0) throw std::invalid_argument("hermite: negative degree");
  if (j == 0) return 1.0;
  double hm = 1.0;  // H_0
  double h = x;     // H_1
  for (int m = 1; m < j; ++m) {
    double hp = x * h - static_cast<double>(m) * hm;
    hm = h;
    h = hp;
  }
  return h;
}

double hermite_derivative(int j, double x) {
  if (j < 0) throw std::invalid_argument("hermite_derivative: negative degree");
  if (j == 0) return 0.0;
  return static_cast<double>(j) * hermite(j - 1, x);
}

double moment_basis(int k, double y, double theta) {
  if (theta <= 0.0)
    throw std::invalid_argument("moment_basis: theta must be positive");
  return std::pow(theta, k) * hermite(k, y / theta);
}

AdmissibilityReport check_admissibility(const Functional& f, double theta) {
  if (theta <= 0.0)
    throw std::invalid_argument("check_admissibility: theta must be positive");
  if (f.R <= 0.0 || f.R >= 1.0)
    throw std::invalid_argument("check_admissibility: R must lie in (0,1)");
  AdmissibilityReport rep;
  double prev_term = 0.0;
  int prev_j = -1;
  double last_term = 0.0;
  int last_j = -1;
  double fact = 1.0;  // j!
  double pw = 1.0;    // theta^{2j} / R^j
  for (int j = 0; j < f.r.size(); ++j) {
    if (j > 0) {
      fact *= static_cast<double>(j);
      pw *= theta * theta / f.R;
    }
    double rj = f.r(j);
    if (rj == 0.0) continue;
    double term = fact * pw * rj * rj;
    rep.keysum += term;
    // Ratio of terms at consecutive orders, the trend signal for whether a
    // continuation of the series would diverge.
    if (prev_j == j - 1 && prev_term > 0.0) rep.tail_ratio = term / prev_term;
    prev_term = term;
    prev_j = j;
    last_term = term;
    last_j = j;
  }
  // Short coefficient lists are exact polynomials: their series terminates
  // and the sum is finite by construction. The ratio test targets deep
  // truncations of infinite expansions, where growing terms at the tail
  // mean the variance bound is diverging and the truncation untrustworthy.
  bool deep = last_j >= 12;
  bool negligible_tail = last_term < 1e-12 * (1.0 + rep.keysum);
  rep.pass = std::isfinite(rep.keysum) &&
             (!deep || rep.tail_ratio < 1.0 || negligible_tail);
  return rep;
}

namespace {

void require_admissible(const Functional& f, double theta, const char* where) {
  AdmissibilityReport rep = check_admissibility(f, theta);
  if (!rep.pass) {
    throw std::runtime_error(
        std::string(where) +
        ": admissibility condition violated (series sum j! theta^{2j} r_j^2 / "
        "R^j diverges; tail ratio " +
        std::to_string(rep.tail_ratio) + " at R = " + std::to_string(f.R) +
        ")");
  }
}

}  // namespace

double analytic_moment(const Functional& f, double y, double theta) {
  require_admissible(f, theta, "analytic_moment");
  double x = y / theta;
  double val = 0.0;
  double hm = 0.0, h = 1.0;  // H_{j-1}, H_j rolling pair
  double tj = 1.0;           // theta^j
  for (int j = 0; j < f.r.size(); ++j) {
    if (j > 0) {
      double hp = x * h - static_cast<double>(j - 1) * hm;
      hm = h;
      h = hp;
      tj *= theta;
    }
    val += tj * f.r(j) * h;
  }
  return val;
}

double analytic_moment_dtheta(const Functional& f, double y, double theta) {
  require_admissible(f, theta, "analytic_moment_dtheta");
  double x = y / theta;
  double val = 0.0;
  double hm = 0.0, h = 1.0;
  double tj = 1.0;
  bool have_dr = f.r_dtheta.size() > 0;
  if (have_dr && f.r_dtheta.size() != f.r.size())
    throw std::invalid_argument(
        "analytic_moment_dtheta: r_dtheta length mismatch");
  for (int j = 0; j < f.r.size(); ++j) {
    if (j > 0) {
      double hp = x * h - static_cast<double>(j - 1) * hm;
      hm = h;
      h = hp;
      tj *= theta;
    }
    double jd = static_cast<double>(j);
    // d/dtheta [theta^j r_j H_j(y/theta)]: product rule plus the chain rule
    // through the argument, using H_j' = j H_{j-1}.
    if (j > 0) {
      val += jd * (tj / theta) * f.r(j) * h;
      val -= y * tj / (theta * theta) * jd * f.r(j) * hm;
    }
    if (have_dr) val += tj * f.r_dtheta(j) * h;
  }
  return val;
}

double tail_bound(const Functional& f, double y, double theta) {
  if (theta <= 0.0)
    throw std::invalid_argument("tail_bound: theta must be positive");
  int last = -1;
  for (int j = 0; j < f.r.size(); ++j)
    if (f.r(j) != 0.0) last = j;
  if (last < 0) return 0.0;
  return std::abs(std::pow(theta, last) * f.r(last) * hermite(last, y / theta));
}

int adaptive_truncation(const Functional& f, double theta, double max_abs_y) {
  if (theta <= 0.0)
    throw std::invalid_argument("adaptive_truncation: theta must be positive");
  int cap = std::min<int>(60, static_cast<int>(f.r.size()) - 1);
  for (int J = 0; J <= cap; ++J) {
    Functional head;
    head.r = f.r.head(J + 1);
    head.R = f.R;
    if (tail_bound(head, max_abs_y, theta) < 1e-10) return J;
  }
  return cap;
}

Auxiliary variance_auxiliary(double mu_y, double sigma_alpha_sq) {
  Auxiliary aux;
  aux.g1 = [mu_y, sigma_alpha_sq](double y, double theta) {
    double d = y - mu_y;
    return d * d - theta * theta - sigma_alpha_sq;
  };
  aux.g1_dtheta = [](double, double theta) { return -2.0 * theta; };
  return aux;
}

Orthogonalized orthogonalize(const Functional& f, const Auxiliary& aux,
                             const Eigen::VectorXd& y, double theta_hat,
                             double psi0) {
  if (y.size() == 0) throw std::invalid_argument("orthogonalize: empty sample");
  if (!aux.g1 || !aux.g1_dtheta)
    throw std::invalid_argument("orthogonalize: auxiliary evaluators missing");
  require_admissible(f, theta_hat, "orthogonalize");
  double n = static_cast<double>(y.size());
  double d0 = 0.0, d1 = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    d0 += analytic_moment_dtheta(f, y(i), theta_hat);
    d1 += aux.g1_dtheta(y(i), theta_hat);
  }
  d0 /= n;
  d1 /= n;
  if (std::abs(d1) < 1e-8)
    throw std::runtime_error(
        "orthogonalize: auxiliary equation irrelevant for theta (mean "
        "derivative below 1e-8)");
  Orthogonalized orth;
  orth.dg0_mean = d0;
  orth.dg1_mean = d1;
  orth.gamma0 = d0 / d1;
  orth.theta = theta_hat;
  orth.psi0 = psi0;
  return orth;
}

double eval_lr(const Functional& f, const Auxiliary& aux,
               const Orthogonalized& orth, double y) {
  return analytic_moment(f, y, orth.theta) - orth.psi0 -
         orth.gamma0 * aux.g1(y, orth.theta);
}

}  // namespace uhm::tva
