#include "core/lasso.hpp"

#include <cmath>
#include <stdexcept>

#include "core/numerics.hpp"

namespace uhm::lasso {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

double gamma_default(int p, int n_train, int T) {
  const double scale = std::max(p, n_train * T);
  return 0.1 / std::log(scale);
}

double tuning(int n_train, int T, int p, const Config& cfg) {
  if (n_train <= 0 || T <= 0 || p <= 0) {
    throw std::invalid_argument("lasso tuning: counts must be positive");
  }
  if (!(cfg.c > 1.0)) throw std::invalid_argument("lasso tuning: c must exceed 1");
  const double gamma = cfg.gamma > 0.0 ? cfg.gamma : gamma_default(p, n_train, T);
  const double tail = gamma / (2.0 * p);
  if (tail >= 1.0) throw std::invalid_argument("lasso tuning: gamma/(2p) must be below 1");
  return cfg.c / std::sqrt(static_cast<double>(n_train) * T) *
         num::norm_quantile(1.0 - tail);
}

Loadings penalty_loadings(const Eigen::MatrixXd& w, const Eigen::VectorXd& r, int T) {
  if (T <= 0 || w.rows() % T != 0 || w.rows() != r.size()) {
    throw std::invalid_argument("penalty_loadings: inconsistent dimensions");
  }
  const int n = static_cast<int>(w.rows()) / T;
  const int p = static_cast<int>(w.cols());
  const double nt = static_cast<double>(w.rows());
  Loadings out;
  out.phi.resize(p);
  for (int j = 0; j < p; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      double unit = 0.0;
      for (int t = 0; t < T; ++t) unit += w(i * T + t, j) * r(i * T + t);
      acc += unit * unit;
    }
    double phi = std::sqrt(acc / nt);
    if (phi < 1e-12) {
      phi = 1e-12;
      out.floored = true;
    }
    out.phi(j) = phi;
  }
  return out;
}

double objective_value(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                       const Eigen::VectorXd& beta, const Loadings& loadings,
                       double c_n) {
  const double nt = static_cast<double>(y.size());
  const double rss = (y - w * beta).squaredNorm() / nt;
  return rss + 2.0 * c_n * loadings.phi.cwiseProduct(beta.cwiseAbs()).sum();
}

Fit solve(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, int T,
          const Loadings& loadings, double c_n, const Config& cfg,
          const Eigen::VectorXd* warm_start) {
  const int p = static_cast<int>(w.cols());
  const double nt = static_cast<double>(y.size());
  if (loadings.phi.size() != p) {
    throw std::invalid_argument("lasso solve: loadings length mismatch");
  }
  Fit out;
  out.loadings = loadings;
  out.c_n = c_n;
  out.beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(p);

  // (1/(nT)) ||W_j||^2 per column; zero-variance columns never move.
  Eigen::VectorXd col_sq(p);
  for (int j = 0; j < p; ++j) col_sq(j) = w.col(j).squaredNorm() / nt;

  Eigen::VectorXd resid = y - w * out.beta;
  out.converged = false;
  for (int sweep = 0; sweep < cfg.cd_max_iter; ++sweep) {
    double max_change = 0.0;
    for (int j = 0; j < p; ++j) {
      if (col_sq(j) <= 0.0) continue;
      const double old = out.beta(j);
      const double z = w.col(j).dot(resid) / nt + col_sq(j) * old;
      const double next = soft_threshold(z, c_n * loadings.phi(j)) / col_sq(j);
      if (next != old) {
        resid -= (next - old) * w.col(j);
        out.beta(j) = next;
        max_change = std::max(max_change, std::abs(next - old));
      }
    }
    ++out.sweeps;
    if (max_change < cfg.cd_tol) {
      out.converged = true;
      break;
    }
  }
  out.objective = objective_value(y, w, out.beta, loadings, c_n);
  for (int j = 0; j < p; ++j) {
    if (out.beta(j) != 0.0) out.active_set.push_back(j);
  }
  return out;
}

Fit fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, int T, const Config& cfg) {
  if (cfg.refinements < 1) throw std::invalid_argument("lasso fit: need at least one fit");
  const int n = static_cast<int>(w.rows()) / std::max(T, 1);
  const double c_n = tuning(n, T, static_cast<int>(w.cols()), cfg);

  Loadings loadings = penalty_loadings(w, y, T);
  Fit current = solve(y, w, T, loadings, c_n, cfg);
  int total_sweeps = current.sweeps;
  bool all_converged = current.converged;
  for (int k = 1; k < cfg.refinements; ++k) {
    const Eigen::VectorXd resid = y - w * current.beta;
    loadings = penalty_loadings(w, resid, T);
    current = solve(y, w, T, loadings, c_n, cfg, &current.beta);
    total_sweeps += current.sweeps;
    all_converged = all_converged && current.converged;
  }
  current.sweeps = total_sweeps;
  current.converged = all_converged;
  return current;
}

}  // namespace uhm::lasso
