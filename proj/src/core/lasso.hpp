#ifndef UHMOM_LASSO_HPP
#define UHMOM_LASSO_HPP

#include <Eigen/Dense>
#include <vector>

// Penalized within-transformed least squares with data-driven penalty
// loadings. Inputs arrive already within-transformed (y = Qy, W = QW per
// unit) and stacked by unit: row i*T + t holds unit i, period t.

namespace uhm::lasso {

struct Config {
  double c = 1.1;        // penalty level multiplier
  double gamma = 0.0;    // tail probability; 0 = default 0.1/log(p v nT)
  int refinements = 3;   // total fits: one initial + (refinements-1) refined
  double cd_tol = 1e-8;  // stop when max coefficient change falls below this
  int cd_max_iter = 10000;
};

struct Loadings {
  Eigen::VectorXd phi;
  bool floored = false;  // some column produced a loading below the 1e-12 floor
};

struct Fit {
  Eigen::VectorXd beta;
  Loadings loadings;  // loadings used by the final solve
  double c_n = 0.0;
  std::vector<int> active_set;
  double objective = 0.0;
  int sweeps = 0;  // coordinate-descent sweeps across all solves
  bool converged = true;
};

double gamma_default(int p, int n_train, int T);

// c_n = (c / sqrt(n_train*T)) * Phi^{-1}(1 - gamma/(2p)).
double tuning(int n_train, int T, int p, const Config& cfg);

// phi_j^2 = (1/(nT)) * sum_i (sum_t W_itj r_it)^2. The inner sum runs over a
// unit's periods before squaring, so within-unit cross products are kept.
// Initial loadings pass r = y; refined ones pass the fit residuals.
Loadings penalty_loadings(const Eigen::MatrixXd& w, const Eigen::VectorXd& r, int T);

// One penalized solve with fixed loadings, by cyclic coordinate descent.
Fit solve(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, int T,
          const Loadings& loadings, double c_n, const Config& cfg,
          const Eigen::VectorXd* warm_start = nullptr);

// Full pipeline: initial loadings from y, then refined-loading refits.
Fit fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& w, int T, const Config& cfg);

// Penalized objective (1/(nT))||y - W b||^2 + 2 c_n sum_j phi_j |b_j|.
double objective_value(const Eigen::VectorXd& y, const Eigen::MatrixXd& w,
                       const Eigen::VectorXd& beta, const Loadings& loadings,
                       double c_n);

}  // namespace uhm::lasso

#endif
