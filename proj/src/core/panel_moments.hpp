#ifndef UHMOM_PANEL_MOMENTS_HPP
#define UHMOM_PANEL_MOMENTS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <variant>
#include <vector>

#include "core/lasso.hpp"
#include "core/linops.hpp"

// Debiased moment functions for the panel model Y_i = W_i b0 + V_i a_i + e_i
// with unit-specific loadings a_i. Three targets are supported: linear
// combinations of b0, means of linear combinations of a_i, and mean
// quadratic forms in a_i under a variance restriction vec(Sigma) = S2 w0.
// Each moment is built so that its expectation has a vanishing derivative
// in every first-stage nuisance, which is what lets cross-fitted averages
// of machine-learned first stages drive valid score tests.

namespace uhm::panel {

struct Dataset {
  int n = 0, T = 0, p = 0, q = 0;
  std::vector<Eigen::VectorXd> Y;  // each length T
  std::vector<Eigen::MatrixXd> W;  // each T x p
  std::vector<Eigen::MatrixXd> V;  // each T x q
  // Shape and finiteness checks; throws naming the offending unit.
  void validate() const;
  // Units whose V_i spans all of R^T leave no residual variation for the
  // common-parameter moments (Q_i = 0).
  std::vector<int> overparameterized_units() const;
};

struct BetaCombination {
  Eigen::MatrixXd C1;  // p x p1, full column rank
};
struct AlphaMean {
  Eigen::MatrixXd C2;  // q x q2, full column rank
};
struct AlphaQuadratic {
  Eigen::MatrixXd Omega;  // q x q symmetric
  Eigen::MatrixXd S2;     // T^2 x m variance design
};
using TargetKind = std::variant<BetaCombination, AlphaMean, AlphaQuadratic>;

// Moment dimension: p1, q2, or 1.
int target_dim(const TargetKind& kind);
// Rank / symmetry / shape checks against the dataset dimensions.
void validate_target(const TargetKind& kind, int T, int p, int q);

// S2 presets: "iid" is vec(I_T) (one free variance); "nonstationary" adds a
// linear-in-time component, columns vec(I_T) and vec(diag(0, 1, .., T-1)).
Eigen::MatrixXd s2_iid(int T);
Eigen::MatrixXd s2_nonstationary(int T);

struct Config {
  lasso::Config lasso;
  // Spectral thresholds; 0 means the default rule sqrt(log(d)/n_train) with
  // d = p ∧ (n_train T) for M and d = T^2 for B.
  double nu_M = 0.0;
  double nu_B = 0.0;
};

struct Nuisance {
  Eigen::VectorXd beta;               // penalized within-regression fit
  linops::TruncatedPsdPinv M_pinv;    // of mean(W' Q W) on the training set
  Eigen::MatrixXd rho2;               // p1 x p, C1' M^+
  Eigen::MatrixXd S1;                 // q x p, mean(H W)
  Eigen::MatrixXd Gamma;              // q2 x p correction slope
  Eigen::VectorXd omega;              // m, variance parameters
  Eigen::RowVectorXd Gamma_omega;     // 1 x T^2
  Eigen::RowVectorXd Gamma_beta;      // 1 x p
  bool lasso_converged = true;
  bool B_rank_deficient = false;
  int fold_id = -1;
};

Nuisance nuisance_beta(const Dataset& d, const std::vector<int>& train,
                       const Eigen::MatrixXd& C1, const Config& cfg);
Nuisance nuisance_alpha(const Dataset& d, const std::vector<int>& train,
                        const Eigen::MatrixXd& C2, const Config& cfg);
Nuisance nuisance_variance(const Dataset& d, const std::vector<int>& train,
                           const Eigen::MatrixXd& Omega,
                           const Eigen::MatrixXd& S2, const Config& cfg);

// g = rho2 W'Q (Y - W Hc1 psi0 - W Qc1 beta) where Hc1 = C1(C1'C1)^{-1} and
// Qc1 = I - C1(C1'C1)^{-1}C1' split the coefficient space into the tested
// combination and its complement.
Eigen::VectorXd moment_beta(const Dataset& d, int i, const Nuisance& nu,
                            const Eigen::MatrixXd& C1,
                            const Eigen::VectorXd& psi0);

// g = (C2'H - Gamma W'Q)(Y - W beta) - psi0. Requires C2'H_i V_i = C2' per
// unit (the target must be recoverable from the unit's design).
Eigen::VectorXd moment_alpha(const Dataset& d, int i, const Nuisance& nu,
                             const Eigen::MatrixXd& C2,
                             const Eigen::VectorXd& psi0);

// The uncorrected recover-and-average moment C2'H(Y - W beta) - psi0; its
// expectation moves with beta, which is the failure the corrected version
// repairs. Kept for diagnostics and tests.
Eigen::VectorXd moment_alpha_uncorrected(const Dataset& d, int i,
                                         const Eigen::VectorXd& beta,
                                         const Eigen::MatrixXd& C2,
                                         const Eigen::VectorXd& psi0);

// g = (vec(Omega)' Hk - Gamma_omega Qk) (u kron u - S2 omega)
//     - Gamma_beta W'Q u - psi0, with u = Y - W beta.
double moment_variance(const Dataset& d, int i, const Nuisance& nu,
                       const Eigen::MatrixXd& Omega, const Eigen::MatrixXd& S2,
                       double psi0);

struct FoldPlan {
  std::vector<std::vector<int>> folds;  // unit indices per fold
};
// Seeded shuffle dealt round-robin; L = 1 degenerates to no cross-fitting
// (training set = full sample).
FoldPlan make_folds(int n, int L, std::uint64_t seed);

struct PsiEstimate {
  Eigen::VectorXd psi_hat;               // average of the per-fold values
  std::vector<Eigen::VectorXd> per_fold;
};
PsiEstimate estimate_psi_beta(const Dataset& d, const FoldPlan& plan,
                              const Eigen::MatrixXd& C1, const Config& cfg);

// Cross-fitted moment pieces, linear in the hypothesized value:
//   g_i(psi) = base[i] - slope[i] psi
// with nuisances trained on the complement of the fold holding unit i.
// psi_fold[l] is the training-side plug-in for fold l and psi_plugin their
// average, the debiased point estimate.
struct CrossFit {
  std::vector<Eigen::VectorXd> base;
  std::vector<Eigen::MatrixXd> slope;
  std::vector<int> fold_of;
  std::vector<Eigen::VectorXd> psi_fold;
  Eigen::VectorXd psi_plugin;
  std::vector<Nuisance> nuisance;  // per fold, for diagnostics
};
CrossFit crossfit(const Dataset& d, const TargetKind& kind,
                  const FoldPlan& plan, const Config& cfg);

// Point estimate plus per-observation moment values at the fold's own
// plug-in, the centering used for the psi-free weighting matrix.
struct Plugin {
  Eigen::VectorXd psi_hat;
  std::vector<Eigen::VectorXd> g_at_psi_hat;
  std::vector<Eigen::VectorXd> per_fold;
};
Plugin plugin_psi(const Dataset& d, const TargetKind& kind,
                  const FoldPlan& plan, const Config& cfg);

}  // namespace uhm::panel

#endif
