#include "core/panel_moments.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "core/numerics.hpp"

namespace uhm::panel {

void Dataset::validate() const {
  if (n < 1) throw std::invalid_argument("dataset: need at least one unit");
  if (T < 1 || p < 0 || q < 0)
    throw std::invalid_argument("dataset: bad dimensions");
  if (static_cast<int>(Y.size()) != n || static_cast<int>(W.size()) != n ||
      static_cast<int>(V.size()) != n)
    throw std::invalid_argument("dataset: per-unit containers disagree with n");
  for (int i = 0; i < n; ++i) {
    std::string at = "dataset unit " + std::to_string(i);
    if (Y[i].size() != T) throw std::invalid_argument(at + ": Y length != T");
    if (W[i].rows() != T || W[i].cols() != p)
      throw std::invalid_argument(at + ": W shape mismatch");
    if (V[i].rows() != T || V[i].cols() != q)
      throw std::invalid_argument(at + ": V shape mismatch");
    if (!Y[i].allFinite() || !W[i].allFinite() || !V[i].allFinite())
      throw std::invalid_argument(at + ": non-finite entry");
  }
}

std::vector<int> Dataset::overparameterized_units() const {
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (q == 0) continue;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V[i]);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    double tol = std::max(T, q) * 1e-14 * smax;
    int rank = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k)
      if (svd.singularValues()(k) > tol) ++rank;
    if (rank >= T) out.push_back(i);
  }
  return out;
}

int target_dim(const TargetKind& kind) {
  return std::visit(
      [](const auto& t) -> int {
        using K = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<K, BetaCombination>)
          return static_cast<int>(t.C1.cols());
        else if constexpr (std::is_same_v<K, AlphaMean>)
          return static_cast<int>(t.C2.cols());
        else
          return 1;
      },
      kind);
}

namespace {

void require_full_column_rank(const Eigen::MatrixXd& c, const char* name) {
  if (c.cols() < 1 || c.rows() < c.cols())
    throw std::invalid_argument(std::string(name) + ": needs 1 <= cols <= rows");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
  if (svd.singularValues()(svd.singularValues().size() - 1) <= 1e-8)
    throw std::invalid_argument(std::string(name) +
                                ": numerically rank deficient");
}

}  // namespace

void validate_target(const TargetKind& kind, int T, int p, int q) {
  std::visit(
      [&](const auto& t) {
        using K = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<K, BetaCombination>) {
          if (t.C1.rows() != p)
            throw std::invalid_argument("C1: row count must equal p");
          require_full_column_rank(t.C1, "C1");
        } else if constexpr (std::is_same_v<K, AlphaMean>) {
          if (t.C2.rows() != q)
            throw std::invalid_argument("C2: row count must equal q");
          require_full_column_rank(t.C2, "C2");
        } else {
          if (t.Omega.rows() != q || t.Omega.cols() != q)
            throw std::invalid_argument("Omega: must be q x q");
          if ((t.Omega - t.Omega.transpose()).cwiseAbs().maxCoeff() >
              1e-10 * (1.0 + t.Omega.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("Omega: must be symmetric");
          if (t.S2.rows() != T * T || t.S2.cols() < 1)
            throw std::invalid_argument("S2: must be T^2 x m with m >= 1");
        }
      },
      kind);
}

Eigen::MatrixXd s2_iid(int T) {
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(T * T, 1);
  for (int t = 0; t < T; ++t) s2(t * T + t, 0) = 1.0;
  return s2;
}

Eigen::MatrixXd s2_nonstationary(int T) {
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(T * T, 2);
  for (int t = 0; t < T; ++t) {
    s2(t * T + t, 0) = 1.0;
    s2(t * T + t, 1) = static_cast<double>(t);
  }
  return s2;
}

namespace {

double default_threshold(int d, int n_train) {
  if (d < 2 || n_train < 1) return 0.0;
  return std::sqrt(std::log(static_cast<double>(d)) /
                   static_cast<double>(n_train));
}

struct TrainCore {
  Eigen::MatrixXd M;  // mean of W'QW over the training set
  Eigen::VectorXd beta;
  bool lasso_converged = true;
};

// Within-annihilator regression pieces shared by all three targets.
TrainCore train_core(const Dataset& d, const std::vector<int>& train,
                     const Config& cfg) {
  if (train.empty()) throw std::invalid_argument("training set is empty");
  TrainCore out;
  int nt = static_cast<int>(train.size());
  out.M = Eigen::MatrixXd::Zero(d.p, d.p);
  Eigen::VectorXd ys(nt * d.T);
  Eigen::MatrixXd ws(nt * d.T, d.p);
  for (int a = 0; a < nt; ++a) {
    int i = train[a];
    linops::ProjectionPair pr = linops::projections(d.V[i]);
    Eigen::MatrixXd qw = pr.Q * d.W[i];
    out.M += d.W[i].transpose() * qw;
    ys.segment(a * d.T, d.T) = pr.Q * d.Y[i];
    ws.middleRows(a * d.T, d.T) = qw;
  }
  out.M /= static_cast<double>(nt);
  if (d.p > 0) {
    lasso::Fit fit = lasso::fit(ys, ws, d.T, cfg.lasso);
    out.beta = fit.beta;
    out.lasso_converged = fit.converged;
  } else {
    out.beta = Eigen::VectorXd::Zero(0);
  }
  return out;
}

double nu_m_value(const Dataset& d, const std::vector<int>& train,
                  const Config& cfg) {
  if (cfg.nu_M > 0.0) return cfg.nu_M;
  int nt = static_cast<int>(train.size());
  return default_threshold(std::min(d.p, nt * d.T), nt);
}

}  // namespace

Nuisance nuisance_beta(const Dataset& d, const std::vector<int>& train,
                       const Eigen::MatrixXd& C1, const Config& cfg) {
  TrainCore core = train_core(d, train, cfg);
  Nuisance nu;
  nu.beta = core.beta;
  nu.lasso_converged = core.lasso_converged;
  nu.M_pinv = linops::truncated_psd_pinv(core.M, nu_m_value(d, train, cfg));
  nu.rho2 = C1.transpose() * nu.M_pinv.pinv;
  return nu;
}

Nuisance nuisance_alpha(const Dataset& d, const std::vector<int>& train,
                        const Eigen::MatrixXd& C2, const Config& cfg) {
  TrainCore core = train_core(d, train, cfg);
  Nuisance nu;
  nu.beta = core.beta;
  nu.lasso_converged = core.lasso_converged;
  nu.M_pinv = linops::truncated_psd_pinv(core.M, nu_m_value(d, train, cfg));
  nu.S1 = Eigen::MatrixXd::Zero(d.q, d.p);
  for (int i : train) {
    linops::ProjectionPair pr = linops::projections(d.V[i]);
    nu.S1 += pr.H * d.W[i];
  }
  nu.S1 /= static_cast<double>(train.size());
  // The correction slope solves mean d/dbeta [(C2'H - Gamma W'Q)(Y - W b)]
  // = 0, i.e. -C2'S1 + Gamma M = 0, so Gamma = C2'S1 M^+.
  nu.Gamma = C2.transpose() * nu.S1 * nu.M_pinv.pinv;
  return nu;
}

Nuisance nuisance_variance(const Dataset& d, const std::vector<int>& train,
                           const Eigen::MatrixXd& Omega,
                           const Eigen::MatrixXd& S2, const Config& cfg) {
  TrainCore core = train_core(d, train, cfg);
  Nuisance nu;
  nu.beta = core.beta;
  nu.lasso_converged = core.lasso_converged;
  nu.M_pinv = linops::truncated_psd_pinv(core.M, nu_m_value(d, train, cfg));

  int nt = static_cast<int>(train.size());
  int T2 = d.T * d.T;
  int m = static_cast<int>(S2.cols());
  Eigen::RowVectorXd vecOmega(Omega.size());
  for (int j = 0; j < Omega.cols(); ++j)
    for (int i = 0; i < Omega.rows(); ++i)
      vecOmega(j * Omega.rows() + i) = Omega(i, j);

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(T2, m);   // mean(Qk S2)
  Eigen::MatrixXd HS = Eigen::MatrixXd::Zero(d.q * d.q, m);  // mean(Hk S2)
  Eigen::VectorXd Quu = Eigen::VectorXd::Zero(T2);    // mean(Qk (u kron u))
  std::vector<Eigen::VectorXd> resid(nt);
  std::vector<linops::SecondOrderProjections> so(nt);
  for (int a = 0; a < nt; ++a) {
    int i = train[a];
    linops::ProjectionPair pr = linops::projections(d.V[i]);
    so[a] = linops::second_order(pr);
    resid[a] = d.Y[i] - d.W[i] * nu.beta;
    B += so[a].Qk * S2;
    HS += so[a].Hk * S2;
    Quu += so[a].Qk * linops::kron(resid[a], resid[a]);
  }
  B /= nt;
  HS /= nt;
  Quu /= nt;

  // Least-squares fit of the variance parameters from the annihilated
  // second moments: E[Qk(u kron u)] = (Qk S2) w0.
  nu.omega = linops::pseudo_inverse(B) * Quu;

  double nu_b = cfg.nu_B > 0.0 ? cfg.nu_B : default_threshold(T2, nt);
  Eigen::JacobiSVD<Eigen::MatrixXd> bs(B);
  nu.B_rank_deficient =
      bs.singularValues()(bs.singularValues().size() - 1) <= nu_b;
  Eigen::RowVectorXd A = vecOmega * HS;  // 1 x m
  nu.Gamma_omega = A * linops::pseudo_inverse(B, nu_b);  // 1 x T^2

  // Slope of the mean moment in beta: u kron u contributes
  // -(W db kron u) - (u kron W db), and the repair term must absorb it.
  Eigen::RowVectorXd D = Eigen::RowVectorXd::Zero(d.p);
  for (int a = 0; a < nt; ++a) {
    int i = train[a];
    Eigen::RowVectorXd row = vecOmega * so[a].Hk - nu.Gamma_omega * so[a].Qk;
    D += row * (linops::kron(d.W[i], resid[a]) + linops::kron(resid[a], d.W[i]));
  }
  D /= nt;
  nu.Gamma_beta = D * nu.M_pinv.pinv;
  return nu;
}

Eigen::VectorXd moment_beta(const Dataset& d, int i, const Nuisance& nu,
                            const Eigen::MatrixXd& C1,
                            const Eigen::VectorXd& psi0) {
  if (psi0.size() != C1.cols())
    throw std::invalid_argument("moment_beta: psi0 length != C1 columns");
  Eigen::MatrixXd ctc_inv = (C1.transpose() * C1).ldlt().solve(
      Eigen::MatrixXd::Identity(C1.cols(), C1.cols()));
  Eigen::MatrixXd Hc1 = C1 * ctc_inv;                       // p x p1
  Eigen::MatrixXd Qc1 =
      Eigen::MatrixXd::Identity(d.p, d.p) - Hc1 * C1.transpose();
  linops::ProjectionPair pr = linops::projections(d.V[i]);
  Eigen::VectorXd inner =
      d.Y[i] - d.W[i] * (Hc1 * psi0) - d.W[i] * (Qc1 * nu.beta);
  return nu.rho2 * (d.W[i].transpose() * (pr.Q * inner));
}

Eigen::VectorXd moment_alpha(const Dataset& d, int i, const Nuisance& nu,
                             const Eigen::MatrixXd& C2,
                             const Eigen::VectorXd& psi0) {
  if (psi0.size() != C2.cols())
    throw std::invalid_argument("moment_alpha: psi0 length != C2 columns");
  linops::ProjectionPair pr = linops::projections(d.V[i]);
  Eigen::MatrixXd rec = C2.transpose() * pr.H;  // q2 x T
  if ((rec * d.V[i] - C2.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw std::runtime_error(
        "moment_alpha: unit " + std::to_string(i) +
        " cannot recover the target combination (C2'H V != C2'; V rank "
        "deficient for this C2)");
  Eigen::VectorXd u = d.Y[i] - d.W[i] * nu.beta;
  return rec * u - nu.Gamma * (d.W[i].transpose() * (pr.Q * u)) - psi0;
}

Eigen::VectorXd moment_alpha_uncorrected(const Dataset& d, int i,
                                         const Eigen::VectorXd& beta,
                                         const Eigen::MatrixXd& C2,
                                         const Eigen::VectorXd& psi0) {
  linops::ProjectionPair pr = linops::projections(d.V[i]);
  return C2.transpose() * (pr.H * (d.Y[i] - d.W[i] * beta)) - psi0;
}

double moment_variance(const Dataset& d, int i, const Nuisance& nu,
                       const Eigen::MatrixXd& Omega, const Eigen::MatrixXd& S2,
                       double psi0) {
  linops::ProjectionPair pr = linops::projections(d.V[i]);
  linops::SecondOrderProjections so = linops::second_order(pr);
  Eigen::RowVectorXd vecOmega(Omega.size());
  for (int j = 0; j < Omega.cols(); ++j)
    for (int r = 0; r < Omega.rows(); ++r)
      vecOmega(j * Omega.rows() + r) = Omega(r, j);
  Eigen::VectorXd u = d.Y[i] - d.W[i] * nu.beta;
  Eigen::VectorXd Uhat = linops::kron(u, u) - S2 * nu.omega;
  Eigen::RowVectorXd row = vecOmega * so.Hk - nu.Gamma_omega * so.Qk;
  double g = row.dot(Uhat);
  g -= nu.Gamma_beta.dot(d.W[i].transpose() * (pr.Q * u));
  return g - psi0;
}

FoldPlan make_folds(int n, int L, std::uint64_t seed) {
  if (L < 1 || L > n)
    throw std::invalid_argument("make_folds: need 1 <= L <= n");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  num::Rng rng(seed);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[i], perm[j]);
  }
  FoldPlan plan;
  plan.folds.resize(L);
  for (int a = 0; a < n; ++a) plan.folds[a % L].push_back(perm[a]);
  return plan;
}

namespace {

std::vector<int> train_for(const FoldPlan& plan, int ell, int n) {
  if (plan.folds.size() == 1) {
    // Degenerate single-fold plan: no held-out data, plain full-sample fit.
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  std::vector<int> train;
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    if (static_cast<int>(k) == ell) continue;
    train.insert(train.end(), plan.folds[k].begin(), plan.folds[k].end());
  }
  return train;
}

void check_plan(const FoldPlan& plan) {
  if (plan.folds.empty())
    throw std::invalid_argument("fold plan: no folds");
  for (const auto& f : plan.folds)
    if (f.empty()) throw std::invalid_argument("fold plan: empty fold");
}

}  // namespace

PsiEstimate estimate_psi_beta(const Dataset& d, const FoldPlan& plan,
                              const Eigen::MatrixXd& C1, const Config& cfg) {
  check_plan(plan);
  PsiEstimate out;
  int L = static_cast<int>(plan.folds.size());
  out.per_fold.resize(L);
  out.psi_hat = Eigen::VectorXd::Zero(C1.cols());
  for (int ell = 0; ell < L; ++ell) {
    std::vector<int> train = train_for(plan, ell, d.n);
    Nuisance nu = nuisance_beta(d, train, C1, cfg);
    Eigen::VectorXd R = Eigen::VectorXd::Zero(d.p);
    for (int i : train) {
      linops::ProjectionPair pr = linops::projections(d.V[i]);
      R += d.W[i].transpose() * (pr.Q * d.Y[i]);
    }
    R /= static_cast<double>(train.size());
    out.per_fold[ell] = nu.rho2 * R;
    out.psi_hat += out.per_fold[ell];
  }
  out.psi_hat /= static_cast<double>(L);
  return out;
}

CrossFit crossfit(const Dataset& d, const TargetKind& kind,
                  const FoldPlan& plan, const Config& cfg) {
  d.validate();
  validate_target(kind, d.T, d.p, d.q);
  check_plan(plan);
  int L = static_cast<int>(plan.folds.size());
  int k = target_dim(kind);
  CrossFit out;
  out.base.resize(d.n);
  out.slope.resize(d.n);
  out.fold_of.assign(d.n, -1);
  out.psi_fold.resize(L);
  out.nuisance.reserve(L);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(k);

  for (int ell = 0; ell < L; ++ell) {
    std::vector<int> train = train_for(plan, ell, d.n);
    std::visit(
        [&](const auto& t) {
          using K = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<K, BetaCombination>) {
            Nuisance nu = nuisance_beta(d, train, t.C1, cfg);
            nu.fold_id = ell;
            Eigen::MatrixXd ctc_inv = (t.C1.transpose() * t.C1).ldlt().solve(
                Eigen::MatrixXd::Identity(k, k));
            Eigen::MatrixXd Hc1 = t.C1 * ctc_inv;
            for (int i : plan.folds[ell]) {
              out.fold_of[i] = ell;
              // g_i(psi) = rho2 W'Q(Y - W Qc1 beta) - rho2 W'QW Hc1 psi
              out.base[i] = moment_beta(d, i, nu, t.C1, zero);
              linops::ProjectionPair pr = linops::projections(d.V[i]);
              out.slope[i] =
                  nu.rho2 * (d.W[i].transpose() * (pr.Q * d.W[i])) * Hc1;
            }
            Eigen::VectorXd R = Eigen::VectorXd::Zero(d.p);
            for (int i : train) {
              linops::ProjectionPair pr = linops::projections(d.V[i]);
              R += d.W[i].transpose() * (pr.Q * d.Y[i]);
            }
            R /= static_cast<double>(train.size());
            out.psi_fold[ell] = nu.rho2 * R;
            out.nuisance.push_back(std::move(nu));
          } else if constexpr (std::is_same_v<K, AlphaMean>) {
            Nuisance nu = nuisance_alpha(d, train, t.C2, cfg);
            nu.fold_id = ell;
            for (int i : plan.folds[ell]) {
              out.fold_of[i] = ell;
              out.base[i] = moment_alpha(d, i, nu, t.C2, zero);
              out.slope[i] = Eigen::MatrixXd::Identity(k, k);
            }
            Eigen::VectorXd R = Eigen::VectorXd::Zero(k);
            for (int i : train) R += moment_alpha(d, i, nu, t.C2, zero);
            out.psi_fold[ell] = R / static_cast<double>(train.size());
            out.nuisance.push_back(std::move(nu));
          } else {
            Nuisance nu = nuisance_variance(d, train, t.Omega, t.S2, cfg);
            nu.fold_id = ell;
            for (int i : plan.folds[ell]) {
              out.fold_of[i] = ell;
              out.base[i] = Eigen::VectorXd::Constant(
                  1, moment_variance(d, i, nu, t.Omega, t.S2, 0.0));
              out.slope[i] = Eigen::MatrixXd::Identity(1, 1);
            }
            double R = 0.0;
            for (int i : train)
              R += moment_variance(d, i, nu, t.Omega, t.S2, 0.0);
            out.psi_fold[ell] = Eigen::VectorXd::Constant(
                1, R / static_cast<double>(train.size()));
            out.nuisance.push_back(std::move(nu));
          }
        },
        kind);
  }
  out.psi_plugin = Eigen::VectorXd::Zero(k);
  for (int ell = 0; ell < L; ++ell) out.psi_plugin += out.psi_fold[ell];
  out.psi_plugin /= static_cast<double>(L);
  return out;
}

Plugin plugin_psi(const Dataset& d, const TargetKind& kind,
                  const FoldPlan& plan, const Config& cfg) {
  CrossFit cf = crossfit(d, kind, plan, cfg);
  Plugin out;
  out.psi_hat = cf.psi_plugin;
  out.per_fold = cf.psi_fold;
  out.g_at_psi_hat.resize(d.n);
  for (int i = 0; i < d.n; ++i)
    out.g_at_psi_hat[i] = cf.base[i] - cf.slope[i] * cf.psi_fold[cf.fold_of[i]];
  return out;
}

}  // namespace uhm::panel
