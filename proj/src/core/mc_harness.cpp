#include "core/mc_harness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>

#include "core/linops.hpp"
#include "core/numerics.hpp"
#include "core/panel_moments.hpp"

namespace uhm::mc {

namespace {

constexpr double kDensityFloor = 1e-300;

double default_trunc(const Eigen::MatrixXd& W, int n) {
  const int k = static_cast<int>(W.rows());
  const double kk = static_cast<double>(std::max(k, 2));
  return std::sqrt(std::log(kk) / static_cast<double>(n)) *
         (W.trace() / static_cast<double>(k));
}

// Minimize a smooth function of a few variables by BFGS with Armijo
// backtracking. Returns the best iterate found.
struct QuasiNewtonResult {
  Eigen::VectorXd x;
  bool converged = false;
  int iterations = 0;
};

QuasiNewtonResult minimize_bfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    Eigen::VectorXd x0, int max_iter, double grad_tol) {
  const int d = static_cast<int>(x0.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd x = std::move(x0), grad(d);
  double f = fg(x, grad);

  QuasiNewtonResult out;
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it;
    if (grad.cwiseAbs().maxCoeff() <= grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd dir = -(H * grad);
    double slope = grad.dot(dir);
    if (slope >= 0.0) {  // lost positive definiteness, restart steepest
      H.setIdentity();
      dir = -grad;
      slope = grad.dot(dir);
    }
    double t = 1.0;
    Eigen::VectorXd xn(d), gn(d);
    double fn = f;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      xn = x + t * dir;
      fn = fg(xn, gn);
      if (std::isfinite(fn) && fn <= f + 1e-4 * t * slope) {
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    const Eigen::VectorXd s = xn - x;
    const Eigen::VectorXd y = gn - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    x = xn;
    grad = gn;
    f = fn;
  }
  out.x = x;
  return out;
}

// Symmetric PSD least-squares solve G c = d via eigendecomposition with a
// relative cutoff (minimum-norm solution).
Eigen::MatrixXd psd_solve(const Eigen::MatrixXd& G, const Eigen::MatrixXd& D) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cut = ev.cwiseAbs().maxCoeff() * 1e-12;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    if (ev[i] > cut) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() *
         es.eigenvectors().transpose() * D;
}

}  // namespace

MixingGrid eta_grid() {
  const int m = 81;
  MixingGrid g;
  g.alpha.resize(m);
  g.mass.resize(m);
  for (int j = 0; j < m; ++j) g.alpha[j] = -3.0 + 0.1 * j;
  g.mass[0] = num::norm_cdf(0.5 * (g.alpha[0] + g.alpha[1]));
  for (int j = 1; j < m - 1; ++j)
    g.mass[j] = num::norm_cdf(0.5 * (g.alpha[j] + g.alpha[j + 1])) -
                num::norm_cdf(0.5 * (g.alpha[j] + g.alpha[j - 1]));
  g.mass[m - 1] = 1.0 - num::norm_cdf(0.5 * (g.alpha[m - 1] + g.alpha[m - 2]));
  return g;
}

Sample sample_dgp(int n, double beta0, const MixingGrid& eta,
                  std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_dgp: n must be positive");
  Sample s;
  s.y1.resize(n);
  s.y2.resize(n);
  num::Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double a = eta.alpha[rng.discrete(eta.mass)];
    s.y1[i] = a + rng.normal();
    s.y2[i] = beta0 * a + rng.normal();
  }
  return s;
}

double mixture_density(double y1, double y2, double beta0,
                       const MixingGrid& eta) {
  double f = 0.0;
  for (int j = 0; j < eta.alpha.size(); ++j) {
    const double a = eta.alpha[j];
    f += eta.mass[j] * num::norm_pdf(y1 - a) * num::norm_pdf(y2 - beta0 * a);
  }
  return f;
}

double score_m(double y1, double y2, double beta0, const MixingGrid& eta) {
  double f = 0.0, df = 0.0;
  for (int j = 0; j < eta.alpha.size(); ++j) {
    const double a = eta.alpha[j];
    const double w =
        eta.mass[j] * num::norm_pdf(y1 - a) * num::norm_pdf(y2 - beta0 * a);
    f += w;
    df += w * a * (y2 - beta0 * a);
  }
  if (f < kDensityFloor) return 0.0;
  return df / f;
}

DeconvolveResult deconvolve_eta(const Eigen::VectorXd& y1,
                                const Eigen::VectorXd& grid_alpha,
                                double lambda) {
  const int n = static_cast<int>(y1.size());
  const int m = static_cast<int>(grid_alpha.size());
  if (n < 1) throw std::invalid_argument("deconvolve_eta: empty data");
  if (m < 2) throw std::invalid_argument("deconvolve_eta: degenerate grid");
  if (lambda < 0.0) lambda = 0.1 / std::sqrt(static_cast<double>(n));

  // Degree-5 polynomial basis in alpha, standardized column by column over
  // the grid so the ridge treats coefficients on a common scale.
  const int deg = 5;
  Eigen::MatrixXd B(m, deg);
  for (int d = 0; d < deg; ++d) {
    Eigen::VectorXd col = grid_alpha.array().pow(d + 1);
    const double mu = col.mean();
    col.array() -= mu;
    const double sd = std::sqrt(col.squaredNorm() / m);
    B.col(d) = col / (sd > 0 ? sd : 1.0);
  }

  // Kernel matrix of the unit-variance Gaussian mixture likelihood.
  Eigen::MatrixXd K(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) K(i, j) = num::norm_pdf(y1[i] - grid_alpha[j]);

  auto masses_of = [&](const Eigen::VectorXd& kappa) {
    Eigen::VectorXd u = B * kappa;
    u.array() -= u.maxCoeff();
    Eigen::VectorXd p = u.array().exp();
    return Eigen::VectorXd(p / p.sum());
  };

  // Mean negative penalized log-likelihood and its gradient.
  auto fg = [&](const Eigen::VectorXd& kappa, Eigen::VectorXd& grad) {
    const Eigen::VectorXd p = masses_of(kappa);
    Eigen::VectorXd denom = K * p;
    for (int i = 0; i < n; ++i) denom[i] = std::max(denom[i], kDensityFloor);
    const double loglik = denom.array().log().sum();
    const Eigen::VectorXd R =
        p.cwiseProduct(K.transpose() * denom.cwiseInverse());
    grad = -(B.transpose() * (R - static_cast<double>(n) * p)) / n +
           (2.0 * lambda / n) * kappa;
    return -loglik / n + (lambda / n) * kappa.squaredNorm();
  };

  const QuasiNewtonResult opt =
      minimize_bfgs(fg, Eigen::VectorXd::Zero(deg), 200, 1e-7);

  DeconvolveResult out;
  out.kappa = opt.x;
  out.mass = masses_of(opt.x);
  out.converged = opt.converged;
  out.iterations = opt.iterations;
  out.penalty = lambda;
  return out;
}

ScoreProjection efficient_score_moment(const Sample& eval_points, double beta0,
                                       const MixingGrid& eta_hat,
                                       const ProjectionConfig& cfg,
                                       std::uint64_t seed) {
  if (cfg.n_z < 2 || cfg.n_alpha < 1 || cfg.ks < 1)
    throw std::invalid_argument("efficient_score_moment: bad discretization");

  num::Rng rng(seed);
  const int nz = cfg.n_z, na = cfg.n_alpha;

  // Synthetic evaluation points from the fitted mixture, then the resampled
  // heterogeneity support defining the columns of the operator matrix.
  Eigen::VectorXd z1(nz), z2(nz);
  for (int i = 0; i < nz; ++i) {
    const double a = eta_hat.alpha[rng.discrete(eta_hat.mass)];
    z1[i] = a + rng.normal();
    z2[i] = beta0 * a + rng.normal();
  }
  Eigen::VectorXd atilde(na);
  for (int j = 0; j < na; ++j)
    atilde[j] = eta_hat.alpha[rng.discrete(eta_hat.mass)];

  Eigen::MatrixXd S(nz, na);
  Eigen::VectorXd mvec(nz);
  for (int i = 0; i < nz; ++i) {
    const double fz =
        std::max(mixture_density(z1[i], z2[i], beta0, eta_hat), kDensityFloor);
    for (int j = 0; j < na; ++j)
      S(i, j) = num::norm_pdf(z1[i] - atilde[j]) *
                num::norm_pdf(z2[i] - beta0 * atilde[j]) / fz;
    mvec[i] = score_m(z1[i], z2[i], beta0, eta_hat);
  }

  // Remove the ks leading singular directions of S.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(S,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cut = sv[0] * 1e-13;
  int rank = 0;
  while (rank < sv.size() && rank < cfg.ks && sv[rank] > cut) rank++;

  Eigen::VectorXd h = Eigen::VectorXd::Zero(na);
  for (int t = 0; t < rank; ++t)
    h += svd.matrixV().col(t) * (svd.matrixU().col(t).dot(mvec) / sv[t]);

  ScoreProjection out;
  out.rank = rank;
  const Eigen::VectorXd resid = mvec - S * h;
  for (int j = 0; j < na; ++j) {
    const Eigen::ArrayXd prod = S.col(j).array() * resid.array();
    const double mu = prod.mean();
    const double sd = std::sqrt((prod - mu).square().sum() / nz);
    out.annihilation = std::max(out.annihilation, std::abs(mu));
    out.annihilation_excess =
        std::max(out.annihilation_excess,
                 std::abs(mu) - 3.0 * sd / std::sqrt(double(nz)));
  }
  out.annihilation_excess = std::max(out.annihilation_excess, 0.0);

  const int ne = eval_points.n();
  out.g.resize(ne);
  out.m.resize(ne);
  out.ok.assign(ne, 1);
  Eigen::VectorXd frow(na);
  for (int i = 0; i < ne; ++i) {
    const double y1 = eval_points.y1[i], y2 = eval_points.y2[i];
    const double fz = mixture_density(y1, y2, beta0, eta_hat);
    if (fz < kDensityFloor) {
      out.g[i] = 0.0;
      out.m[i] = 0.0;
      out.ok[i] = 0;
      out.dropped++;
      continue;
    }
    for (int j = 0; j < na; ++j)
      frow[j] = num::norm_pdf(y1 - atilde[j]) *
                num::norm_pdf(y2 - beta0 * atilde[j]) / fz;
    out.m[i] = score_m(y1, y2, beta0, eta_hat);
    out.g[i] = out.m[i] - frow.dot(h);
  }
  return out;
}

std::vector<std::pair<double, double>> fd_offsets(int grid_size) {
  int r;
  switch (grid_size) {
    case 9:
      r = 1;
      break;
    case 25:
      r = 2;
      break;
    case 49:
      r = 3;
      break;
    default:
      throw std::invalid_argument("fd_offsets: grid size must be 9, 25 or 49");
  }
  std::vector<std::pair<double, double>> pts;
  for (int dx = -r; dx <= r; ++dx)
    for (int dy = -r; dy <= r; ++dy)
      pts.emplace_back(static_cast<double>(dx), static_cast<double>(dy));
  return pts;
}

namespace {

// Gram matrix of the conditional densities under the L2 inner product:
// <f_a, f_b> = exp(-(1+beta^2) (a-b)^2 / 4) / (4 pi).
Eigen::MatrixXd fd_gram(double beta, const Eigen::VectorXd& grid_alpha) {
  const int m = static_cast<int>(grid_alpha.size());
  Eigen::MatrixXd G(m, m);
  const double s = (1.0 + beta * beta) / 4.0;
  for (int j = 0; j < m; ++j)
    for (int k = 0; k <= j; ++k) {
      const double d = grid_alpha[j] - grid_alpha[k];
      G(j, k) = G(k, j) = std::exp(-s * d * d) / (4.0 * M_PI);
    }
  return G;
}

Eigen::VectorXd fd_rhs(double beta, const Eigen::VectorXd& grid_alpha,
                       double r1, double r2) {
  const int m = static_cast<int>(grid_alpha.size());
  Eigen::VectorXd d(m);
  for (int k = 0; k < m; ++k) {
    const double d1 = r1 - grid_alpha[k];
    const double d2 = r2 - beta * grid_alpha[k];
    d[k] = std::exp(-(d1 * d1 + d2 * d2) / 4.0) / (4.0 * M_PI);
  }
  return d;
}

}  // namespace

Eigen::VectorXd fd_coefficients(double beta, const Eigen::VectorXd& grid_alpha,
                                double r1, double r2) {
  return psd_solve(fd_gram(beta, grid_alpha),
                   fd_rhs(beta, grid_alpha, r1, r2));
}

double fd_g(double y1, double y2, double beta,
            const Eigen::VectorXd& grid_alpha, const Eigen::VectorXd& coef,
            double r1, double r2) {
  double model = 0.0;
  for (int j = 0; j < grid_alpha.size(); ++j)
    model += coef[j] * num::norm_pdf(y1 - grid_alpha[j]) *
             num::norm_pdf(y2 - beta * grid_alpha[j]);
  return num::norm_pdf(y1 - r1) * num::norm_pdf(y2 - r2) - model;
}

FdResult fd_moments(const Sample& s, double beta0, int grid_size) {
  const auto offsets = fd_offsets(grid_size);
  const int k = static_cast<int>(offsets.size());
  const int n = s.n();
  const MixingGrid grid = eta_grid();
  const Eigen::VectorXd& av = grid.alpha;
  const int m = static_cast<int>(av.size());

  // Bump values are hypothesis-independent.
  Eigen::MatrixXd bump(n, k);
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < n; ++i)
      bump(i, c) = num::norm_pdf(s.y1[i] - offsets[c].first) *
                   num::norm_pdf(s.y2[i] - offsets[c].second);
  Eigen::MatrixXd K1(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) K1(i, j) = num::norm_pdf(s.y1[i] - av[j]);

  // Per-observation moment matrix at a hypothesized beta.
  auto moments_at = [&](double beta) {
    Eigen::MatrixXd D(m, k);
    for (int c = 0; c < k; ++c)
      D.col(c) = fd_rhs(beta, av, offsets[c].first, offsets[c].second);
    const Eigen::MatrixXd C = psd_solve(fd_gram(beta, av), D);
    Eigen::MatrixXd K12(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        K12(i, j) = K1(i, j) * num::norm_pdf(s.y2[i] - beta * av[j]);
    return Eigen::MatrixXd(bump - K12 * C);
  };

  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(k, k);
  auto objective = [&](double beta) {
    const Eigen::VectorXd gbar =
        moments_at(beta).colwise().mean().transpose();
    return gbar.dot(A * gbar);
  };

  auto minimize = [&]() {
    const int scan = 41;
    double best = beta0, best_val = objective(beta0);
    for (int t = 0; t < scan; ++t) {
      const double b = beta0 - 1.0 + 2.0 * t / (scan - 1);
      const double v = objective(b);
      if (v < best_val) {
        best_val = v;
        best = b;
      }
    }
    // Golden-section refinement on the bracketing cell.
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = best - 0.05, hi = best + 0.05;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = objective(x1), f2 = objective(x2);
    for (int it = 0; it < 60; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = objective(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = objective(x2);
      }
    }
    return 0.5 * (lo + hi);
  };

  FdResult out;
  const double beta1 = minimize();

  // Optimal weighting from the first step, with spectral truncation.
  {
    const Eigen::MatrixXd M1 = moments_at(beta1);
    const Eigen::RowVectorXd gb = M1.colwise().mean();
    const Eigen::MatrixXd centered = M1.rowwise() - gb;
    const Eigen::MatrixXd Sigma =
        centered.transpose() * centered / static_cast<double>(n);
    A = linops::truncated_psd_pinv(Sigma, default_trunc(Sigma, n)).pinv;
  }
  const double beta2 = minimize();
  out.beta_hat = beta2;

  const double h = 1e-5;
  const Eigen::VectorXd gp =
      moments_at(beta2 + h).colwise().mean().transpose();
  const Eigen::VectorXd gm =
      moments_at(beta2 - h).colwise().mean().transpose();
  const Eigen::VectorXd J = (gp - gm) / (2.0 * h);

  const Eigen::MatrixXd M2 = moments_at(beta2);
  const Eigen::RowVectorXd gb2 = M2.colwise().mean();
  const Eigen::MatrixXd c2 = M2.rowwise() - gb2;
  const Eigen::MatrixXd Sigma2 =
      c2.transpose() * c2 / static_cast<double>(n);

  const double denom = J.dot(A * J);
  if (!(std::abs(denom) > 1e-14)) {
    out.degenerate = true;
    return out;
  }
  const double meat = J.dot(A * Sigma2 * A * J);
  const double avar = meat / (denom * denom) / static_cast<double>(n);
  if (!(avar > 0.0) || !std::isfinite(avar)) {
    out.degenerate = true;
    return out;
  }
  out.wald = (beta2 - beta0) * (beta2 - beta0) / avar;
  return out;
}

RepOutcome run_rep(const ExperimentConfig& cfg, double beta_true,
                   std::uint64_t rep_seed) {
  RepOutcome out;
  const MixingGrid truth = eta_grid();
  const Sample s =
      sample_dgp(cfg.n, beta_true, truth, num::derive_seed(rep_seed, 1));
  const panel::FoldPlan folds =
      panel::make_folds(cfg.n, cfg.L, num::derive_seed(rep_seed, 2));

  Eigen::VectorXd gvals(cfg.n), mvals(cfg.n);
  std::vector<char> keep(cfg.n, 1);
  double worst = 0.0;
  for (int l = 0; l < cfg.L; ++l) {
    std::vector<char> in_fold(cfg.n, 0);
    for (int i : folds.folds[l]) in_fold[i] = 1;
    std::vector<double> y1t;
    y1t.reserve(cfg.n);
    for (int i = 0; i < cfg.n; ++i)
      if (!in_fold[i]) y1t.push_back(s.y1[i]);
    const Eigen::VectorXd y1train =
        Eigen::Map<const Eigen::VectorXd>(y1t.data(), y1t.size());

    const DeconvolveResult dec =
        deconvolve_eta(y1train, truth.alpha, cfg.lambda);
    const MixingGrid eta_hat{truth.alpha, dec.mass};

    Sample ev;
    const int fn = static_cast<int>(folds.folds[l].size());
    ev.y1.resize(fn);
    ev.y2.resize(fn);
    for (int t = 0; t < fn; ++t) {
      ev.y1[t] = s.y1[folds.folds[l][t]];
      ev.y2[t] = s.y2[folds.folds[l][t]];
    }
    const ScoreProjection proj = efficient_score_moment(
        ev, cfg.beta0, eta_hat, cfg.proj, num::derive_seed(rep_seed, 100 + l));
    worst = std::max(worst, proj.annihilation);
    out.annihilation_excess =
        std::max(out.annihilation_excess, proj.annihilation_excess);
    for (int t = 0; t < fn; ++t) {
      const int i = folds.folds[l][t];
      gvals[i] = proj.g[t];
      mvals[i] = proj.m[t];
      keep[i] = proj.ok[t];
    }
  }
  out.annihilation = worst;

  // Shared variance estimator from the orthogonalized values; the plug-in
  // statistic differs only through its numerator.
  double sum_g = 0.0, sum_m = 0.0;
  int neff = 0;
  for (int i = 0; i < cfg.n; ++i) {
    if (!keep[i]) continue;
    sum_g += gvals[i];
    sum_m += mvals[i];
    neff++;
  }
  if (neff < 2) throw std::runtime_error("replication lost its sample");
  const double mg = sum_g / neff, mm = sum_m / neff;
  double W = 0.0;
  for (int i = 0; i < cfg.n; ++i)
    if (keep[i]) W += (gvals[i] - mg) * (gvals[i] - mg);
  W /= neff;
  if (W > 0.0) {
    out.stat_lr = neff * mg * mg / W;
    out.stat_plugin = neff * mm * mm / W;
  }

  for (int gs : cfg.fd_grids) {
    const FdResult fd = fd_moments(s, cfg.beta0, gs);
    if (fd.degenerate)
      throw std::runtime_error("functional differencing arm degenerated");
    out.wald.push_back(fd.wald);
  }
  out.ok = true;
  return out;
}

namespace {

std::vector<RepOutcome> run_batch(
    const ExperimentConfig& cfg, double beta_true,
    const std::function<std::uint64_t(int)>& seed_of) {
  std::vector<RepOutcome> results(cfg.reps);
  auto work = [&](int first, int stride) {
    for (int r = first; r < cfg.reps; r += stride) {
      try {
        results[r] = run_rep(cfg, beta_true, seed_of(r));
      } catch (...) {
        results[r].ok = false;
      }
    }
  };
  const int nt = std::max(1, cfg.threads);
  if (nt == 1 || cfg.reps <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(work, t, nt);
    for (auto& th : pool) th.join();
  }
  return results;
}

std::vector<std::string> arm_names_for(const ExperimentConfig& cfg) {
  std::vector<std::string> names{"plugin", "lr"};
  for (int gs : cfg.fd_grids) names.push_back("w" + std::to_string(gs));
  return names;
}

void collect(const ExperimentConfig& cfg,
             const std::vector<RepOutcome>& results,
             std::vector<ArmStats>& arms, int& failures, int& annih_ok) {
  const std::vector<std::string> names = arm_names_for(cfg);
  arms.clear();
  for (const std::string& nm : names) arms.push_back({nm, {}});
  failures = 0;
  annih_ok = 0;
  for (const RepOutcome& r : results) {
    if (!r.ok) {
      failures++;
      continue;
    }
    arms[0].statistics.push_back(r.stat_plugin);
    arms[1].statistics.push_back(r.stat_lr);
    for (size_t a = 0; a < r.wald.size(); ++a)
      arms[2 + a].statistics.push_back(r.wald[a]);
    if (r.annihilation_excess <= 1e-3) annih_ok++;
  }
  if (cfg.reps > 0 && failures * 20 > cfg.reps)
    throw std::runtime_error("more than 5% of replications failed");
}

double empirical_critical(std::vector<double> stats, double level) {
  std::sort(stats.begin(), stats.end());
  const int R = static_cast<int>(stats.size());
  int idx = static_cast<int>(std::ceil((1.0 - level) * R)) - 1;
  idx = std::min(std::max(idx, 0), R - 1);
  return stats[idx];
}

}  // namespace

SizeRun run_size(const ExperimentConfig& cfg) {
  SizeRun run;
  run.config = cfg;
  const std::vector<RepOutcome> results = run_batch(
      cfg, cfg.beta0,
      [&](int r) { return num::derive_seed(cfg.seed, r); });
  collect(cfg, results, run.arms, run.failures, run.annihilation_ok);
  return run;
}

RejectionTable tabulate(const SizeRun& run) {
  RejectionTable t;
  for (const ArmStats& arm : run.arms) {
    const int R = static_cast<int>(arm.statistics.size());
    if (R == 0) continue;
    for (double level : run.config.levels) {
      const double crit = num::chi2_quantile(level, 1);
      int rej = 0;
      for (double s : arm.statistics)
        if (s > crit) rej++;
      RejectionRow row;
      row.arm = arm.name;
      row.level = level;
      row.reps = R;
      row.rate = static_cast<double>(rej) / R;
      row.mc_se = std::sqrt(row.rate * (1.0 - row.rate) / R);
      t.rows.push_back(row);
    }
  }
  return t;
}

PowerCurves run_power(const ExperimentConfig& cfg,
                      const std::vector<double>& deltas) {
  const SizeRun null_run = run_size(cfg);

  PowerCurves pc;
  pc.deltas = deltas;
  pc.levels = cfg.levels;
  for (const ArmStats& arm : null_run.arms) pc.arm_names.push_back(arm.name);

  const int na = static_cast<int>(pc.arm_names.size());
  pc.critical_values.assign(na, {});
  for (int a = 0; a < na; ++a)
    for (double level : cfg.levels)
      pc.critical_values[a].push_back(
          empirical_critical(null_run.arms[a].statistics, level));

  pc.rates.assign(na, std::vector<std::vector<double>>(
                          deltas.size(),
                          std::vector<double>(cfg.levels.size(), 0.0)));

  for (size_t d = 0; d < deltas.size(); ++d) {
    // Disjoint seed stream per alternative so power draws are independent
    // of the null calibration draws.
    const std::uint64_t block =
        static_cast<std::uint64_t>(d + 1) * 1000000ull;
    const std::vector<RepOutcome> results = run_batch(
        cfg, cfg.beta0 + deltas[d],
        [&](int r) { return num::derive_seed(cfg.seed, block + r); });
    std::vector<ArmStats> arms;
    int failures = 0, annih_ok = 0;
    collect(cfg, results, arms, failures, annih_ok);
    for (int a = 0; a < na; ++a) {
      const int R = static_cast<int>(arms[a].statistics.size());
      if (R == 0) continue;
      for (size_t lv = 0; lv < cfg.levels.size(); ++lv) {
        int rej = 0;
        for (double s : arms[a].statistics)
          if (s > pc.critical_values[a][lv]) rej++;
        pc.rates[a][d][lv] = static_cast<double>(rej) / R;
      }
    }
  }
  return pc;
}

}  // namespace uhm::mc
