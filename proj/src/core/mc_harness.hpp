#ifndef UHMOM_MC_HARNESS_HPP
#define UHMOM_MC_HARNESS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

// Simulation study for the two-outcome factor model Y1 = alpha + e1,
// Y2 = beta * alpha + e2 with discretized heterogeneity: data generation,
// penalized deconvolution of the mixing distribution, the efficient-score
// moment built by projecting out the estimable directions, a
// functional-differencing comparison arm, and size/power experiment runners.

namespace uhm::mc {

struct MixingGrid {
  Eigen::VectorXd alpha;  // support points
  Eigen::VectorXd mass;   // probabilities, sum 1
  double mean() const { return alpha.dot(mass); }
  double variance() const {
    const double m = mean();
    return (alpha.array() - m).square().matrix().dot(mass);
  }
};

// 81 points -3.0, -2.9, ..., 5.0 with standard-normal midpoint masses.
MixingGrid eta_grid();

struct Sample {
  Eigen::VectorXd y1, y2;
  int n() const { return static_cast<int>(y1.size()); }
};

Sample sample_dgp(int n, double beta0, const MixingGrid& eta,
                  std::uint64_t seed);

// Mixture density of (y1, y2) and the beta-score d/dbeta log f.
double mixture_density(double y1, double y2, double beta0,
                       const MixingGrid& eta);
double score_m(double y1, double y2, double beta0, const MixingGrid& eta);

struct DeconvolveResult {
  Eigen::VectorXd mass;    // fitted grid masses, sum 1
  Eigen::VectorXd kappa;   // natural parameter of the exponential family
  bool converged = false;
  int iterations = 0;
  double penalty = 0.0;    // ridge weight actually used
};

// Penalized exponential-family fit of the mixing masses from y1 alone:
// masses proportional to exp(B(alpha)' kappa) with a degree-5 standardized
// polynomial basis, Gaussian unit-variance kernel likelihood, and ridge
// penalty lambda * |kappa|^2 (lambda < 0 picks 0.1 / sqrt(n)).
DeconvolveResult deconvolve_eta(const Eigen::VectorXd& y1,
                                const Eigen::VectorXd& grid_alpha,
                                double lambda = -1.0);

struct ProjectionConfig {
  int n_z = 1000;    // synthetic evaluation points
  int n_alpha = 100; // resampled heterogeneity points
  int ks = 10;       // singular directions removed
};

struct ScoreProjection {
  Eigen::VectorXd g;       // orthogonalized score at the evaluation points
  Eigen::VectorXd m;       // raw score at the evaluation points
  std::vector<char> ok;    // false where the density degenerated
  int dropped = 0;
  int rank = 0;            // directions actually removed
  double annihilation = 0.0;  // max_j |S' residual|_j / n_z, raw diagnostic
  // Residual conditional mean beyond its own Monte Carlo resolution: the
  // per-direction check is an n_z-point sample mean, so it is certified
  // only outside a 3-standard-error band.
  double annihilation_excess = 0.0;
};

// m minus its projection onto the span of the leading singular directions
// of the conditional-density ratio matrix, evaluated at the given points.
// Synthetic points are drawn from the fitted mixture, deterministically in
// the seed.
ScoreProjection efficient_score_moment(const Sample& eval_points, double beta0,
                                       const MixingGrid& eta_hat,
                                       const ProjectionConfig& cfg,
                                       std::uint64_t seed);

// Functional differencing arm: bivariate Gaussian bumps at a square grid of
// offsets, each orthogonalized against the conditional densities over the
// heterogeneity grid.
std::vector<std::pair<double, double>> fd_offsets(int grid_size);  // 9|25|49

// Least-squares coefficients of the conditional densities approximating the
// bump at offset (r1, r2); analytic Gaussian inner products.
Eigen::VectorXd fd_coefficients(double beta, const Eigen::VectorXd& grid_alpha,
                                double r1, double r2);
double fd_g(double y1, double y2, double beta,
            const Eigen::VectorXd& grid_alpha, const Eigen::VectorXd& coef,
            double r1, double r2);

struct FdResult {
  double beta_hat = 0.0;
  double wald = 0.0;
  bool degenerate = false;  // flat objective or singular Jacobian
};

// Two-step GMM for beta from the differenced moments, then a Wald statistic
// against beta0 with a sandwich variance.
FdResult fd_moments(const Sample& s, double beta0, int grid_size);

struct ExperimentConfig {
  int n = 250;
  int reps = 100;
  double beta0 = 1.0;
  std::vector<double> levels{0.05, 0.10};
  int L = 4;
  ProjectionConfig proj;
  std::uint64_t seed = 1;
  std::vector<int> fd_grids{9, 25, 49};  // empty skips the comparison arm
  double lambda = -1.0;
  int threads = 1;
};

struct RepOutcome {
  double stat_plugin = 0.0;
  double stat_lr = 0.0;
  std::vector<double> wald;  // one per configured fd grid
  double annihilation = 0.0;         // worst raw residual across folds
  double annihilation_excess = 0.0;  // worst noise-adjusted residual
  bool ok = false;
};

// One replication: simulate at beta_true, test the hypothesis config.beta0.
RepOutcome run_rep(const ExperimentConfig& cfg, double beta_true,
                   std::uint64_t rep_seed);

struct ArmStats {
  std::string name;
  std::vector<double> statistics;  // one per successful replication
};

struct SizeRun {
  ExperimentConfig config;
  std::vector<ArmStats> arms;
  int failures = 0;
  int annihilation_ok = 0;  // replications passing the 1e-3 residual check
};

SizeRun run_size(const ExperimentConfig& cfg);

struct RejectionRow {
  std::string arm;
  double level = 0.0;
  double rate = 0.0;
  double mc_se = 0.0;
  int reps = 0;
};

struct RejectionTable {
  std::vector<RejectionRow> rows;
};

// Rates against the one-degree chi-square critical values.
RejectionTable tabulate(const SizeRun& run);

struct PowerCurves {
  std::vector<double> deltas;
  std::vector<std::string> arm_names;
  std::vector<double> levels;
  // rates[arm][delta][level], size-adjusted by the empirical null quantiles
  std::vector<std::vector<std::vector<double>>> rates;
  // critical values actually used: [arm][level]
  std::vector<std::vector<double>> critical_values;
};

PowerCurves run_power(const ExperimentConfig& cfg,
                      const std::vector<double>& deltas);

}  // namespace uhm::mc

#endif
