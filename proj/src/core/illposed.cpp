#include "core/illposed.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "core/linops.hpp"

namespace uhm::illposed {

DiscretizedOperator collocate(
    const std::function<double(double, double)>& kernel,
    const std::vector<double>& out_grid, const std::vector<double>& in_grid) {
  if (out_grid.empty() || in_grid.empty()) {
    throw std::invalid_argument("collocate: grids must be nonempty");
  }
  DiscretizedOperator op;
  op.out_grid = out_grid;
  op.in_grid = in_grid;
  const int nz = static_cast<int>(out_grid.size());
  const int na = static_cast<int>(in_grid.size());
  op.K.resize(nz, na);
  const double scale = 1.0 / na;
  for (int i = 0; i < nz; ++i) {
    for (int j = 0; j < na; ++j) {
      const double v = kernel(out_grid[i], in_grid[j]);
      if (!std::isfinite(v)) {
        throw std::runtime_error("collocate: non-finite kernel value at (" +
                                 std::to_string(out_grid[i]) + ", " +
                                 std::to_string(in_grid[j]) + ")");
      }
      op.K(i, j) = v * scale;
    }
  }
  return op;
}

Eigen::VectorXd min_norm_solution(const DiscretizedOperator& op,
                                  const Eigen::VectorXd& rhs) {
  if (rhs.size() != op.K.rows()) {
    throw std::invalid_argument("min_norm_solution: rhs length mismatch");
  }
  return linops::pseudo_inverse(op.K.transpose() * op.K) *
         (op.K.transpose() * rhs);
}

namespace {

double sigma_max(const Eigen::MatrixXd& k) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(k);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

Solution solve_lf(const DiscretizedOperator& op, const Eigen::VectorXd& rhs,
                  LandweberFridman lf) {
  Solution out;
  const double smax = sigma_max(op.K);
  double c = lf.c > 0.0 ? lf.c : (smax > 0.0 ? 1.0 / (smax * smax) : 1.0);
  if (smax > 0.0 && c * smax * smax > 1.0) {
    c = 1.0 / (smax * smax);
    out.rescaled_c = true;
  }
  const Eigen::MatrixXd ktk = op.K.transpose() * op.K;
  const Eigen::VectorXd ktr = op.K.transpose() * rhs;
  Eigen::VectorXd h = c * ktr;
  for (int step = 0; step < lf.steps; ++step) {
    h = h - c * (ktk * h) + c * ktr;
  }
  out.h = h;
  return out;
}

Solution solve_tikhonov(const DiscretizedOperator& op, const Eigen::VectorXd& rhs,
                        Tikhonov tk) {
  const double smax = sigma_max(op.K);
  const double gamma = tk.gamma > 0.0 ? tk.gamma : 1e-4 * smax * smax;
  Eigen::MatrixXd lhs = op.K.transpose() * op.K;
  lhs.diagonal().array() += gamma;
  Solution out;
  out.h = lhs.ldlt().solve(op.K.transpose() * rhs);
  return out;
}

Solution solve_cutoff(const DiscretizedOperator& op, const Eigen::VectorXd& rhs,
                      SpectralCutoff sc) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(op.K, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const int full = static_cast<int>(sv.size());
  int keep = sc.ks > 0 ? std::min(sc.ks, full) : full;
  // never invert numerically-zero singular values
  const double cutoff = full > 0 ? full * 1e-15 * sv(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(full);
  for (int i = 0; i < keep; ++i) {
    if (sv(i) > cutoff) inv(i) = 1.0 / sv(i);
  }
  Solution out;
  out.h = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * rhs);
  return out;
}

}  // namespace

Solution solve(const DiscretizedOperator& op, const Eigen::VectorXd& rhs,
               const Scheme& scheme) {
  if (rhs.size() != op.K.rows()) {
    throw std::invalid_argument("solve: rhs length mismatch");
  }
  if (const auto* lf = std::get_if<LandweberFridman>(&scheme)) {
    return solve_lf(op, rhs, *lf);
  }
  if (const auto* tk = std::get_if<Tikhonov>(&scheme)) {
    return solve_tikhonov(op, rhs, *tk);
  }
  return solve_cutoff(op, rhs, std::get<SpectralCutoff>(scheme));
}

}  // namespace uhm::illposed
