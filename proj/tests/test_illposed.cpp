#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "core/illposed.hpp"
#include "core/numerics.hpp"

using namespace uhm::illposed;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

DiscretizedOperator op_from_matrix(const MatrixXd& k) {
  DiscretizedOperator op;
  op.K = k;
  op.out_grid.assign(static_cast<std::size_t>(k.rows()), 0.0);
  op.in_grid.assign(static_cast<std::size_t>(k.cols()), 0.0);
  return op;
}

// Random system with prescribed singular values (orthonormal factors from QR
// of Gaussian draws).
MatrixXd matrix_with_spectrum(uhm::num::Rng& rng, int rows, int cols,
                              const VectorXd& sigma) {
  MatrixXd a(rows, rows), b(cols, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < rows; ++j) a(i, j) = rng.normal();
  for (int i = 0; i < cols; ++i)
    for (int j = 0; j < cols; ++j) b(i, j) = rng.normal();
  MatrixXd u = Eigen::HouseholderQR<MatrixXd>(a).householderQ();
  MatrixXd v = Eigen::HouseholderQR<MatrixXd>(b).householderQ();
  return u.leftCols(cols) * sigma.asDiagonal() * v.transpose();
}

}  // namespace

TEST_SUITE("illposed") {

TEST_CASE("collocation fills the kernel matrix with column averaging") {
  auto one = [](double, double) { return 1.0; };
  DiscretizedOperator op = collocate(one, {0.0, 1.0}, {0.0, 1.0});
  CHECK((op.K.array() - 0.5).abs().maxCoeff() <= 1e-15);

  // Gaussian difference kernel is symmetric when the grids coincide and must
  // match a direct pointwise evaluation.
  auto gauss = [](double z, double a) { return uhm::num::norm_pdf(z - a); };
  std::vector<double> grid = {-1.0, -0.25, 0.5, 2.0};
  DiscretizedOperator g = collocate(gauss, grid, grid);
  CHECK((g.K - g.K.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      CHECK(g.K(i, j) ==
            doctest::Approx(uhm::num::norm_pdf(grid[i] - grid[j]) / 4.0).epsilon(1e-14));
    }
  }

  auto bad = [](double z, double) { return z > 0.5 ? 1.0 / 0.0 : 1.0; };
  CHECK_THROWS(collocate(bad, {0.0, 1.0}, {0.0}));
  CHECK_THROWS(collocate(one, {}, {0.0}));
}

TEST_CASE("minimum-norm solution on diagonal and degenerate systems") {
  Eigen::VectorXd d(3);
  d << 1.0, 0.5, 0.1;
  DiscretizedOperator op = op_from_matrix(d.asDiagonal());
  VectorXd h = min_norm_solution(op, d);
  CHECK((h.array() - 1.0).abs().maxCoeff() <= 1e-10);

  // rhs orthogonal to the range: K = first coordinate only, rhs in the others
  MatrixXd k = MatrixXd::Zero(3, 2);
  k(0, 0) = 1.0;
  VectorXd rhs(3);
  rhs << 0.0, 1.0, -1.0;
  CHECK(min_norm_solution(op_from_matrix(k), rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("minimum-norm solution reproduces in-range targets") {
  uhm::num::Rng rng(3101);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd k(5, 3);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 3; ++j) k(i, j) = rng.normal();
    VectorXd h0(3);
    h0 << rng.normal(), rng.normal(), rng.normal();
    VectorXd rhs = k * h0;
    DiscretizedOperator op = op_from_matrix(k);
    VectorXd h = min_norm_solution(op, rhs);
    CHECK((k * h - rhs).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("scheme solutions on diagonal systems match scalar formulas") {
  Eigen::VectorXd d(3);
  d << 1.0, 0.5, 0.1;
  DiscretizedOperator op = op_from_matrix(d.asDiagonal());
  VectorXd rhs = d;

  // Tikhonov: h_j = sigma_j rhs_j / (gamma + sigma_j^2)
  Solution tk = solve(op, rhs, Tikhonov{0.01});
  for (int j = 0; j < 3; ++j) {
    CHECK(tk.h(j) == doctest::Approx(d(j) * d(j) / (0.01 + d(j) * d(j))).epsilon(1e-12));
  }

  Solution sc = solve(op, rhs, SpectralCutoff{2});
  CHECK(sc.h(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sc.h(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sc.h(2) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("all schemes agree with the minimum-norm limit when well conditioned") {
  uhm::num::Rng rng(3102);
  VectorXd sigma(5);
  sigma << 1.0, 0.8, 0.6, 0.45, 0.3;
  MatrixXd k = matrix_with_spectrum(rng, 8, 5, sigma);
  DiscretizedOperator op = op_from_matrix(k);
  VectorXd rhs(8);
  for (int i = 0; i < 8; ++i) rhs(i) = rng.normal();

  VectorXd mn = min_norm_solution(op, rhs);
  VectorXd lf = solve(op, rhs, LandweberFridman{0.0, 10000}).h;
  VectorXd tk = solve(op, rhs, Tikhonov{1e-8}).h;
  VectorXd sc = solve(op, rhs, SpectralCutoff{5}).h;
  CHECK((lf - mn).norm() <= 1e-6);
  CHECK((tk - mn).norm() <= 1e-6);
  CHECK((sc - mn).norm() <= 1e-6);
  CHECK((lf - tk).norm() <= 1e-6);
  CHECK((lf - sc).norm() <= 1e-6);
  CHECK((tk - sc).norm() <= 1e-6);
}

TEST_CASE("landweber residual decreases and oversized steps are rescaled") {
  uhm::num::Rng rng(3103);
  VectorXd sigma(4);
  sigma << 2.0, 1.0, 0.5, 0.2;
  MatrixXd k = matrix_with_spectrum(rng, 6, 4, sigma);
  DiscretizedOperator op = op_from_matrix(k);
  VectorXd rhs(6);
  for (int i = 0; i < 6; ++i) rhs(i) = rng.normal();

  double prev = rhs.norm();
  for (int steps : {0, 1, 2, 5, 10, 30, 100}) {
    const double res = (k * solve(op, rhs, LandweberFridman{0.0, steps}).h - rhs).norm();
    CHECK(res <= prev + 1e-12);
    prev = res;
  }

  // c beyond 1/sigma_max^2 must be pulled back and flagged
  Solution s = solve(op, rhs, LandweberFridman{100.0, 10});
  CHECK(s.rescaled_c);
  CHECK(s.h.allFinite());
}

TEST_CASE("tikhonov solution norm shrinks as gamma grows") {
  uhm::num::Rng rng(3104);
  VectorXd sigma(4);
  sigma << 1.5, 0.9, 0.4, 0.15;
  MatrixXd k = matrix_with_spectrum(rng, 7, 4, sigma);
  DiscretizedOperator op = op_from_matrix(k);
  VectorXd rhs(7);
  for (int i = 0; i < 7; ++i) rhs(i) = rng.normal();

  double prev = std::numeric_limits<double>::infinity();
  for (double gamma : {1e-8, 1e-4, 1e-2, 1.0, 100.0}) {
    const double norm = solve(op, rhs, Tikhonov{gamma}).h.norm();
    CHECK(norm <= prev + 1e-12);
    prev = norm;
  }
}

TEST_CASE("cutoff at full rank equals the minimum-norm solution") {
  uhm::num::Rng rng(3105);
  VectorXd sigma(3);
  sigma << 1.2, 0.7, 0.25;
  MatrixXd k = matrix_with_spectrum(rng, 6, 3, sigma);
  DiscretizedOperator op = op_from_matrix(k);
  VectorXd rhs(6);
  for (int i = 0; i < 6; ++i) rhs(i) = rng.normal();
  CHECK((solve(op, rhs, SpectralCutoff{0}).h - min_norm_solution(op, rhs)).norm() <= 1e-8);
}

}
