#ifndef UHMOM_ILLPOSED_HPP
#define UHMOM_ILLPOSED_HPP

#include <Eigen/Dense>
#include <functional>
#include <variant>
#include <vector>

// First-kind integral equations K h = rhs by collocation, with three
// interchangeable regularization schemes plus the exact minimum-norm
// least-squares solution as the gamma -> 0 reference point.

namespace uhm::illposed {

// Kernel evaluations on finite grids. The 1/n_alpha column averaging is
// applied once, here, so K h approximates the integral (empirical average
// over the input grid) of kernel(z, a) h(a).
struct DiscretizedOperator {
  Eigen::MatrixXd K;  // n_z x n_alpha, already scaled by 1/n_alpha
  std::vector<double> out_grid;
  std::vector<double> in_grid;
};

DiscretizedOperator collocate(
    const std::function<double(double, double)>& kernel,
    const std::vector<double>& out_grid, const std::vector<double>& in_grid);

// h* = (K'K)^+ K' rhs.
Eigen::VectorXd min_norm_solution(const DiscretizedOperator& op,
                                  const Eigen::VectorXd& rhs);

struct LandweberFridman {
  double c = 0.0;  // 0 = default 1/sigma_max^2; rescaled if c*sigma_max^2 > 1
  int steps = 1000;
};
struct Tikhonov {
  double gamma = 0.0;  // 0 = default 1e-4 * sigma_max^2
};
struct SpectralCutoff {
  int ks = 0;  // singular values kept; 0 = all
};
using Scheme = std::variant<LandweberFridman, Tikhonov, SpectralCutoff>;

struct Solution {
  Eigen::VectorXd h;
  bool rescaled_c = false;  // LF step size was shrunk to keep c*sigma_max^2 <= 1
};

Solution solve(const DiscretizedOperator& op, const Eigen::VectorXd& rhs,
               const Scheme& scheme);

}  // namespace uhm::illposed

#endif
