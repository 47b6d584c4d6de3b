#ifndef UHMOM_FIXTURE_DGP_HPP
#define UHMOM_FIXTURE_DGP_HPP

#include <string>

#include "src/core/driver.hpp"
#include "src/core/numerics.hpp"
#include "src/core/panel_moments.hpp"

// Synthetic panel fixture shaped like a short birth-outcomes panel: three
// periods, two regressors, a unit intercept plus a parity-progression
// loading. The second heterogeneity component is correlated with the first
// regressor, so the debiasing correction has real work to do. The bundled
// dataset and the coverage draws in the tests both come from here.

namespace uhm::fixture {

inline constexpr int kN = 200;
inline constexpr int kT = 3;
inline constexpr double kBeta1 = 0.4;
inline constexpr double kBeta2 = -0.3;
inline constexpr double kMeanAlpha2 = -0.5;  // estimand of the ame target
inline constexpr double kNoiseSd = 0.2;

inline panel::Dataset draw(int n, std::uint64_t seed) {
  num::Rng rng(seed);
  panel::Dataset d;
  d.n = n;
  d.T = kT;
  d.p = 2;
  d.q = 2;
  const Eigen::Vector2d beta(kBeta1, kBeta2);
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd W(kT, 2);
    for (int t = 0; t < kT; ++t)
      for (int j = 0; j < 2; ++j) W(t, j) = rng.normal();
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(kT, 2);
    V.col(0).setOnes();
    // progression dummy: switches on at t = 2 for even units, t = 3 for odd
    if (i % 2 == 0) {
      V(1, 1) = 1.0;
      V(2, 1) = 1.0;
    } else {
      V(2, 1) = 1.0;
    }
    const double alpha1 = 1.0 + 0.5 * rng.normal();
    const double alpha2 =
        kMeanAlpha2 + 0.4 * W.col(0).mean() + 0.3 * rng.normal();
    Eigen::VectorXd y = W * beta + V * Eigen::Vector2d(alpha1, alpha2);
    for (int t = 0; t < kT; ++t) y[t] += kNoiseSd * rng.normal();
    d.Y.push_back(std::move(y));
    d.W.push_back(std::move(W));
    d.V.push_back(std::move(V));
  }
  return d;
}

// Long-format text in the schema the readers expect, units u001, u002, ...
inline std::string to_csv(const panel::Dataset& d) {
  std::string out = "unit_id,time,y,w_1,w_2,v_1,v_2\n";
  for (int i = 0; i < d.n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "u%03d", i + 1);
    for (int t = 0; t < d.T; ++t) {
      out += std::string(id) + "," + std::to_string(t + 1) + "," +
             driver::format_real(d.Y[i][t]);
      for (int j = 0; j < d.p; ++j)
        out += "," + driver::format_real(d.W[i](t, j));
      for (int j = 0; j < d.q; ++j)
        out += "," + driver::format_real(d.V[i](t, j));
      out += "\n";
    }
  }
  return out;
}

}  // namespace uhm::fixture

#endif
