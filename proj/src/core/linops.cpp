#include "core/linops.hpp"

#include <limits>

namespace uhm::linops {

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
  return pseudo_inverse(m, 0.0);
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double cutoff) {
  if (m.rows() == 0 || m.cols() == 0)
    return Eigen::MatrixXd::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor_cut =
      sv.size() > 0 ? std::max(m.rows(), m.cols()) * eps * sv(0) : 0.0;
  const double cut = std::max(cutoff, floor_cut);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) > cut) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

TruncatedPsdPinv truncated_psd_pinv(const Eigen::MatrixXd& m, double nu) {
  TruncatedPsdPinv out;
  if (m.rows() == 0) {
    out.pinv.resize(0, 0);
    out.eigenvalues.resize(0);
    out.eigenvectors.resize(0, 0);
    out.nu_effective = nu;
    return out;
  }
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const int k = static_cast<int>(sym.rows());
  // Eigen sorts ascending; store the spectrum nonincreasing.
  out.eigenvalues.resize(k);
  out.eigenvectors.resize(k, k);
  for (int i = 0; i < k; ++i) {
    out.eigenvalues(i) = es.eigenvalues()(k - 1 - i);
    out.eigenvectors.col(i) = es.eigenvectors().col(k - 1 - i);
  }
  out.notably_negative = k > 0 && out.eigenvalues.minCoeff() < -1e-8;
  out.eigenvalues = out.eigenvalues.cwiseMax(0.0);
  const double lam_max = k > 0 ? out.eigenvalues(0) : 0.0;
  // Floor the threshold at the machine-rank cutoff so nu = 0 still drops the
  // numerically-zero part of the spectrum (and the result stays a genuine
  // pseudoinverse of the kept part).
  const double eps = std::numeric_limits<double>::epsilon();
  out.nu_effective = std::max(nu, k * eps * lam_max);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < k; ++i) {
    if (out.eigenvalues(i) >= out.nu_effective && out.eigenvalues(i) > 0.0) {
      inv(i) = 1.0 / out.eigenvalues(i);
      ++out.rank;
    }
  }
  out.pinv = out.eigenvectors * inv.asDiagonal() * out.eigenvectors.transpose();
  return out;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

ProjectionPair projections(const Eigen::MatrixXd& v) {
  ProjectionPair p;
  p.H = pseudo_inverse(v);
  p.Q = Eigen::MatrixXd::Identity(v.rows(), v.rows()) - v * p.H;
  return p;
}

SecondOrderProjections second_order(const ProjectionPair& p) {
  SecondOrderProjections s;
  const Eigen::MatrixXd pv =
      Eigen::MatrixXd::Identity(p.Q.rows(), p.Q.cols()) - p.Q;
  const int t2 = static_cast<int>(p.Q.rows() * p.Q.rows());
  s.Qk = Eigen::MatrixXd::Identity(t2, t2) - kron(pv, pv);
  s.Hk = kron(p.H, p.H);
  return s;
}

}  // namespace uhm::linops
