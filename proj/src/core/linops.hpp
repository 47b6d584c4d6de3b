#ifndef UHMOM_LINOPS_HPP
#define UHMOM_LINOPS_HPP

#include <Eigen/Dense>

// Dense linear-algebra helpers: Moore-Penrose inverses, the spectral
// truncation used for weighting matrices, Kronecker products, and the
// within-unit annihilator / recovery operators built from a loading matrix.

namespace uhm::linops {

// Moore-Penrose pseudoinverse by SVD. Singular values below
// max(rows, cols) * eps * sigma_max are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m);

// Same, with an explicit absolute cutoff on singular values; the machine
// floor above still applies so a tiny cutoff never resurrects noise.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double cutoff);

// Pseudoinverse of a symmetric PSD matrix with eigenvalues below nu zeroed
// out. The input is symmetrized first; small negative eigenvalues (rounding)
// are clamped to zero, and notably_negative flags anything below -1e-8.
struct TruncatedPsdPinv {
  Eigen::MatrixXd pinv;         // thresholded Moore-Penrose inverse
  Eigen::VectorXd eigenvalues;  // clamped spectrum, nonincreasing
  Eigen::MatrixXd eigenvectors; // columns aligned with eigenvalues
  int rank = 0;                 // eigenvalues kept
  double nu_effective = 0.0;    // threshold actually applied
  bool notably_negative = false;
};
TruncatedPsdPinv truncated_psd_pinv(const Eigen::MatrixXd& m, double nu);

// kron(A, B): standard Kronecker product, (ij)-block = a_ij * B.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// First-order operators for a T x q loading matrix V:
//   Q = I - V V^+  annihilates the span of V's columns,
//   H = V^+        recovers loadings coordinates: H V = I when V has full
//                  column rank.
struct ProjectionPair {
  Eigen::MatrixXd Q;  // T x T
  Eigen::MatrixXd H;  // q x T
};
ProjectionPair projections(const Eigen::MatrixXd& v);

// Second-order counterparts acting on vec of T x T outer products:
//   Qk = I - (I - Q) kron (I - Q)  annihilates vec(V a b' V'),
//   Hk = H kron H                  maps vec(V a b' V') to b kron a.
struct SecondOrderProjections {
  Eigen::MatrixXd Qk;  // T^2 x T^2
  Eigen::MatrixXd Hk;  // q^2 x T^2
};
SecondOrderProjections second_order(const ProjectionPair& p);

}  // namespace uhm::linops

#endif
