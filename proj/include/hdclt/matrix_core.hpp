#pragma once

#include <Eigen/Dense>

namespace hdclt {

// Symmetric matrix with cached spectral data. Construction validates
// symmetry (1e-12 relative) and finiteness and runs a self-adjoint
// eigendecomposition once; all downstream users read the cache.
//
// min_eig() is clamped at zero: covariance matrices are PSD up to floating
// point noise and the clamp keeps tiny negative eigenvalues from leaking
// into square roots. The signed value stays available for PSD checks.
class CovarianceSpec {
 public:
  explicit CovarianceSpec(Eigen::MatrixXd entries);

  static CovarianceSpec identity(int p);
  static CovarianceSpec diagonal(const Eigen::VectorXd& variances);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }

  double min_eig() const { return min_eig_; }
  double min_eig_signed() const { return min_eig_signed_; }
  /// Largest absolute eigenvalue; the scale all relative tolerances use.
  double scale() const { return scale_; }
  /// sigma_min = min_j Sigma_jj^{1/2}.
  double min_diag_sqrt() const { return min_diag_sqrt_; }

  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }

  bool is_diagonal(double tol_factor = 1e-12) const;

 private:
  Eigen::MatrixXd entries_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  double min_eig_signed_;
  double min_eig_;
  double scale_;
  double min_diag_sqrt_;
};

/// Smallest eigenvalue, clamped at zero.
double min_eigenvalue(const CovarianceSpec& cov);

/// Factor F with F F^T = Sigma for sampling N(0, Sigma). Uses Cholesky when
/// the matrix is safely positive definite and falls back to a spectral
/// factor with eigenvalues clamped at zero otherwise, so rank-deficient
/// covariances (the counterexample family drives lambda_min to 0) remain
/// sampleable. Throws if an eigenvalue is below -1e-8 * scale.
Eigen::MatrixXd factor_for_sampling(const CovarianceSpec& cov);

struct GaussianSplit {
  double lambda;            // min eigenvalue
  CovarianceSpec remainder; // Sigma - lambda I, PSD up to 1e-9 * scale noise
};

/// N(0, Sigma) = N(0, lambda I) + N(0, Sigma - lambda I) with independent
/// summands; lambda = lambda_min(Sigma). The identity lambda I + remainder
/// = Sigma holds entrywise exactly.
GaussianSplit gaussian_split(const CovarianceSpec& cov);

}  // namespace hdclt
