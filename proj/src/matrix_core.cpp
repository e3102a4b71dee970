#include "hdclt/matrix_core.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hdclt {

CovarianceSpec::CovarianceSpec(Eigen::MatrixXd entries)
    : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.rows() != entries_.cols()) {
    throw std::invalid_argument("CovarianceSpec: matrix must be square, dim >= 1");
  }
  if (!entries_.allFinite()) {
    throw std::invalid_argument("CovarianceSpec: entries must be finite");
  }
  const double entry_scale = entries_.cwiseAbs().maxCoeff();
  const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(entry_scale, 1e-300)) {
    std::ostringstream msg;
    msg << "CovarianceSpec: matrix is not symmetric, max asymmetry " << asym
        << " (relative tolerance 1e-12)";
    throw std::invalid_argument(msg.str());
  }
  // Symmetrize exactly so the solver sees a bitwise symmetric matrix.
  entries_ = ((entries_ + entries_.transpose()) * 0.5).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(entries_);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("CovarianceSpec: eigendecomposition failed");
  }
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
  min_eig_signed_ = eigenvalues_.minCoeff();
  min_eig_ = std::max(min_eig_signed_, 0.0);
  scale_ = eigenvalues_.cwiseAbs().maxCoeff();
  min_diag_sqrt_ = std::sqrt(std::max(entries_.diagonal().minCoeff(), 0.0));
}

CovarianceSpec CovarianceSpec::identity(int p) {
  return CovarianceSpec(Eigen::MatrixXd::Identity(p, p));
}

CovarianceSpec CovarianceSpec::diagonal(const Eigen::VectorXd& variances) {
  Eigen::MatrixXd m = variances.asDiagonal();
  return CovarianceSpec(std::move(m));
}

bool CovarianceSpec::is_diagonal(double tol_factor) const {
  const int p = dim();
  const double tol = tol_factor * std::max(scale_, 1e-300);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i != j && std::fabs(entries_(i, j)) > tol) return false;
    }
  }
  return true;
}

double min_eigenvalue(const CovarianceSpec& cov) { return cov.min_eig(); }

Eigen::MatrixXd factor_for_sampling(const CovarianceSpec& cov) {
  const double scale = std::max(cov.scale(), 1e-300);
  if (cov.min_eig_signed() < -1e-8 * scale) {
    std::ostringstream msg;
    msg << "factor_for_sampling: not PSD (min eigenvalue "
        << cov.min_eig_signed() << ", scale " << cov.scale() << ")";
    throw std::invalid_argument(msg.str());
  }
  if (cov.min_eig_signed() > 1e-10 * scale) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov.entries());
    if (llt.info() == Eigen::Success) {
      return Eigen::MatrixXd(llt.matrixL());
    }
  }
  // Spectral factor with eigenvalues clamped at zero.
  Eigen::VectorXd sq = cov.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return cov.eigenvectors() * sq.asDiagonal();
}

GaussianSplit gaussian_split(const CovarianceSpec& cov) {
  const double scale = std::max(cov.scale(), 1e-300);
  if (cov.min_eig_signed() < -1e-8 * scale) {
    throw std::invalid_argument("gaussian_split: input is not PSD");
  }
  const double lambda = cov.min_eig();
  Eigen::MatrixXd rem = cov.entries();
  rem.diagonal().array() -= lambda;
  return GaussianSplit{lambda, CovarianceSpec(std::move(rem))};
}

}  // namespace hdclt
