#include "ssir/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace ssir {

namespace {

constexpr double kGramConditionLimit = 1e12;

// Solve G X = B for symmetric positive definite G, guarding conditioning.
Matrix solve_gram(const Matrix& gram, const Matrix& rhs, const char* where) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success) {
    throw SingularGram(std::string(where) + ": Gram eigensolve failed");
  }
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kGramConditionLimit) {
    throw SingularGram(std::string(where) + ": Gram matrix is numerically singular");
  }
  return Eigen::LLT<Matrix>(gram).solve(rhs);
}

void check_orthonormal(const Matrix& u, const char* where) {
  const int d = static_cast<int>(u.cols());
  const Matrix gram = u.transpose() * u;
  const double err = (gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  if (!(err <= 1e-8)) {
    throw NotOrthonormal(std::string(where) + ": columns are not orthonormal");
  }
}

void check_shapes(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(where) + ": shape mismatch");
  }
  if (a.cols() < 1 || a.rows() < a.cols()) {
    throw InvalidArgument(std::string(where) + ": need p >= d >= 1");
  }
}

}  // namespace

double correlation_loss(const Matrix& b_hat, const Matrix& b_true,
                        const SymMatrix& sigma) {
  check_shapes(b_hat, b_true, "correlation_loss");
  if (b_hat.rows() != sigma.dim()) {
    throw InvalidArgument("correlation_loss: covariance dimension mismatch");
  }
  const int d = static_cast<int>(b_hat.cols());
  const Matrix s_hat = sigma.mat() * b_hat;
  const Matrix s_true = sigma.mat() * b_true;
  const Matrix g_hh = b_hat.transpose() * s_hat;
  const Matrix g_tt = b_true.transpose() * s_true;
  const Matrix g_ht = b_hat.transpose() * s_true;

  const Matrix a = solve_gram(g_hh, g_ht, "correlation_loss");           // Ghh^-1 Ght
  const Matrix b = solve_gram(g_tt, g_ht.transpose(), "correlation_loss");  // Gtt^-1 Gth
  const double trace = (a * b).trace();
  const double loss = 1.0 - trace / static_cast<double>(d);
  return std::clamp(loss, 0.0, 1.0);
}

double projection_loss(const Matrix& u, const Matrix& v) {
  check_shapes(u, v, "projection_loss");
  check_orthonormal(u, "projection_loss");
  check_orthonormal(v, "projection_loss");
  const Matrix diff = u * u.transpose() - v * v.transpose();
  return diff.norm();
}

double sin_theta_loss(const Matrix& u, const Matrix& v) {
  check_shapes(u, v, "sin_theta_loss");
  check_orthonormal(u, "sin_theta_loss");
  check_orthonormal(v, "sin_theta_loss");
  Eigen::JacobiSVD<Matrix> svd(u.transpose() * v);
  double sum = 0.0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    const double s = std::clamp(svd.singularValues()(i), 0.0, 1.0);
    sum += 1.0 - s * s;
  }
  return std::sqrt(std::max(sum, 0.0));
}

bool signal_hit(const IndexSet& estimated, const IndexSet& truth) {
  return std::includes(estimated.begin(), estimated.end(), truth.begin(),
                       truth.end());
}

namespace {

Matrix orthonormal_frame(const Matrix& b) {
  Eigen::HouseholderQR<Matrix> qr(b);
  Matrix q = qr.householderQ() * Matrix::Identity(b.rows(), b.cols());
  return q;
}

}  // namespace

LossReport compute_losses(const Matrix& b_hat, const Matrix& b_true,
                          const SymMatrix& sigma, const IndexSet& estimated,
                          const IndexSet& truth) {
  LossReport report;
  report.correlation = correlation_loss(b_hat, b_true, sigma);
  const Matrix qu = orthonormal_frame(b_hat);
  const Matrix qv = orthonormal_frame(b_true);
  report.projection = projection_loss(qu, qv);
  report.sin_theta = sin_theta_loss(qu, qv);
  report.signal = signal_hit(estimated, truth);
  report.signal_exact = estimated == truth;
  return report;
}

}  // namespace ssir
