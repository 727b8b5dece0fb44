#include "ssir/moments.hpp"

#include <algorithm>
#include <numeric>

namespace ssir {

SlicePlan make_slices(const Vector& y, int H) {
  const int n = static_cast<int>(y.size());
  if (H < 2) {
    throw InvalidArgument("make_slices: H must be at least 2");
  }
  if (n < 2) {
    throw InvalidArgument("make_slices: need at least 2 observations");
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return y(a) < y(b); });

  int distinct = 1;
  for (int r = 1; r < n; ++r) {
    if (y(order[static_cast<std::size_t>(r)]) !=
        y(order[static_cast<std::size_t>(r - 1)])) {
      ++distinct;
    }
  }
  if (distinct == 1) {
    throw DegenerateResponse("make_slices: response is constant");
  }

  SlicePlan plan;
  plan.assignment.assign(static_cast<std::size_t>(n), 0);
  if (distinct <= H) {
    // Categorical response: one slice per distinct value.
    plan.categorical = true;
    plan.H = distinct;
    plan.counts.assign(static_cast<std::size_t>(distinct), 0);
    int slice = 0;
    for (int r = 0; r < n; ++r) {
      if (r > 0 && y(order[static_cast<std::size_t>(r)]) !=
                       y(order[static_cast<std::size_t>(r - 1)])) {
        ++slice;
      }
      plan.assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = slice;
      ++plan.counts[static_cast<std::size_t>(slice)];
    }
    return plan;
  }

  plan.H = H;
  plan.counts.assign(static_cast<std::size_t>(H), 0);
  for (int r = 0; r < n; ++r) {
    // rank r is 0-based; the rule is ceil((r+1) * H / n), shifted to 0-based.
    const long long i = static_cast<long long>(r) + 1;
    const int slice = static_cast<int>((i * H + n - 1) / n) - 1;
    plan.assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = slice;
    ++plan.counts[static_cast<std::size_t>(slice)];
  }
  return plan;
}

SymMatrix cov_hat(const Matrix& X) {
  const int n = static_cast<int>(X.rows());
  if (n < 2) {
    throw InvalidArgument("cov_hat: need at least 2 observations");
  }
  const Vector mean = X.colwise().mean();
  Matrix centered = X.rowwise() - mean.transpose();
  Matrix sigma = Matrix::Zero(X.cols(), X.cols());
  sigma.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(),
                                                   1.0 / n);
  return SymMatrix::from_lower(std::move(sigma));
}

namespace {

// Slice means of X stacked as rows of an H x p matrix.
Matrix slice_mean_rows(const Matrix& X, const SlicePlan& plan) {
  Matrix sums = Matrix::Zero(plan.H, X.cols());
  for (int i = 0; i < plan.n(); ++i) {
    sums.row(plan.assignment[static_cast<std::size_t>(i)]) += X.row(i);
  }
  for (int h = 0; h < plan.H; ++h) {
    sums.row(h) /= static_cast<double>(plan.counts[static_cast<std::size_t>(h)]);
  }
  return sums;
}

void check_plan_matches(const Matrix& X, const SlicePlan& plan,
                        const char* where) {
  if (plan.n() != static_cast<int>(X.rows())) {
    throw InvalidArgument(std::string(where) +
                          ": slice plan does not match the data");
  }
}

// Centered slice means scaled by sqrt(p_h), stacked as rows (H x p). The
// slice-means kernel is D^T D for this matrix.
Matrix scaled_centered_means(const Matrix& X, const SlicePlan& plan) {
  const int n = plan.n();
  const Vector grand = X.colwise().mean();
  Matrix means = slice_mean_rows(X, plan);
  for (int h = 0; h < plan.H; ++h) {
    const double w = std::sqrt(static_cast<double>(plan.counts[static_cast<std::size_t>(h)]) /
                               static_cast<double>(n));
    means.row(h) = w * (means.row(h) - grand.transpose());
  }
  return means;
}

}  // namespace

SymMatrix kernel_means(const Matrix& X, const SlicePlan& plan) {
  check_plan_matches(X, plan, "kernel_means");
  const Matrix means = scaled_centered_means(X, plan);
  Matrix kernel = Matrix::Zero(X.cols(), X.cols());
  kernel.selfadjointView<Eigen::Lower>().rankUpdate(means.transpose(), 1.0);
  return SymMatrix::from_lower(std::move(kernel));
}

SymMatrix kernel_residual(const Matrix& X, const SlicePlan& plan) {
  check_plan_matches(X, plan, "kernel_residual");
  for (int h = 0; h < plan.H; ++h) {
    if (plan.counts[static_cast<std::size_t>(h)] < 2) {
      throw SliceTooSmall("kernel_residual: every slice needs >= 2 observations");
    }
  }
  const Matrix means = slice_mean_rows(X, plan);
  // (1/H) sum_h (1/n_h) sum_{i in h} (x_i - m_h)(x_i - m_h)^T. Scaling each
  // deviation row by sqrt of its weight turns the sum into one rank update.
  Matrix dev(X.rows(), X.cols());
  for (int i = 0; i < plan.n(); ++i) {
    const int h = plan.assignment[static_cast<std::size_t>(i)];
    const double w = 1.0 / (static_cast<double>(plan.H) *
                            static_cast<double>(plan.counts[static_cast<std::size_t>(h)]));
    dev.row(i) = std::sqrt(w) *
                 (X.row(i) - means.row(h));
  }
  Matrix within = Matrix::Zero(X.cols(), X.cols());
  within.selfadjointView<Eigen::Lower>().rankUpdate(dev.transpose(), 1.0);
  const SymMatrix total = cov_hat(X);
  Matrix result = total.mat() - within.selfadjointView<Eigen::Lower>().toDenseMatrix();
  return SymMatrix::from_lower(std::move(result));
}

SlicedMoments build_moments(const Matrix& X, const Vector& y, int H,
                            KernelEstimator estimator) {
  if (X.rows() != y.size()) {
    throw InvalidArgument("build_moments: X and y disagree on n");
  }
  const SlicePlan plan = make_slices(y, H);
  SlicedMoments out;
  out.n = static_cast<int>(X.rows());
  out.sigma_hat = cov_hat(X);
  if (estimator == KernelEstimator::kSliceMeans) {
    const Matrix means = scaled_centered_means(X, plan);
    Matrix kernel = Matrix::Zero(X.cols(), X.cols());
    kernel.selfadjointView<Eigen::Lower>().rankUpdate(means.transpose(), 1.0);
    out.kernel_hat = SymMatrix::from_lower(std::move(kernel));
    out.kernel_factor = means.transpose();
  } else {
    out.kernel_hat = kernel_residual(X, plan);
  }
  out.slice_props.resize(static_cast<std::size_t>(plan.H));
  for (int h = 0; h < plan.H; ++h) {
    out.slice_props[static_cast<std::size_t>(h)] = plan.prop(h);
  }
  out.grand_mean = X.colwise().mean();
  out.estimator = estimator;
  return out;
}

DenseMomentSource::DenseMomentSource(const SlicedMoments& moments)
    : moments_(moments) {
  if (moments.kernel_hat.dim() != moments.sigma_hat.dim()) {
    throw InvalidArgument("DenseMomentSource: moment dimensions disagree");
  }
}

void DenseMomentSource::fill_pair(const std::vector<int>& S, Matrix& kernel,
                                  Matrix& cov) const {
  detail::gather_block(moments_.kernel_hat.mat(), S, kernel);
  detail::gather_block(moments_.sigma_hat.mat(), S, cov);
}

namespace {

void gather_factor_rows(const Matrix& source, const std::vector<int>& S,
                        Matrix& factor) {
  const int k = static_cast<int>(S.size());
  factor.resize(k, source.cols());
  for (int i = 0; i < k; ++i) {
    factor.row(i) = source.row(S[static_cast<std::size_t>(i)]);
  }
}

}  // namespace

void DenseMomentSource::fill_factored(const std::vector<int>& S,
                                      Matrix& factor, Matrix& cov) const {
  gather_factor_rows(moments_.kernel_factor, S, factor);
  detail::gather_block(moments_.sigma_hat.mat(), S, cov);
}

SlicedMoments DenseMomentSource::restrict(const std::vector<int>& S) const {
  detail::check_index_set(S, dim(), "DenseMomentSource::restrict");
  SlicedMoments out;
  out.n = moments_.n;
  out.sigma_hat = principal_submatrix(moments_.sigma_hat, S);
  out.kernel_hat = principal_submatrix(moments_.kernel_hat, S);
  out.slice_props = moments_.slice_props;
  out.grand_mean.resize(static_cast<Eigen::Index>(S.size()));
  for (std::size_t i = 0; i < S.size(); ++i) {
    out.grand_mean(static_cast<Eigen::Index>(i)) = moments_.grand_mean(S[i]);
  }
  out.estimator = moments_.estimator;
  if (moments_.kernel_factor.cols() > 0) {
    gather_factor_rows(moments_.kernel_factor, S, out.kernel_factor);
  }
  return out;
}

DataMomentSource::DataMomentSource(const Matrix& X, const Vector& y, int H,
                                   KernelEstimator estimator)
    : estimator_(estimator) {
  if (X.rows() != y.size()) {
    throw InvalidArgument("DataMomentSource: X and y disagree on n");
  }
  plan_ = make_slices(y, H);
  grand_mean_ = X.colwise().mean();
  Xc_ = X.rowwise() - grand_mean_.transpose();
  props_.resize(static_cast<std::size_t>(plan_.H));
  slice_rows_.resize(static_cast<std::size_t>(plan_.H));
  for (int h = 0; h < plan_.H; ++h) {
    props_[static_cast<std::size_t>(h)] = plan_.prop(h);
  }
  for (int i = 0; i < plan_.n(); ++i) {
    slice_rows_[static_cast<std::size_t>(plan_.assignment[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  if (estimator_ == KernelEstimator::kResidual) {
    for (int h = 0; h < plan_.H; ++h) {
      if (plan_.counts[static_cast<std::size_t>(h)] < 2) {
        throw SliceTooSmall("DataMomentSource: every slice needs >= 2 observations");
      }
    }
  } else {
    // Same factor the dense pipeline stores; computed from the raw data so
    // both paths share one arithmetic definition.
    Matrix means = Matrix::Zero(plan_.H, X.cols());
    for (int i = 0; i < plan_.n(); ++i) {
      means.row(plan_.assignment[static_cast<std::size_t>(i)]) += X.row(i);
    }
    for (int h = 0; h < plan_.H; ++h) {
      means.row(h) /= static_cast<double>(plan_.counts[static_cast<std::size_t>(h)]);
      means.row(h) -= grand_mean_.transpose();
      means.row(h) *= std::sqrt(props_[static_cast<std::size_t>(h)]);
    }
    factor_ = means.transpose();
  }
}

void DataMomentSource::fill_cov(const std::vector<int>& S, Matrix& Xs,
                                Matrix& cov) const {
  const int k = static_cast<int>(S.size());
  const int n = sample_size();
  Xs.resize(n, k);
  for (int j = 0; j < k; ++j) {
    Xs.col(j) = Xc_.col(S[static_cast<std::size_t>(j)]);
  }
  // Columns of Xc_ are centered up to rounding; recenter the selection so
  // both source implementations agree to high precision.
  const Vector mu = Xs.colwise().mean();
  Xs.rowwise() -= mu.transpose();

  cov = Matrix::Zero(k, k);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(Xs.transpose(), 1.0 / n);
  cov.triangularView<Eigen::StrictlyUpper>() =
      cov.transpose().triangularView<Eigen::StrictlyUpper>();
}

void DataMomentSource::fill_factored(const std::vector<int>& S,
                                     Matrix& factor, Matrix& cov) const {
  gather_factor_rows(factor_, S, factor);
  Matrix Xs;
  fill_cov(S, Xs, cov);
}

void DataMomentSource::fill_pair(const std::vector<int>& S, Matrix& kernel,
                                 Matrix& cov) const {
  const int k = static_cast<int>(S.size());
  const int n = sample_size();
  Matrix Xs;
  fill_cov(S, Xs, cov);

  Matrix means = Matrix::Zero(plan_.H, k);
  for (int i = 0; i < n; ++i) {
    means.row(plan_.assignment[static_cast<std::size_t>(i)]) += Xs.row(i);
  }
  for (int h = 0; h < plan_.H; ++h) {
    means.row(h) /= static_cast<double>(plan_.counts[static_cast<std::size_t>(h)]);
  }

  kernel = Matrix::Zero(k, k);
  if (estimator_ == KernelEstimator::kSliceMeans) {
    Matrix scaled = means;
    for (int h = 0; h < plan_.H; ++h) {
      scaled.row(h) *= std::sqrt(props_[static_cast<std::size_t>(h)]);
    }
    kernel.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose(), 1.0);
  } else {
    Matrix dev(n, k);
    for (int i = 0; i < n; ++i) {
      const int h = plan_.assignment[static_cast<std::size_t>(i)];
      const double w = 1.0 / (static_cast<double>(plan_.H) *
                              static_cast<double>(plan_.counts[static_cast<std::size_t>(h)]));
      dev.row(i) = std::sqrt(w) * (Xs.row(i) - means.row(h));
    }
    kernel.selfadjointView<Eigen::Lower>().rankUpdate(dev.transpose(), 1.0);
    kernel = cov - kernel;
  }
  kernel.triangularView<Eigen::StrictlyUpper>() =
      kernel.transpose().triangularView<Eigen::StrictlyUpper>();
}

SlicedMoments DataMomentSource::restrict(const std::vector<int>& S) const {
  detail::check_index_set(S, dim(), "DataMomentSource::restrict");
  Matrix kernel;
  Matrix cov;
  fill_pair(S, kernel, cov);
  SlicedMoments out;
  out.n = sample_size();
  out.sigma_hat = SymMatrix::from_lower(std::move(cov));
  out.kernel_hat = SymMatrix::from_lower(std::move(kernel));
  out.slice_props = props_;
  out.grand_mean.resize(static_cast<Eigen::Index>(S.size()));
  for (std::size_t i = 0; i < S.size(); ++i) {
    out.grand_mean(static_cast<Eigen::Index>(i)) = grand_mean_(S[i]);
  }
  out.estimator = estimator_;
  return out;
}

}  // namespace ssir
