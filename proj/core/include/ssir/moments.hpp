#pragma once

#include <memory>
#include <vector>

#include "ssir/linalg.hpp"

namespace ssir {

// Equal-frequency slicing of a response vector.
//
// With n observations and H requested slices, the observation with the i-th
// smallest response (1-indexed, ties kept in stable sort order) lands in
// slice ceil(i * H / n). When the response takes at most H distinct values
// it is treated as categorical instead: one slice per distinct value, and
// the effective H shrinks to the number of distinct values.
struct SlicePlan {
  std::vector<int> assignment;  // slice of each observation, 0-based
  std::vector<int> counts;      // per-slice observation counts, all > 0
  int H = 0;                    // effective number of slices
  bool categorical = false;

  int n() const { return static_cast<int>(assignment.size()); }
  double prop(int h) const {
    return static_cast<double>(counts[static_cast<std::size_t>(h)]) /
           static_cast<double>(assignment.size());
  }
};

enum class KernelEstimator {
  kSliceMeans,  // weighted between-slice covariance of slice means
  kResidual,    // total covariance minus averaged within-slice covariance
};

// Sample moments the whole method runs on: covariance of the predictors and
// a between-slice kernel whose top generalized eigenvectors span the
// estimated directions.
struct SlicedMoments {
  int n = 0;
  SymMatrix sigma_hat;
  SymMatrix kernel_hat;
  std::vector<double> slice_props;
  Vector grand_mean;
  KernelEstimator estimator = KernelEstimator::kSliceMeans;
  // For the slice-means estimator: p x H factor with
  // kernel_hat = kernel_factor * kernel_factor^T (columns are the centered
  // slice means scaled by sqrt(p_h)). Empty when no factor is available;
  // consumers must handle both states.
  Matrix kernel_factor;

  int p() const { return sigma_hat.dim(); }
  int H() const { return static_cast<int>(slice_props.size()); }
};

// Throws DegenerateResponse when all responses are equal; requires H >= 2.
SlicePlan make_slices(const Vector& y, int H);

// Sample covariance with 1/n normalization and grand-mean centering.
// X is n x p, observations in rows. Requires n >= 2.
SymMatrix cov_hat(const Matrix& X);

// Between-slice kernel: sum_h p_h (m_h - mbar)(m_h - mbar)^T, where m_h is
// the slice mean, p_h the slice proportion, mbar the grand mean. Positive
// semidefinite by construction.
SymMatrix kernel_means(const Matrix& X, const SlicePlan& plan);

// Residual kernel: cov_hat(X) minus the within-slice covariance average
// (1/H) sum_h (1/n_h) sum_{i in slice h} (x_i - m_h)(x_i - m_h)^T.
// Throws SliceTooSmall when any slice has fewer than 2 observations.
SymMatrix kernel_residual(const Matrix& X, const SlicePlan& plan);

// Slice y, then assemble both moment matrices with the chosen estimator.
SlicedMoments build_moments(const Matrix& X, const Vector& y, int H,
                            KernelEstimator estimator = KernelEstimator::kSliceMeans);

// Uniform access to principal submatrix pairs (kernel block, covariance
// block) for the projection engine. Two implementations: one extracts from
// precomputed p x p moments, the other recomputes k x k moments from the
// data columns so that very wide designs never materialize p x p matrices.
class MomentSource {
 public:
  virtual ~MomentSource() = default;
  virtual int dim() const = 0;
  virtual int sample_size() const = 0;
  virtual const std::vector<double>& slice_props() const = 0;
  // Writes the (S, S) blocks of the kernel into `kernel` and of the
  // covariance into `cov`, resizing both to |S| x |S|.
  virtual void fill_pair(const std::vector<int>& S, Matrix& kernel,
                         Matrix& cov) const = 0;
  // Number of columns of a factor C with kernel = C C^T, when the kernel is
  // available in factored form; 0 otherwise. A positive value lets the
  // scoring loop work with an r x r Gram matrix instead of a k x k pencil,
  // since the nonzero spectra coincide.
  virtual int factor_cols() const { return 0; }
  // Writes the S rows of the kernel factor into `factor` (|S| x
  // factor_cols) and the (S, S) covariance block into `cov`. Only valid
  // when factor_cols() > 0.
  virtual void fill_factored(const std::vector<int>& S, Matrix& factor,
                             Matrix& cov) const {
    (void)S;
    (void)factor;
    (void)cov;
    throw InvalidArgument("fill_factored: source has no kernel factor");
  }
  // Materializes dense moments restricted to S (used by the second pass of
  // the reweighted algorithm and by final basis extraction).
  virtual SlicedMoments restrict(const std::vector<int>& S) const = 0;
};

class DenseMomentSource final : public MomentSource {
 public:
  explicit DenseMomentSource(const SlicedMoments& moments);

  int dim() const override { return moments_.p(); }
  int sample_size() const override { return moments_.n; }
  const std::vector<double>& slice_props() const override {
    return moments_.slice_props;
  }
  void fill_pair(const std::vector<int>& S, Matrix& kernel,
                 Matrix& cov) const override;
  int factor_cols() const override {
    return static_cast<int>(moments_.kernel_factor.cols());
  }
  void fill_factored(const std::vector<int>& S, Matrix& factor,
                     Matrix& cov) const override;
  SlicedMoments restrict(const std::vector<int>& S) const override;

  const SlicedMoments& moments() const { return moments_; }

 private:
  const SlicedMoments& moments_;
};

// Recomputes each k x k pair from the centered data matrix. fill_pair costs
// O(n k^2) instead of O(k^2) but total memory stays O(n p).
class DataMomentSource final : public MomentSource {
 public:
  DataMomentSource(const Matrix& X, const Vector& y, int H,
                   KernelEstimator estimator = KernelEstimator::kSliceMeans);

  int dim() const override { return static_cast<int>(Xc_.cols()); }
  int sample_size() const override { return static_cast<int>(Xc_.rows()); }
  const std::vector<double>& slice_props() const override { return props_; }
  void fill_pair(const std::vector<int>& S, Matrix& kernel,
                 Matrix& cov) const override;
  int factor_cols() const override {
    return static_cast<int>(factor_.cols());
  }
  void fill_factored(const std::vector<int>& S, Matrix& factor,
                     Matrix& cov) const override;
  SlicedMoments restrict(const std::vector<int>& S) const override;

  const SlicePlan& plan() const { return plan_; }

 private:
  void fill_cov(const std::vector<int>& S, Matrix& Xs, Matrix& cov) const;

  Matrix Xc_;  // grand-mean centered data
  Vector grand_mean_;
  SlicePlan plan_;
  std::vector<double> props_;
  std::vector<std::vector<int>> slice_rows_;
  KernelEstimator estimator_;
  Matrix factor_;  // p x H kernel factor for the slice-means estimator
};

}  // namespace ssir
