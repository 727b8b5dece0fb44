#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "ssir/moments.hpp"
#include "ssir/rng.hpp"

using ssir::Matrix;
using ssir::SlicePlan;
using ssir::SymMatrix;
using ssir::Vector;

namespace {

Matrix random_matrix(ssir::RngStream& stream, int n, int p) {
  Matrix x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      x(i, j) = stream.next_normal();
    }
  }
  return x;
}

Vector random_response(ssir::RngStream& stream, int n) {
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    y(i) = stream.next_normal();
  }
  return y;
}

}  // namespace

TEST_SUITE("moments") {

TEST_CASE("make_slices follows the ceiling rule on distinct responses") {
  Vector y(6);
  y << 10, 20, 30, 40, 50, 60;
  const SlicePlan plan = ssir::make_slices(y, 2);
  CHECK(plan.H == 2);
  CHECK_FALSE(plan.categorical);
  CHECK(plan.counts == std::vector<int>{3, 3});
  // observation i has rank i here, so the first three go to slice 0
  for (int i = 0; i < 3; ++i) CHECK(plan.assignment[static_cast<std::size_t>(i)] == 0);
  for (int i = 3; i < 6; ++i) CHECK(plan.assignment[static_cast<std::size_t>(i)] == 1);

  // Uneven split: n = 5, H = 2 puts ceil(i*2/5) ranks {1,2} vs {3,4,5}.
  Vector y5(5);
  y5 << 5, 1, 3, 2, 4;
  const SlicePlan plan5 = ssir::make_slices(y5, 2);
  CHECK(plan5.counts == std::vector<int>{2, 3});
  CHECK(plan5.assignment[1] == 0);  // smallest value
  CHECK(plan5.assignment[0] == 1);  // largest value
}

TEST_CASE("make_slices treats few-valued responses as categorical") {
  Vector y(4);
  y << 1, 1, 2, 2;
  const SlicePlan plan = ssir::make_slices(y, 2);
  CHECK(plan.categorical);
  CHECK(plan.counts == std::vector<int>{2, 2});

  // Five distinct values with H = 5: one slice each.
  Vector y5(5);
  y5 << 5, 1, 3, 2, 4;
  const SlicePlan plan5 = ssir::make_slices(y5, 5);
  CHECK(plan5.categorical);
  CHECK(plan5.H == 5);
  CHECK(plan5.counts == std::vector<int>(5, 1));
  CHECK(plan5.assignment[1] == 0);
  CHECK(plan5.assignment[0] == 4);

  // Binary response under a larger H collapses to two slices.
  Vector yb(8);
  yb << 0, 1, 0, 1, 0, 1, 0, 1;
  const SlicePlan planb = ssir::make_slices(yb, 10);
  CHECK(planb.H == 2);
  CHECK(planb.counts == std::vector<int>{4, 4});
}

TEST_CASE("make_slices keeps ties in stable sort order") {
  Vector y(4);
  y << 2, 1, 2, 1;
  const SlicePlan plan = ssir::make_slices(y, 4);
  // Two distinct values <= H: categorical with stable assignment.
  CHECK(plan.H == 2);
  CHECK(plan.assignment == std::vector<int>{1, 0, 1, 0});
}

TEST_CASE("make_slices rejects constant and undersized input") {
  Vector y = Vector::Ones(5);
  CHECK_THROWS_AS(ssir::make_slices(y, 2), ssir::DegenerateResponse);
  Vector y2(3);
  y2 << 1, 2, 3;
  CHECK_THROWS_AS(ssir::make_slices(y2, 1), ssir::InvalidArgument);
  Vector y3(1);
  y3 << 1;
  CHECK_THROWS_AS(ssir::make_slices(y3, 2), ssir::InvalidArgument);
}

TEST_CASE("cov_hat equals the brute force double loop") {
  ssir::RngStream stream(ssir::derive_key(11, 0x31));
  const Matrix x = random_matrix(stream, 10, 3);
  const SymMatrix cov = ssir::cov_hat(x);
  const Matrix ref = oracle::brute_force_cov(x);
  CHECK((cov.mat() - ref).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("kernel_means reproduces the one-dimensional hand example") {
  // X = (0, 2, 10, 12), slices {0,1} and {2,3}: slice means 1 and 11,
  // grand mean 6, kernel = 0.5*25 + 0.5*25 = 25.
  Matrix x(4, 1);
  x << 0, 2, 10, 12;
  Vector y(4);
  y << 1, 2, 3, 4;
  const SlicePlan plan = ssir::make_slices(y, 2);
  const SymMatrix kernel = ssir::kernel_means(x, plan);
  CHECK(kernel(0, 0) == doctest::Approx(25.0).epsilon(1e-14));
}

TEST_CASE("kernel_residual reproduces the hand example") {
  // Same data: total covariance 26, average within-slice covariance 1.
  Matrix x(4, 1);
  x << 0, 2, 10, 12;
  Vector y(4);
  y << 1, 2, 3, 4;
  const SlicePlan plan = ssir::make_slices(y, 2);
  CHECK(ssir::cov_hat(x)(0, 0) == doctest::Approx(26.0));
  const SymMatrix kernel = ssir::kernel_residual(x, plan);
  CHECK(kernel(0, 0) == doctest::Approx(25.0).epsilon(1e-14));
}

TEST_CASE("kernel_residual equals the covariance when slices are constant") {
  // Within-slice constant rows: zero within-slice scatter.
  Matrix x(4, 2);
  x << 1, 2, 1, 2, 5, 7, 5, 7;
  Vector y(4);
  y << 1, 1, 2, 2;
  const SlicePlan plan = ssir::make_slices(y, 2);
  const SymMatrix total = ssir::cov_hat(x);
  const SymMatrix kernel = ssir::kernel_residual(x, plan);
  CHECK((kernel.mat() - total.mat()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("kernel_residual wants two observations per slice") {
  Matrix x(3, 1);
  x << 1, 2, 3;
  Vector y(3);
  y << 1, 2, 3;
  const SlicePlan plan = ssir::make_slices(y, 3);  // singleton slices
  CHECK_THROWS_AS(ssir::kernel_residual(x, plan), ssir::SliceTooSmall);
}

TEST_CASE("kernel_means is positive semidefinite with rank below H") {
  ssir::RngStream stream(ssir::derive_key(11, 0x32));
  const int n = 60;
  const int p = 15;
  const int H = 5;
  const Matrix x = random_matrix(stream, n, p);
  const Vector y = random_response(stream, n);
  const ssir::SlicedMoments m = ssir::build_moments(x, y, H);
  const ssir::SymEigResult eig = ssir::sym_eig(m.kernel_hat);
  CHECK(eig.values.minCoeff() >= -1e-8 * std::max(1.0, m.kernel_hat.trace()));
  // Between-slice scatter of H centered means has rank at most H-1.
  for (int i = H - 1; i < p; ++i) {
    CHECK(std::abs(eig.values(i)) <= 1e-8 * std::max(1.0, m.kernel_hat.trace()));
  }
}

TEST_CASE("moments are equivariant under coordinate permutation") {
  ssir::RngStream stream(ssir::derive_key(11, 0x33));
  const int n = 40;
  const int p = 6;
  const Matrix x = random_matrix(stream, n, p);
  const Vector y = random_response(stream, n);
  const std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  Matrix xp(n, p);
  for (int j = 0; j < p; ++j) {
    xp.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
  }
  const ssir::SlicedMoments a = ssir::build_moments(x, y, 5);
  const ssir::SlicedMoments b = ssir::build_moments(xp, y, 5);
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < p; ++i) {
      CHECK(b.kernel_hat(i, j) ==
            doctest::Approx(a.kernel_hat(perm[static_cast<std::size_t>(i)],
                                         perm[static_cast<std::size_t>(j)]))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("moments ignore location shifts") {
  ssir::RngStream stream(ssir::derive_key(11, 0x34));
  const int n = 50;
  const int p = 4;
  const Matrix x = random_matrix(stream, n, p);
  const Vector y = random_response(stream, n);
  Matrix shifted = x;
  Vector offset(p);
  offset << 5, -3, 100, 0.5;
  shifted.rowwise() += offset.transpose();
  for (const auto estimator :
       {ssir::KernelEstimator::kSliceMeans, ssir::KernelEstimator::kResidual}) {
    const ssir::SlicedMoments a = ssir::build_moments(x, y, 5, estimator);
    const ssir::SlicedMoments b = ssir::build_moments(shifted, y, 5, estimator);
    CHECK((a.sigma_hat.mat() - b.sigma_hat.mat()).cwiseAbs().maxCoeff() <=
          1e-10);
    CHECK((a.kernel_hat.mat() - b.kernel_hat.mat()).cwiseAbs().maxCoeff() <=
          1e-10);
  }
}

TEST_CASE("build_moments records proportions and the grand mean") {
  ssir::RngStream stream(ssir::derive_key(11, 0x35));
  const Matrix x = random_matrix(stream, 23, 4);
  const Vector y = random_response(stream, 23);
  const ssir::SlicedMoments m = ssir::build_moments(x, y, 4);
  CHECK(m.n == 23);
  CHECK(m.p() == 4);
  CHECK(m.H() == 4);
  double total = 0.0;
  for (const double prop : m.slice_props) {
    CHECK(prop > 0.0);
    total += prop;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((m.grand_mean.transpose() - x.colwise().mean()).cwiseAbs().maxCoeff() <=
        1e-14);
}

TEST_CASE("dense and data-backed sources agree on submatrix pairs") {
  ssir::RngStream stream(ssir::derive_key(11, 0x36));
  const int n = 37;
  const int p = 12;
  const Matrix x = random_matrix(stream, n, p);
  const Vector y = random_response(stream, n);
  for (const auto estimator :
       {ssir::KernelEstimator::kSliceMeans, ssir::KernelEstimator::kResidual}) {
    const ssir::SlicedMoments m = ssir::build_moments(x, y, 5, estimator);
    const ssir::DenseMomentSource dense(m);
    const ssir::DataMomentSource direct(x, y, 5, estimator);
    CHECK(direct.dim() == p);
    CHECK(direct.sample_size() == n);
    for (int rep = 0; rep < 20; ++rep) {
      const int k = 2 + static_cast<int>(stream.next_below(6));
      const auto S = ssir::sample_subset(stream, p, k);
      Matrix ka, ca, kb, cb;
      dense.fill_pair(S, ka, ca);
      direct.fill_pair(S, kb, cb);
      CHECK((ka - kb).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((ca - cb).cwiseAbs().maxCoeff() <= 1e-10);
    }
    // restrict() agrees as well
    const auto S = ssir::sample_subset(stream, p, 6);
    const ssir::SlicedMoments ra = dense.restrict(S);
    const ssir::SlicedMoments rb = direct.restrict(S);
    CHECK((ra.sigma_hat.mat() - rb.sigma_hat.mat()).cwiseAbs().maxCoeff() <=
          1e-10);
    CHECK((ra.kernel_hat.mat() - rb.kernel_hat.mat()).cwiseAbs().maxCoeff() <=
          1e-10);
    CHECK(ra.n == rb.n);
  }
}

}  // TEST_SUITE moments
