#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "ssir/moments.hpp"
#include "ssir/rng.hpp"

namespace ssir {

// Parameters of the single-pass random projection estimator: A groups of B
// candidate k-subsets each, target dimension d, and the support size l kept
// after weight aggregation.
struct RpParams {
  int A = 900;
  int B = 300;
  int k = 20;
  int d = 1;
  int l = 5;
  std::uint64_t seed = 0;
  bool jitter_retry = true;
};

// Scored candidate subset: the top d+1 generalized eigenvalues of the
// (kernel, covariance) pair restricted to S, their leading d vectors, and
// the score sum(lambda_1..lambda_d). Degenerate candidates carry -infinity.
struct ProjectionScore {
  double score = -std::numeric_limits<double>::infinity();
  Vector values;   // d+1, nonincreasing
  Matrix vectors;  // |S| x d, covariance-block-orthonormal
  bool degenerate = true;
};

// Winner of one candidate group.
struct GroupResult {
  int candidate = -1;        // winning b within the group
  std::vector<int> subset;   // winning S, sorted ascending
  double score = -std::numeric_limits<double>::infinity();
  Vector values;             // d+1, from the winning subset
  Matrix vectors;            // k x d
  bool degenerate = true;
};

// Aggregated importance weights. Entries outside `touched` are exact zeros.
struct WeightVector {
  Vector w;
  std::vector<int> touched;  // sorted union of winning subsets
};

// Estimated basis embedded in the ambient dimension; rows outside the
// support are exact zeros and beta^T Sigma_hat beta = I_d on the support.
struct Basis {
  Matrix beta;               // p x d
  std::vector<int> support;  // sorted ascending
  int d = 0;
};

struct RpDiagnostics {
  int groups = 0;
  int degenerate_groups = 0;
  double wall_ms = 0.0;
  std::vector<std::vector<int>> winner_supports;
};

struct RpFit {
  Basis basis;
  WeightVector weights;
  std::vector<int> support;
  RpDiagnostics diagnostics;
};

// One weight-accumulation pass (Steps 1-9 of the single-pass algorithm),
// reusable by the reweighted variant with its own stream tag. Exposed so
// tests can replay stages independently.
struct WeightPassParams {
  int A = 0;
  int B = 0;
  int k = 0;
  int d = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream_tag = rngtag::kStage1;
  bool jitter_retry = true;
};

struct WeightPassResult {
  WeightVector weights;
  std::vector<GroupResult> groups;
  RpDiagnostics diagnostics;
};

// Draw a uniform k-subset of {0,...,p-1}, sorted ascending.
IndexSet sample_projection(RngStream& stream, int p, int k);

// Score one subset against precomputed moments. Requires |S| >= d+1.
// Throws Degenerate when the covariance block is not positive definite
// even after the jitter retry.
ProjectionScore score_projection(const SlicedMoments& moments, const IndexSet& S,
                                 int d, bool jitter_retry = true);
ProjectionScore score_projection(const MomentSource& source, const IndexSet& S,
                                 int d, bool jitter_retry = true);

// Index of the best score; ties resolved toward the smallest index.
// Returns -1 when every score is -infinity.
int select_within_group(const std::vector<double>& scores);

// Importance weights (1/A_eff) sum_a sum_{i<=d} (lambda_i - lambda_{d+1})
// vhat_i^2, zero-padded outside each winning subset. Degenerate groups are
// skipped; A_eff counts the rest. Throws AllGroupsDegenerate when none left.
WeightVector aggregate_weights(const std::vector<GroupResult>& groups, int p,
                               int d);

// Indices of the l largest weights, ties toward smaller index, sorted.
IndexSet top_l(const Vector& w, int l);

// Generalized eigenbasis of the (S, S) moment pair embedded at S.
Basis final_basis(const SlicedMoments& moments, const IndexSet& S, int d,
                  bool jitter_retry = true);
Basis final_basis(const MomentSource& source, const IndexSet& S, int d,
                  bool jitter_retry = true);

WeightPassResult run_weight_pass(const MomentSource& source,
                                 const WeightPassParams& params,
                                 int threads = 1);

// The single-pass estimator: A x B scored random subsets, per-group winners,
// aggregated weights, top-l support, basis from the support submatrix pair.
// `threads` <= 0 means one worker per hardware thread; results are
// bit-identical for every thread count.
RpFit ssir_rp(const SlicedMoments& moments, const RpParams& params,
              int threads = 1);
RpFit ssir_rp(const MomentSource& source, const RpParams& params,
              int threads = 1);

}  // namespace ssir
