#include "ssir/engine.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

namespace ssir {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int resolve_threads(int threads) {
  if (threads > 0) {
    return threads;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Per-worker scratch space; sized once, reused for every candidate.
struct Workspace {
  explicit Workspace(int k)
      : kernel(k, k), cov(k, k), fact(k, k), m(k, k), solver(k) {
    subset.reserve(static_cast<std::size_t>(k));
  }
  std::vector<int> subset;
  Matrix kernel;
  Matrix cov;
  Matrix fact;  // Cholesky factor of cov, built in place
  Matrix m;     // reduced symmetric matrix L^{-1} K L^{-T}
  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  // Scratch for factored kernels: the nonzero eigenvalues of the k x k
  // pencil equal those of the r x r Gram matrix of L^{-1} C_S, which is
  // much cheaper when the factor has few columns.
  Matrix factor;  // k x r rows of the kernel factor
  Matrix gram;    // r x r Gram matrix
  Eigen::SelfAdjointEigenSolver<Matrix> gram_solver;
};

// Factor ws.cov into ws.fact, optionally retrying once with diagonal jitter
// proportional to the average diagonal. Returns false when both fail.
bool factor_cov(Workspace& ws, bool jitter_retry) {
  ws.fact = ws.cov;
  if (detail::cholesky_in_place(ws.fact, 0.0)) {
    return true;
  }
  if (!jitter_retry) {
    return false;
  }
  const double jitter =
      kJitterScale * ws.cov.trace() / static_cast<double>(ws.cov.rows());
  ws.fact = ws.cov;
  return detail::cholesky_in_place(ws.fact, jitter);
}

// Reduce the pair to M = L^{-1} K L^{-T} using the factored covariance.
void reduce_pair(Workspace& ws) {
  ws.m = ws.kernel;
  ws.fact.triangularView<Eigen::Lower>().solveInPlace(ws.m);
  ws.fact.triangularView<Eigen::Lower>()
      .transpose()
      .solveInPlace<Eigen::OnTheRight>(ws.m);
}

// Score = sum of the top d eigenvalues of the reduced matrix. Returns
// -infinity when the covariance block is not positive definite (after the
// retry) or the eigensolver fails to converge.
double candidate_score(Workspace& ws, int d, bool jitter_retry) {
  if (!factor_cov(ws, jitter_retry)) {
    return kNegInf;
  }
  reduce_pair(ws);
  ws.solver.compute(ws.m, Eigen::EigenvaluesOnly);
  if (ws.solver.info() != Eigen::Success) {
    return kNegInf;
  }
  const int k = static_cast<int>(ws.m.rows());
  double score = 0.0;
  for (int i = 0; i < d; ++i) {
    score += ws.solver.eigenvalues()(k - 1 - i);
  }
  return score;
}

// Same score through the kernel factor: with K_SS = C C^T the pencil matrix
// L^{-1} K_SS L^{-T} shares its nonzero spectrum with the Gram matrix of
// X = L^{-1} C, and eigenvalues past rank(C) are zero since the kernel is
// positive semidefinite.
double candidate_score_factored(Workspace& ws, int d, bool jitter_retry) {
  if (!factor_cov(ws, jitter_retry)) {
    return kNegInf;
  }
  ws.fact.triangularView<Eigen::Lower>().solveInPlace(ws.factor);
  ws.gram.noalias() = ws.factor.transpose() * ws.factor;
  ws.gram_solver.compute(ws.gram, Eigen::EigenvaluesOnly);
  if (ws.gram_solver.info() != Eigen::Success) {
    return kNegInf;
  }
  const int r = static_cast<int>(ws.gram.rows());
  double score = 0.0;
  for (int i = 0; i < d && i < r; ++i) {
    score += ws.gram_solver.eigenvalues()(r - 1 - i);
  }
  return score;
}

// Full decomposition of the current pair in ws: top d+1 eigenvalues, top d
// back-transformed vectors. Returns false on degeneracy.
bool candidate_decompose(Workspace& ws, int d, bool jitter_retry,
                         Vector& values, Matrix& vectors) {
  if (!factor_cov(ws, jitter_retry)) {
    return false;
  }
  reduce_pair(ws);
  ws.solver.compute(ws.m, Eigen::ComputeEigenvectors);
  if (ws.solver.info() != Eigen::Success) {
    return false;
  }
  const int k = static_cast<int>(ws.m.rows());
  const int keep = std::min(d + 1, k);
  values.resize(keep);
  for (int i = 0; i < keep; ++i) {
    values(i) = ws.solver.eigenvalues()(k - 1 - i);
  }
  vectors.resize(k, d);
  for (int i = 0; i < d; ++i) {
    vectors.col(i) = ws.solver.eigenvectors().col(k - 1 - i);
  }
  // gamma -> v = L^{-T} gamma; B-orthonormality is inherited exactly.
  ws.fact.triangularView<Eigen::Lower>().transpose().solveInPlace(vectors);
  detail::fix_column_signs(vectors);
  return true;
}

void run_group(const MomentSource& source, const WeightPassParams& params,
               int a, Workspace& ws, GroupResult& out) {
  const int p = source.dim();
  const bool factored = source.factor_cols() > 0;
  double best_score = kNegInf;
  int best_b = -1;
  std::vector<int> best_subset;
  for (int b = 0; b < params.B; ++b) {
    RngStream stream(derive_key(params.seed, params.stream_tag,
                                static_cast<std::uint64_t>(a),
                                static_cast<std::uint64_t>(b)));
    sample_subset_into(stream, p, params.k, ws.subset);
    double score;
    if (factored) {
      source.fill_factored(ws.subset, ws.factor, ws.cov);
      score = candidate_score_factored(ws, params.d, params.jitter_retry);
    } else {
      source.fill_pair(ws.subset, ws.kernel, ws.cov);
      score = candidate_score(ws, params.d, params.jitter_retry);
    }
    if (score > best_score) {
      best_score = score;
      best_b = b;
      best_subset = ws.subset;
    }
  }
  if (best_b < 0) {
    out = GroupResult{};
    return;
  }
  // Re-solve the winner with eigenvectors this time.
  source.fill_pair(best_subset, ws.kernel, ws.cov);
  Vector values;
  Matrix vectors;
  if (!candidate_decompose(ws, params.d, params.jitter_retry, values, vectors)) {
    out = GroupResult{};
    return;
  }
  out.candidate = best_b;
  out.subset = std::move(best_subset);
  out.score = best_score;
  out.values = std::move(values);
  out.vectors = std::move(vectors);
  out.degenerate = false;
}

void check_pass_params(const MomentSource& source,
                       const WeightPassParams& params) {
  const int p = source.dim();
  if (params.A < 1 || params.B < 1) {
    throw InvalidArgument("run_weight_pass: A and B must be positive");
  }
  if (params.d < 1) {
    throw InvalidArgument("run_weight_pass: d must be positive");
  }
  if (params.k < params.d + 1) {
    throw InvalidArgument("run_weight_pass: k must be at least d+1");
  }
  if (params.k > p) {
    throw InvalidArgument("run_weight_pass: k cannot exceed the dimension");
  }
}

}  // namespace

IndexSet sample_projection(RngStream& stream, int p, int k) {
  return sample_subset(stream, p, k);
}

ProjectionScore score_projection(const MomentSource& source, const IndexSet& S,
                                 int d, bool jitter_retry) {
  detail::check_index_set(S, source.dim(), "score_projection");
  if (d < 1 || static_cast<int>(S.size()) < d + 1) {
    throw InvalidArgument("score_projection: need |S| >= d+1 and d >= 1");
  }
  Workspace ws(static_cast<int>(S.size()));
  source.fill_pair(S, ws.kernel, ws.cov);
  ProjectionScore out;
  Vector values;
  Matrix vectors;
  if (!candidate_decompose(ws, d, jitter_retry, values, vectors)) {
    throw Degenerate("score_projection: covariance block not positive definite");
  }
  out.degenerate = false;
  out.values = std::move(values);
  out.vectors = std::move(vectors);
  out.score = out.values.head(d).sum();
  return out;
}

ProjectionScore score_projection(const SlicedMoments& moments, const IndexSet& S,
                                 int d, bool jitter_retry) {
  DenseMomentSource source(moments);
  return score_projection(source, S, d, jitter_retry);
}

int select_within_group(const std::vector<double>& scores) {
  int best = -1;
  double best_score = kNegInf;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > best_score) {
      best_score = scores[i];
      best = static_cast<int>(i);
    }
  }
  return best_score == kNegInf ? -1 : best;
}

WeightVector aggregate_weights(const std::vector<GroupResult>& groups, int p,
                               int d) {
  if (p < 1 || d < 1) {
    throw InvalidArgument("aggregate_weights: bad dimensions");
  }
  WeightVector out;
  out.w = Vector::Zero(p);
  std::vector<char> touched(static_cast<std::size_t>(p), 0);
  int effective = 0;
  for (const GroupResult& g : groups) {
    if (g.degenerate) {
      continue;
    }
    ++effective;
    const int k = static_cast<int>(g.subset.size());
    const double tail = g.values(d);
    for (int i = 0; i < d; ++i) {
      const double gap = g.values(i) - tail;
      for (int j = 0; j < k; ++j) {
        const double v = g.vectors(j, i);
        out.w(g.subset[static_cast<std::size_t>(j)]) += gap * v * v;
      }
    }
    for (const int j : g.subset) {
      touched[static_cast<std::size_t>(j)] = 1;
    }
  }
  if (effective == 0) {
    throw AllGroupsDegenerate("aggregate_weights: no usable groups");
  }
  out.w /= static_cast<double>(effective);
  for (int j = 0; j < p; ++j) {
    if (touched[static_cast<std::size_t>(j)]) {
      out.touched.push_back(j);
    }
  }
  return out;
}

IndexSet top_l(const Vector& w, int l) {
  const int p = static_cast<int>(w.size());
  if (l < 1 || l > p) {
    throw InvalidArgument("top_l: need 1 <= l <= p");
  }
  std::vector<int> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), 0);
  std::nth_element(idx.begin(), idx.begin() + (l - 1), idx.end(),
                   [&](int a, int b) {
                     if (w(a) != w(b)) return w(a) > w(b);
                     return a < b;
                   });
  idx.resize(static_cast<std::size_t>(l));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Basis final_basis(const MomentSource& source, const IndexSet& S, int d,
                  bool jitter_retry) {
  detail::check_index_set(S, source.dim(), "final_basis");
  if (d < 1 || d > static_cast<int>(S.size())) {
    throw InvalidArgument("final_basis: need 1 <= d <= |S|");
  }
  Matrix kernel;
  Matrix cov;
  source.fill_pair(S, kernel, cov);
  const SymMatrix kernel_block = SymMatrix::from_lower(std::move(kernel));
  const SymMatrix cov_block = SymMatrix::from_lower(std::move(cov));
  GenEigResult eig;
  try {
    eig = gen_eig(kernel_block, cov_block, d, 0.0);
  } catch (const NotPositiveDefinite&) {
    if (!jitter_retry) {
      throw Degenerate("final_basis: covariance block not positive definite");
    }
    const double jitter = kJitterScale * cov_block.trace() /
                          static_cast<double>(cov_block.dim());
    try {
      eig = gen_eig(kernel_block, cov_block, d, jitter);
    } catch (const NotPositiveDefinite&) {
      throw Degenerate("final_basis: covariance block not positive definite");
    }
  }
  Basis out;
  out.d = d;
  out.support = S;
  out.beta = Matrix::Zero(source.dim(), d);
  for (std::size_t i = 0; i < S.size(); ++i) {
    out.beta.row(S[i]) = eig.vectors.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

Basis final_basis(const SlicedMoments& moments, const IndexSet& S, int d,
                  bool jitter_retry) {
  DenseMomentSource source(moments);
  return final_basis(source, S, d, jitter_retry);
}

WeightPassResult run_weight_pass(const MomentSource& source,
                                 const WeightPassParams& params, int threads) {
  check_pass_params(source, params);
  const auto start = std::chrono::steady_clock::now();
  const int workers = std::min(resolve_threads(threads), params.A);

  std::vector<GroupResult> groups(static_cast<std::size_t>(params.A));
  if (workers <= 1) {
    Workspace ws(params.k);
    for (int a = 0; a < params.A; ++a) {
      run_group(source, params, a, ws, groups[static_cast<std::size_t>(a)]);
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t]() {
        // Static partition: group results depend only on the group index,
        // so any partition yields bit-identical output.
        Workspace ws(params.k);
        const int lo = static_cast<int>(
            (static_cast<long long>(params.A) * t) / workers);
        const int hi = static_cast<int>(
            (static_cast<long long>(params.A) * (t + 1)) / workers);
        for (int a = lo; a < hi; ++a) {
          run_group(source, params, a, ws, groups[static_cast<std::size_t>(a)]);
        }
      });
    }
    for (auto& th : pool) {
      th.join();
    }
  }

  WeightPassResult out;
  out.weights = aggregate_weights(groups, source.dim(), params.d);
  out.diagnostics.groups = params.A;
  out.diagnostics.degenerate_groups = static_cast<int>(
      std::count_if(groups.begin(), groups.end(),
                    [](const GroupResult& g) { return g.degenerate; }));
  out.diagnostics.winner_supports.reserve(groups.size());
  for (const GroupResult& g : groups) {
    out.diagnostics.winner_supports.push_back(g.subset);
  }
  out.groups = std::move(groups);
  out.diagnostics.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                start)
          .count();
  return out;
}

RpFit ssir_rp(const MomentSource& source, const RpParams& params, int threads) {
  if (params.l < params.d || params.l > source.dim()) {
    throw InvalidArgument("ssir_rp: need d <= l <= p");
  }
  WeightPassParams pass;
  pass.A = params.A;
  pass.B = params.B;
  pass.k = params.k;
  pass.d = params.d;
  pass.seed = params.seed;
  pass.stream_tag = rngtag::kStage1;
  pass.jitter_retry = params.jitter_retry;
  WeightPassResult stage = run_weight_pass(source, pass, threads);

  RpFit fit;
  fit.support = top_l(stage.weights.w, params.l);
  fit.basis = final_basis(source, fit.support, params.d, params.jitter_retry);
  fit.weights = std::move(stage.weights);
  fit.diagnostics = std::move(stage.diagnostics);
  return fit;
}

RpFit ssir_rp(const SlicedMoments& moments, const RpParams& params,
              int threads) {
  DenseMomentSource source(moments);
  return ssir_rp(source, params, threads);
}

}  // namespace ssir
