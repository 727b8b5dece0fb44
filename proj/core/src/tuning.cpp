#include "ssir/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssir {

double selection_criterion(double trace, int n, int l, int d, Criterion c) {
  if (n < 1) {
    throw InvalidArgument("selection_criterion: n must be positive");
  }
  if (!(trace > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  const double delta = c == Criterion::kAic
                           ? 2.0 / static_cast<double>(n)
                           : std::log(static_cast<double>(n)) / static_cast<double>(n);
  return -std::log(trace) +
         delta * static_cast<double>(l - d) * static_cast<double>(d);
}

TuneResult tune_l(const MomentSource& source, const Rp2Params& params,
                  Criterion criterion, const std::vector<int>& l_grid,
                  int threads) {
  const int n = source.sample_size();

  std::vector<int> grid = l_grid;
  if (grid.empty()) {
    const int hi = std::min(params.l_prime, n / 2);
    for (int l = params.d + 1; l <= hi; ++l) {
      grid.push_back(l);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.empty()) {
    throw EmptyGrid("tune_l: candidate grid is empty");
  }
  if (grid.front() < params.d || grid.back() > params.l_prime) {
    throw EmptyGrid("tune_l: grid values must lie in [d, l_prime]");
  }

  TuneResult out;
  out.criterion = criterion;
  out.stages = run_reweight_stages(source, params, threads);

  const double inf = std::numeric_limits<double>::infinity();
  double best_value = inf;
  int best_l = -1;
  Matrix kernel_block;
  Matrix cov_block;
  for (const int l : grid) {
    const IndexSet support = top_l(out.stages.stage2_weights.w, l);
    double value = inf;
    try {
      const Basis basis = final_basis(source, support, params.d,
                                      params.jitter_retry);
      source.fill_pair(support, kernel_block, cov_block);
      Matrix beta_s(static_cast<Eigen::Index>(support.size()), params.d);
      for (std::size_t i = 0; i < support.size(); ++i) {
        beta_s.row(static_cast<Eigen::Index>(i)) = basis.beta.row(support[i]);
      }
      const double trace = (beta_s.transpose() * kernel_block * beta_s).trace();
      value = selection_criterion(trace, n, l, params.d, criterion);
    } catch (const Degenerate&) {
      value = inf;
    }
    out.criterion_values.emplace_back(l, value);
    if (value < best_value) {
      best_value = value;
      best_l = l;
    }
  }
  if (best_l < 0) {
    throw Degenerate("tune_l: every candidate l was degenerate");
  }

  out.chosen_l = best_l;
  out.support = top_l(out.stages.stage2_weights.w, best_l);
  out.basis = final_basis(source, out.support, params.d, params.jitter_retry);
  return out;
}

TuneResult tune_l(const SlicedMoments& moments, const Rp2Params& params,
                  Criterion criterion, const std::vector<int>& l_grid,
                  int threads) {
  DenseMomentSource source(moments);
  return tune_l(source, params, criterion, l_grid, threads);
}

}  // namespace ssir
