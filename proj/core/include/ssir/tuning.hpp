#pragma once

#include <utility>

#include "ssir/reweight.hpp"

namespace ssir {

enum class Criterion { kAic, kBic };

// Information criterion for support size l, given the fitted trace
// tr(beta_l^T Khat beta_l): -log(trace) + delta * (l - d) * d with
// delta = 2/n for AIC and log(n)/n for BIC. +infinity when trace <= 0.
double selection_criterion(double trace, int n, int l, int d, Criterion c);

struct TuneResult {
  int chosen_l = 0;
  Criterion criterion = Criterion::kBic;
  // One entry per grid value, ascending in l; +infinity marks candidates
  // that were degenerate or had nonpositive trace.
  std::vector<std::pair<int, double>> criterion_values;
  Basis basis;                 // refit at chosen_l
  IndexSet support;            // support at chosen_l
  ReweightStages stages;       // shared stage output, for reporting
};

// Chooses l by minimizing the criterion over the grid. The two weight
// passes run once; only the final support/basis step is recomputed per l,
// so the result at the chosen l is identical to a fixed-l run with the same
// seed. Empty or out-of-range grids raise EmptyGrid; params.l is ignored.
// Default grid: {d+1, ..., min(l_prime, n/2)}.
TuneResult tune_l(const SlicedMoments& moments, const Rp2Params& params,
                  Criterion criterion, const std::vector<int>& l_grid = {},
                  int threads = 1);
TuneResult tune_l(const MomentSource& source, const Rp2Params& params,
                  Criterion criterion, const std::vector<int>& l_grid = {},
                  int threads = 1);

}  // namespace ssir
