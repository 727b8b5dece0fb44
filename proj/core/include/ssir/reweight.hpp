#pragma once

#include "ssir/engine.hpp"

namespace ssir {

// Parameters of the two-stage (reweighted) estimator. Stage 1 screens the
// ambient coordinates down to the top l_prime; stage 2 reruns the whole
// weighting scheme on the restricted pair and the final support and basis
// come from the remapped stage-2 weights.
struct Rp2Params {
  int A1 = 900;
  int B1 = 300;
  int A2 = 600;
  int B2 = 200;
  int k = 20;
  int d = 1;
  int l = 5;
  int l_prime = 50;
  std::uint64_t seed = 0;
  bool jitter_retry = true;
};

struct ReweightedFit {
  Basis basis;
  IndexSet support;            // final top-l set, ambient indices
  IndexSet screened;           // stage-1 top-l_prime set, ambient indices
  WeightVector stage1_weights; // ambient
  WeightVector stage2_weights; // ambient, exact zeros outside `screened`
  RpDiagnostics stage1_diagnostics;
  RpDiagnostics stage2_diagnostics;
};

// Both weight passes without the final support/basis step; model selection
// reuses this so every candidate l shares identical stage output.
struct ReweightStages {
  IndexSet screened;
  WeightVector stage1_weights;
  WeightVector stage2_weights;  // ambient, mapped back from the screen
  RpDiagnostics stage1_diagnostics;
  RpDiagnostics stage2_diagnostics;
};

ReweightStages run_reweight_stages(const MomentSource& source,
                                   const Rp2Params& params, int threads = 1);

// Two-stage estimator. Stage-2 streams are derived from the same master
// seed under a distinct domain tag, so the stages never share draws.
// Requires d <= l <= l_prime <= p and k <= l_prime.
ReweightedFit ssir_rp_reweighted(const SlicedMoments& moments,
                                 const Rp2Params& params, int threads = 1);
ReweightedFit ssir_rp_reweighted(const MomentSource& source,
                                 const Rp2Params& params, int threads = 1);

}  // namespace ssir
