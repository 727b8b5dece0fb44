#include "ssir/reweight.hpp"

namespace ssir {

namespace {

void check_params(const MomentSource& source, const Rp2Params& params) {
  const int p = source.dim();
  if (params.d < 1 || params.l < params.d || params.l > params.l_prime ||
      params.l_prime > p) {
    throw InvalidArgument("ssir_rp_reweighted: need d <= l <= l_prime <= p");
  }
  if (params.k > params.l_prime) {
    throw InvalidArgument(
        "ssir_rp_reweighted: k cannot exceed l_prime (stage 2 samples "
        "k-subsets of the screened set)");
  }
}

}  // namespace

ReweightStages run_reweight_stages(const MomentSource& source,
                                   const Rp2Params& params, int threads) {
  check_params(source, params);

  WeightPassParams pass1;
  pass1.A = params.A1;
  pass1.B = params.B1;
  pass1.k = params.k;
  pass1.d = params.d;
  pass1.seed = params.seed;
  pass1.stream_tag = rngtag::kStage1;
  pass1.jitter_retry = params.jitter_retry;
  WeightPassResult stage1 = run_weight_pass(source, pass1, threads);

  ReweightStages out;
  out.screened = top_l(stage1.weights.w, params.l_prime);

  const SlicedMoments restricted = source.restrict(out.screened);
  DenseMomentSource restricted_source(restricted);

  WeightPassParams pass2 = pass1;
  pass2.A = params.A2;
  pass2.B = params.B2;
  pass2.stream_tag = rngtag::kStage2;
  WeightPassResult stage2 = run_weight_pass(restricted_source, pass2, threads);

  // Map the screened-coordinate weights back into the ambient dimension.
  WeightVector ambient;
  ambient.w = Vector::Zero(source.dim());
  for (std::size_t j = 0; j < out.screened.size(); ++j) {
    ambient.w(out.screened[j]) = stage2.weights.w(static_cast<Eigen::Index>(j));
  }
  ambient.touched.reserve(stage2.weights.touched.size());
  for (const int j : stage2.weights.touched) {
    ambient.touched.push_back(out.screened[static_cast<std::size_t>(j)]);
  }

  out.stage1_weights = std::move(stage1.weights);
  out.stage2_weights = std::move(ambient);
  out.stage1_diagnostics = std::move(stage1.diagnostics);
  out.stage2_diagnostics = std::move(stage2.diagnostics);
  return out;
}

ReweightedFit ssir_rp_reweighted(const MomentSource& source,
                                 const Rp2Params& params, int threads) {
  ReweightStages stages = run_reweight_stages(source, params, threads);

  ReweightedFit fit;
  fit.support = top_l(stages.stage2_weights.w, params.l);
  fit.basis = final_basis(source, fit.support, params.d, params.jitter_retry);
  fit.screened = std::move(stages.screened);
  fit.stage1_weights = std::move(stages.stage1_weights);
  fit.stage2_weights = std::move(stages.stage2_weights);
  fit.stage1_diagnostics = std::move(stages.stage1_diagnostics);
  fit.stage2_diagnostics = std::move(stages.stage2_diagnostics);
  return fit;
}

ReweightedFit ssir_rp_reweighted(const SlicedMoments& moments,
                                 const Rp2Params& params, int threads) {
  DenseMomentSource source(moments);
  return ssir_rp_reweighted(source, params, threads);
}

}  // namespace ssir
