#include "ssir/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace ssir {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kI: return "I";
    case ModelKind::kII: return "II";
    case ModelKind::kIII: return "III";
    case ModelKind::kIV: return "IV";
    case ModelKind::kV: return "V";
  }
  return "?";
}

std::string to_string(CovKind kind) {
  switch (kind) {
    case CovKind::kIdentity: return "identity";
    case CovKind::kDense: return "dense";
    case CovKind::kToeplitz: return "toeplitz";
    case CovKind::kSparseInverse: return "sparse_inverse";
  }
  return "?";
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kFixedL: return "fixed_l";
    case Variant::kBic: return "bic";
    case Variant::kAic: return "aic";
  }
  return "?";
}

ModelKind model_from_string(const std::string& name) {
  if (name == "I") return ModelKind::kI;
  if (name == "II") return ModelKind::kII;
  if (name == "III") return ModelKind::kIII;
  if (name == "IV") return ModelKind::kIV;
  if (name == "V") return ModelKind::kV;
  throw InvalidArgument("unknown model '" + name + "' (expected I..V)");
}

CovKind cov_from_string(const std::string& name) {
  if (name == "identity") return CovKind::kIdentity;
  if (name == "dense") return CovKind::kDense;
  if (name == "toeplitz") return CovKind::kToeplitz;
  if (name == "sparse_inverse") return CovKind::kSparseInverse;
  throw InvalidArgument("unknown covariance '" + name + "'");
}

Variant variant_from_string(const std::string& name) {
  if (name == "fixed_l") return Variant::kFixedL;
  if (name == "bic") return Variant::kBic;
  if (name == "aic") return Variant::kAic;
  throw InvalidArgument("unknown variant '" + name + "'");
}

namespace {

std::uint64_t scenario_key(const Scenario& sc) {
  std::uint64_t h = mix64(0x5ca1'ab1e'0ddb'a11ULL);
  h = absorb(h, static_cast<std::uint64_t>(sc.model));
  h = absorb(h, static_cast<std::uint64_t>(sc.cov));
  h = absorb(h, static_cast<std::uint64_t>(sc.n));
  h = absorb(h, static_cast<std::uint64_t>(sc.p));
  return h;
}

struct VariantOutcome {
  bool failed = true;
  double correlation = 0.0;
  bool signal = false;
  bool signal_exact = false;
  int chosen_l = 0;
};

struct ReplicateOutcome {
  std::vector<VariantOutcome> variants;
  double wall_ms = 0.0;
};

std::vector<int> default_grid(const Rp2Params& params, int n) {
  std::vector<int> grid;
  const int hi = std::min(params.l_prime, n / 2);
  for (int l = params.d + 1; l <= hi; ++l) {
    grid.push_back(l);
  }
  return grid;
}

// One replicate: one dataset, one pair of weight passes, then every variant
// finishes from the shared stage output.
ReplicateOutcome run_replicate(const ExperimentSpec& spec, const Scenario& sc,
                               const SymMatrix& sigma,
                               const CholeskyFactor& sigma_factor, int rep) {
  const auto started = std::chrono::steady_clock::now();
  ReplicateOutcome out;
  out.variants.assign(spec.variants.size(), VariantOutcome{});

  const std::uint64_t sc_key = scenario_key(sc);
  bool needs_tuning = false;
  for (const Variant v : spec.variants) {
    needs_tuning = needs_tuning || v != Variant::kFixedL;
  }

  try {
    RngStream data_stream(derive_key(spec.seed, rngtag::kData, sc_key,
                                     static_cast<std::uint64_t>(rep)));
    const SimulatedDataset data =
        draw_dataset(data_stream, sc.n, sc.model, sigma_factor, spec.s);
    const SlicedMoments moments =
        build_moments(data.X, data.y, spec.H, spec.estimator);
    DenseMomentSource source(moments);

    Rp2Params params = spec.params;
    params.d = ModelSpec::of(sc.model).d;
    params.seed = derive_key(spec.seed, rngtag::kScenario, sc_key,
                             static_cast<std::uint64_t>(rep));
    const ReweightStages stages = run_reweight_stages(source, params, 1);

    // Shared grid evaluation for the tuned variants: trace per candidate l,
    // computed once since AIC and BIC differ only in the penalty.
    std::vector<int> grid;
    std::vector<double> traces;
    std::vector<bool> usable;
    if (needs_tuning) {
      grid = default_grid(params, sc.n);
      traces.assign(grid.size(), 0.0);
      usable.assign(grid.size(), false);
      Matrix kernel_block;
      Matrix cov_block;
      for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        try {
          const IndexSet support = top_l(stages.stage2_weights.w, grid[gi]);
          const Basis basis =
              final_basis(source, support, params.d, params.jitter_retry);
          source.fill_pair(support, kernel_block, cov_block);
          Matrix beta_s(static_cast<Eigen::Index>(support.size()), params.d);
          for (std::size_t i = 0; i < support.size(); ++i) {
            beta_s.row(static_cast<Eigen::Index>(i)) =
                basis.beta.row(support[i]);
          }
          traces[gi] = (beta_s.transpose() * kernel_block * beta_s).trace();
          usable[gi] = true;
        } catch (const Degenerate&) {
        }
      }
    }

    for (std::size_t vi = 0; vi < spec.variants.size(); ++vi) {
      const Variant variant = spec.variants[vi];
      VariantOutcome& slot = out.variants[vi];
      try {
        int l = params.l;
        if (variant != Variant::kFixedL) {
          const Criterion crit =
              variant == Variant::kBic ? Criterion::kBic : Criterion::kAic;
          double best = std::numeric_limits<double>::infinity();
          int best_l = -1;
          for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            if (!usable[gi]) {
              continue;
            }
            const double value = selection_criterion(traces[gi], sc.n,
                                                     grid[gi], params.d, crit);
            if (value < best) {
              best = value;
              best_l = grid[gi];
            }
          }
          if (best_l < 0) {
            throw Degenerate("experiment: every candidate l was degenerate");
          }
          l = best_l;
        }
        const IndexSet support = top_l(stages.stage2_weights.w, l);
        const Basis basis =
            final_basis(source, support, params.d, params.jitter_retry);
        slot.correlation = correlation_loss(basis.beta, data.beta, sigma);
        slot.signal = signal_hit(support, data.support);
        slot.signal_exact = support == data.support;
        slot.chosen_l = l;
        slot.failed = false;
      } catch (const InvalidArgument&) {
        throw;
      } catch (const IndexOutOfRange&) {
        throw;
      } catch (const EmptyGrid&) {
        throw;
      } catch (const Error&) {
        slot.failed = true;
      }
    }
  } catch (const InvalidArgument&) {
    throw;
  } catch (const IndexOutOfRange&) {
    throw;
  } catch (const EmptyGrid&) {
    throw;
  } catch (const Error&) {
    // Dataset- or stage-level degeneracy: every variant fails.
  }

  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - started)
                    .count();
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, int threads,
                                bool keep_records) {
  if (spec.scenarios.empty()) {
    throw InvalidArgument("run_experiment: no scenarios");
  }
  if (spec.variants.empty()) {
    throw InvalidArgument("run_experiment: no variants");
  }
  if (spec.replicates < 1) {
    throw InvalidArgument("run_experiment: replicates must be positive");
  }
  int workers = threads > 0 ? threads
                            : static_cast<int>(std::max(
                                  1u, std::thread::hardware_concurrency()));

  ExperimentResult result;
  for (std::size_t si = 0; si < spec.scenarios.size(); ++si) {
    const Scenario& sc = spec.scenarios[si];
    const SymMatrix sigma = make_cov(sc.cov, sc.p);
    const CholeskyFactor factor = cholesky(sigma);

    std::vector<ReplicateOutcome> outcomes(
        static_cast<std::size_t>(spec.replicates));
    const int R = spec.replicates;
    const int w = std::min(workers, R);
    if (w <= 1) {
      for (int r = 0; r < R; ++r) {
        outcomes[static_cast<std::size_t>(r)] =
            run_replicate(spec, sc, sigma, factor, r);
      }
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
      pool.reserve(static_cast<std::size_t>(w));
      for (int t = 0; t < w; ++t) {
        pool.emplace_back([&, t]() {
          try {
            const int lo = static_cast<int>((static_cast<long long>(R) * t) / w);
            const int hi =
                static_cast<int>((static_cast<long long>(R) * (t + 1)) / w);
            for (int r = lo; r < hi; ++r) {
              outcomes[static_cast<std::size_t>(r)] =
                  run_replicate(spec, sc, sigma, factor, r);
            }
          } catch (...) {
            errors[static_cast<std::size_t>(t)] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) {
        th.join();
      }
      for (const auto& err : errors) {
        if (err) {
          std::rethrow_exception(err);
        }
      }
    }

    for (std::size_t vi = 0; vi < spec.variants.size(); ++vi) {
      ResultRow row;
      row.scenario = sc;
      row.variant = spec.variants[vi];
      row.replicates = R;

      double sum = 0.0;
      double sumsq = 0.0;
      double wall = 0.0;
      double lsum = 0.0;
      int hits = 0;
      int exact = 0;
      int ok = 0;
      for (int r = 0; r < R; ++r) {
        const ReplicateOutcome& rep = outcomes[static_cast<std::size_t>(r)];
        const VariantOutcome& v = rep.variants[vi];
        wall += rep.wall_ms;
        if (v.failed) {
          ++row.failures;
        } else {
          ++ok;
          sum += v.correlation;
          sumsq += v.correlation * v.correlation;
          lsum += v.chosen_l;
          hits += v.signal ? 1 : 0;
          exact += v.signal_exact ? 1 : 0;
        }
        if (keep_records) {
          ReplicateRecord rec;
          rec.scenario = static_cast<int>(si);
          rec.variant = spec.variants[vi];
          rec.replicate = r;
          rec.failed = v.failed;
          rec.correlation = v.correlation;
          rec.signal = v.signal;
          rec.signal_exact = v.signal_exact;
          rec.chosen_l = v.chosen_l;
          rec.wall_ms = rep.wall_ms;
          result.records.push_back(rec);
        }
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.mean_correlation = ok > 0 ? sum / ok : nan;
      if (ok > 1) {
        const double var =
            (sumsq - sum * sum / ok) / static_cast<double>(ok - 1);
        row.se_correlation = std::sqrt(std::max(var, 0.0) / ok);
      } else {
        row.se_correlation = nan;
      }
      row.signal_rate = ok > 0 ? static_cast<double>(hits) / ok : nan;
      row.signal_exact_rate = ok > 0 ? static_cast<double>(exact) / ok : nan;
      row.mean_chosen_l = ok > 0 ? lsum / ok : nan;
      row.mean_wall_ms = wall / R;
      result.rows.push_back(row);
    }
  }
  return result;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) {
    return "NA";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string result_tsv_header() {
  return "model\tcov\tn\tp\tvariant\treplicates\tfailures\tmean_corr_loss\t"
         "se_corr_loss\tsignal_rate\tsignal_exact_rate\tmean_chosen_l\t"
         "mean_wall_ms";
}

std::string result_tsv_row(const ResultRow& row) {
  std::string out;
  out += to_string(row.scenario.model);
  out += '\t';
  out += to_string(row.scenario.cov);
  out += '\t';
  out += std::to_string(row.scenario.n);
  out += '\t';
  out += std::to_string(row.scenario.p);
  out += '\t';
  out += to_string(row.variant);
  out += '\t';
  out += std::to_string(row.replicates);
  out += '\t';
  out += std::to_string(row.failures);
  out += '\t';
  out += fmt(row.mean_correlation);
  out += '\t';
  out += fmt(row.se_correlation);
  out += '\t';
  out += fmt(row.signal_rate);
  out += '\t';
  out += fmt(row.signal_exact_rate);
  out += '\t';
  out += fmt(row.mean_chosen_l);
  out += '\t';
  out += fmt(row.mean_wall_ms);
  return out;
}

}  // namespace ssir
