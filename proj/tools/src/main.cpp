#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "ssir/experiment.hpp"
#include "ssir/reweight.hpp"
#include "ssir/simulate.hpp"
#include "ssir/tuning.hpp"

using nlohmann::json;

namespace {

// Above this width the tool stops materializing p x p moment matrices and
// recomputes each k x k submatrix pair from the centered data instead.
constexpr int kDenseWidthLimit = 2500;

int resolved_thread_count(int requested) {
  if (requested > 0) {
    return requested;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ssir::InvalidArgument("cannot open '" + path + "' for writing");
  }
  out << content;
  if (!out.good()) {
    throw ssir::InvalidArgument("failed while writing '" + path + "'");
  }
}

// ---------------------------------------------------------------------------
// Shared estimator options and their resolution against a concrete dataset.

struct EstimatorCli {
  int d = 1;
  int l = 5;
  int k = 20;
  int l_prime = 50;
  int a1 = 900;
  int b1 = 300;
  int a2 = 600;
  int b2 = 200;
  int slices = 10;
  std::string kernel = "means";
  std::string criterion = "none";
  std::string grid_text;
  std::uint64_t seed = 0;
  int threads = 0;

  CLI::Option* l_opt = nullptr;
  CLI::Option* k_opt = nullptr;
  CLI::Option* l_prime_opt = nullptr;
  CLI::Option* criterion_opt = nullptr;
  CLI::Option* grid_opt = nullptr;
};

void add_estimator_flags(CLI::App* cmd, EstimatorCli& opts,
                         bool with_criterion) {
  cmd->add_option("--d", opts.d, "Target subspace dimension")
      ->capture_default_str();
  opts.l_opt = cmd->add_option("--l", opts.l, "Support size of the fit")
                   ->capture_default_str();
  opts.k_opt = cmd->add_option("-k,--k", opts.k, "Projection size")
                   ->capture_default_str();
  opts.l_prime_opt =
      cmd->add_option("--lprime", opts.l_prime,
                      "Screening size of the first stage")
          ->capture_default_str();
  cmd->add_option("--a1", opts.a1, "Stage-1 candidate groups")
      ->capture_default_str();
  cmd->add_option("--b1", opts.b1, "Stage-1 candidates per group")
      ->capture_default_str();
  cmd->add_option("--a2", opts.a2, "Stage-2 candidate groups")
      ->capture_default_str();
  cmd->add_option("--b2", opts.b2, "Stage-2 candidates per group")
      ->capture_default_str();
  cmd->add_option("--slices", opts.slices, "Number of response slices")
      ->capture_default_str();
  cmd->add_option("--kernel", opts.kernel,
                  "Kernel estimator: means or residual")
      ->capture_default_str();
  if (with_criterion) {
    opts.criterion_opt =
        cmd->add_option("--criterion", opts.criterion,
                        "Support-size selection: none, aic, or bic")
            ->capture_default_str();
    opts.grid_opt = cmd->add_option(
        "--grid", opts.grid_text,
        "Comma-separated candidate support sizes for tuning");
  }
  cmd->add_option("--seed", opts.seed, "Master seed")->capture_default_str();
  cmd->add_option("--threads", opts.threads, "Worker threads; 0 = all cores")
      ->capture_default_str();
}

struct ResolvedEstimator {
  ssir::Rp2Params params;
  int requested_slices = 10;
  ssir::KernelEstimator estimator = ssir::KernelEstimator::kSliceMeans;
  std::optional<ssir::Criterion> criterion;
  std::vector<int> grid;  // empty means the default grid
  int threads = 0;
};

ssir::KernelEstimator kernel_from_string(const std::string& name) {
  if (name == "means") {
    return ssir::KernelEstimator::kSliceMeans;
  }
  if (name == "residual") {
    return ssir::KernelEstimator::kResidual;
  }
  throw ssir::InvalidArgument("unknown kernel '" + name +
                              "' (expected means or residual)");
}

// Turn the raw flags into engine parameters for a dataset of width p.
// Defaulted size parameters are clipped to what the dataset allows;
// explicitly given ones are passed through and validated strictly by the
// library, so impossible explicit requests fail instead of being bent.
ResolvedEstimator resolve_estimator(const EstimatorCli& opts, int p,
                                    bool criterion_required) {
  ResolvedEstimator out;
  out.params.d = opts.d;
  out.params.A1 = opts.a1;
  out.params.B1 = opts.b1;
  out.params.A2 = opts.a2;
  out.params.B2 = opts.b2;
  out.params.seed = opts.seed;

  const bool l_prime_given = opts.l_prime_opt && opts.l_prime_opt->count() > 0;
  out.params.l_prime = l_prime_given ? opts.l_prime : std::min(opts.l_prime, p);
  const bool k_given = opts.k_opt && opts.k_opt->count() > 0;
  out.params.k =
      k_given ? opts.k
              : std::max(opts.d + 1, std::min(opts.k, out.params.l_prime));
  const bool l_given = opts.l_opt && opts.l_opt->count() > 0;
  out.params.l =
      l_given ? opts.l : std::max(opts.d, std::min(opts.l, out.params.l_prime));

  out.requested_slices = opts.slices;
  out.estimator = kernel_from_string(opts.kernel);
  out.threads = opts.threads;

  if (opts.criterion == "none") {
    if (criterion_required) {
      throw ssir::InvalidArgument("--criterion must be aic or bic here");
    }
  } else if (opts.criterion == "aic") {
    out.criterion = ssir::Criterion::kAic;
  } else if (opts.criterion == "bic") {
    out.criterion = ssir::Criterion::kBic;
  } else {
    throw ssir::InvalidArgument("unknown criterion '" + opts.criterion +
                                "' (expected none, aic, or bic)");
  }
  if (out.criterion && l_given) {
    throw ssir::InvalidArgument(
        "--l fixes the support size and --criterion tunes it; use one");
  }
  if (!opts.grid_text.empty()) {
    if (!out.criterion) {
      throw ssir::InvalidArgument("--grid only makes sense with --criterion");
    }
    out.grid = tools::parse_int_list(opts.grid_text);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Moment assembly with the backend switch for very wide designs.

struct MomentBackend {
  std::optional<ssir::SlicedMoments> dense;  // keeps the reference target alive
  std::unique_ptr<ssir::MomentSource> source;
  const char* name = "dense";
  int effective_slices = 0;
};

MomentBackend build_backend(const ssir::Matrix& X, const ssir::Vector& y,
                            int H, ssir::KernelEstimator estimator) {
  MomentBackend out;
  if (X.cols() <= kDenseWidthLimit) {
    out.dense = ssir::build_moments(X, y, H, estimator);
    out.source = std::make_unique<ssir::DenseMomentSource>(*out.dense);
    out.name = "dense";
    out.effective_slices = out.dense->H();
  } else {
    auto data = std::make_unique<ssir::DataMomentSource>(X, y, H, estimator);
    out.name = "data";
    out.effective_slices = data->plan().H;
    out.source = std::move(data);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report plumbing.

json config_json(const ResolvedEstimator& r, const MomentBackend& backend,
                 int n, int p) {
  json cfg;
  cfg["n"] = n;
  cfg["p"] = p;
  cfg["d"] = r.params.d;
  cfg["l"] = r.params.l;
  cfg["l_prime"] = r.params.l_prime;
  cfg["k"] = r.params.k;
  cfg["a1"] = r.params.A1;
  cfg["b1"] = r.params.B1;
  cfg["a2"] = r.params.A2;
  cfg["b2"] = r.params.B2;
  cfg["slices"] = r.requested_slices;
  cfg["slices_effective"] = backend.effective_slices;
  cfg["kernel"] = r.estimator == ssir::KernelEstimator::kSliceMeans
                      ? "means"
                      : "residual";
  if (r.criterion) {
    cfg["criterion"] = *r.criterion == ssir::Criterion::kAic ? "aic" : "bic";
    cfg["grid"] = r.grid.empty() ? json() : json(r.grid);
  } else {
    cfg["criterion"] = "none";
  }
  cfg["seed"] = r.params.seed;
  cfg["threads_requested"] = r.threads;
  cfg["threads_resolved"] = resolved_thread_count(r.threads);
  cfg["moment_backend"] = backend.name;
  return cfg;
}

json weights_json(const ssir::WeightVector& w,
                  const std::vector<std::string>& names) {
  json out = json::array();
  for (const int j : w.touched) {
    json entry;
    entry["index"] = j;
    entry["feature"] = names[static_cast<std::size_t>(j)];
    entry["value"] = w.w(j);
    out.push_back(std::move(entry));
  }
  return out;
}

json support_json(const ssir::IndexSet& support,
                  const std::vector<std::string>& names) {
  json out = json::array();
  for (const int j : support) {
    json entry;
    entry["index"] = j;
    entry["feature"] = names[static_cast<std::size_t>(j)];
    out.push_back(std::move(entry));
  }
  return out;
}

json diagnostics_json(const ssir::RpDiagnostics& d) {
  json out;
  out["groups"] = d.groups;
  out["degenerate_groups"] = d.degenerate_groups;
  out["wall_ms"] = d.wall_ms;
  return out;
}

json criterion_values_json(const std::vector<std::pair<int, double>>& values) {
  json out = json::array();
  for (const auto& [l, value] : values) {
    json entry;
    entry["l"] = l;
    // +infinity marks degenerate candidates; JSON has no spelling for it.
    entry["value"] = std::isfinite(value) ? json(value) : json();
    out.push_back(std::move(entry));
  }
  return out;
}

std::string coefficients_csv(const ssir::Basis& basis,
                             const std::vector<std::string>& names) {
  std::string out = "feature";
  for (int c = 0; c < basis.d; ++c) {
    out += ",beta_" + std::to_string(c + 1);
  }
  out += "\n";
  for (const int j : basis.support) {
    out += names[static_cast<std::size_t>(j)];
    for (int c = 0; c < basis.d; ++c) {
      out += ",";
      out += tools::format_double(basis.beta(j, c));
    }
    out += "\n";
  }
  return out;
}

// Pull the response column out of a table; everything else is a predictor.
struct Design {
  ssir::Matrix X;
  ssir::Vector y;
  std::vector<std::string> names;  // predictor names, in input order
};

Design split_response(const tools::CsvTable& table,
                      const std::string& response) {
  int response_col = -1;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (table.columns[j] == response) {
      response_col = static_cast<int>(j);
      break;
    }
  }
  if (response_col < 0) {
    throw ssir::InvalidArgument("response column '" + response +
                                "' not found in the header");
  }
  const Eigen::Index n = table.values.rows();
  const Eigen::Index p = table.values.cols() - 1;
  if (p < 1) {
    throw ssir::InvalidArgument("no predictor columns besides the response");
  }
  Design out;
  out.X.resize(n, p);
  out.y = table.values.col(response_col);
  out.names.reserve(static_cast<std::size_t>(p));
  Eigen::Index col = 0;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (static_cast<int>(j) == response_col) {
      continue;
    }
    out.X.col(col++) = table.values.col(static_cast<Eigen::Index>(j));
    out.names.push_back(table.columns[j]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitCli {
  std::string input;
  std::string response;
  std::string coefficients_path = "fit_coefficients.csv";
  std::string report_path = "fit_report.json";
  EstimatorCli estimator;
};

int run_fit(const FitCli& cli) {
  const tools::CsvTable table = tools::read_csv(cli.input);
  const Design design = split_response(table, cli.response);
  const int n = static_cast<int>(design.X.rows());
  const int p = static_cast<int>(design.X.cols());
  const ResolvedEstimator resolved =
      resolve_estimator(cli.estimator, p, false);

  const auto start = std::chrono::steady_clock::now();
  const MomentBackend backend = build_backend(
      design.X, design.y, resolved.requested_slices, resolved.estimator);

  json report;
  report["command"] = "fit";
  report["input"] = cli.input;
  report["response"] = cli.response;
  report["config"] = config_json(resolved, backend, n, p);

  ssir::Basis basis;
  if (resolved.criterion) {
    const ssir::TuneResult tuned =
        ssir::tune_l(*backend.source, resolved.params, *resolved.criterion,
                     resolved.grid, resolved.threads);
    basis = tuned.basis;
    report["chosen_l"] = tuned.chosen_l;
    report["criterion_values"] = criterion_values_json(tuned.criterion_values);
    report["screened"] = tuned.stages.screened;
    report["support"] = support_json(tuned.support, design.names);
    report["stage1_weights"] =
        weights_json(tuned.stages.stage1_weights, design.names);
    report["stage2_weights"] =
        weights_json(tuned.stages.stage2_weights, design.names);
    report["diagnostics"]["stage1"] =
        diagnostics_json(tuned.stages.stage1_diagnostics);
    report["diagnostics"]["stage2"] =
        diagnostics_json(tuned.stages.stage2_diagnostics);
  } else {
    const ssir::ReweightedFit fit = ssir::ssir_rp_reweighted(
        *backend.source, resolved.params, resolved.threads);
    basis = fit.basis;
    report["screened"] = fit.screened;
    report["support"] = support_json(fit.support, design.names);
    report["stage1_weights"] = weights_json(fit.stage1_weights, design.names);
    report["stage2_weights"] = weights_json(fit.stage2_weights, design.names);
    report["diagnostics"]["stage1"] =
        diagnostics_json(fit.stage1_diagnostics);
    report["diagnostics"]["stage2"] =
        diagnostics_json(fit.stage2_diagnostics);
  }
  report["wall_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                start)
          .count();
  report["coefficients"] = cli.coefficients_path;

  write_file(cli.coefficients_path, coefficients_csv(basis, design.names));
  write_file(cli.report_path, report.dump(2) + "\n");
  std::cerr << "fit: support of " << basis.support.size() << " written to "
            << cli.coefficients_path << ", report to " << cli.report_path
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateCli {
  std::string model = "I";
  std::string cov = "identity";
  int n = 100;
  int p = 200;
  int s = 5;
  std::uint64_t seed = 0;
  std::string out_path = "simulated.csv";
  std::string meta_path = "simulated_meta.json";
};

int run_simulate(const SimulateCli& cli) {
  const ssir::ModelKind model = ssir::model_from_string(cli.model);
  const ssir::CovKind cov = ssir::cov_from_string(cli.cov);
  ssir::RngStream stream(ssir::derive_key(cli.seed, ssir::rngtag::kData));
  const ssir::SimulatedDataset data =
      ssir::draw_dataset(stream, cli.n, cli.p, model, cov, cli.s);

  std::string csv;
  csv.reserve(static_cast<std::size_t>(cli.n) *
              static_cast<std::size_t>(cli.p + 1) * 12);
  for (int j = 0; j < cli.p; ++j) {
    csv += "x" + std::to_string(j + 1) + ",";
  }
  csv += "y\n";
  for (int i = 0; i < cli.n; ++i) {
    for (int j = 0; j < cli.p; ++j) {
      csv += tools::format_double(data.X(i, j));
      csv += ",";
    }
    csv += tools::format_double(data.y(i));
    csv += "\n";
  }
  write_file(cli.out_path, csv);

  const ssir::ModelSpec spec = ssir::ModelSpec::of(model);
  json meta;
  meta["command"] = "simulate";
  meta["model"] = cli.model;
  meta["cov"] = cli.cov;
  meta["n"] = cli.n;
  meta["p"] = cli.p;
  meta["s"] = cli.s;
  meta["d"] = spec.d;
  meta["noise_scale"] = spec.noise_scale;
  meta["seed"] = cli.seed;
  meta["response_column"] = "y";
  meta["data"] = cli.out_path;
  meta["support"] = data.support;
  json beta = json::array();
  for (const int j : data.support) {
    json row = json::array();
    for (int c = 0; c < spec.d; ++c) {
      row.push_back(data.beta(j, c));
    }
    beta.push_back(std::move(row));
  }
  meta["beta_support"] = std::move(beta);
  write_file(cli.meta_path, meta.dump(2) + "\n");
  std::cerr << "simulate: " << cli.n << " x " << cli.p << " dataset written to "
            << cli.out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentCli {
  std::string spec_path;
  std::string out_path;      // empty = stdout
  std::string records_path;  // empty = skip
  std::string report_path;   // empty = skip
  int threads = 0;
};

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* name : allowed) {
      if (key == name) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ssir::InvalidArgument("experiment spec: unknown key '" + key +
                                  "' in " + where);
    }
  }
}

int spec_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) {
    return fallback;
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ssir::InvalidArgument(std::string("experiment spec: '") + key +
                                "' must be an integer");
  }
  return v.get<int>();
}

ssir::ExperimentSpec parse_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ssir::InvalidArgument("cannot open spec '" + path + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ssir::InvalidArgument("experiment spec: " + std::string(e.what()));
  }
  if (!doc.is_object()) {
    throw ssir::InvalidArgument("experiment spec: top level must be an object");
  }
  check_keys(doc,
             {"scenarios", "variants", "replicates", "params", "slices",
              "kernel", "s", "seed"},
             "the top level");

  ssir::ExperimentSpec spec;
  if (!doc.contains("scenarios") || !doc.at("scenarios").is_array() ||
      doc.at("scenarios").empty()) {
    throw ssir::InvalidArgument(
        "experiment spec: 'scenarios' must be a nonempty array");
  }
  for (const json& sc : doc.at("scenarios")) {
    if (!sc.is_object()) {
      throw ssir::InvalidArgument("experiment spec: scenario must be an object");
    }
    check_keys(sc, {"model", "cov", "n", "p"}, "a scenario");
    for (const char* key : {"model", "cov", "n", "p"}) {
      if (!sc.contains(key)) {
        throw ssir::InvalidArgument(std::string("experiment spec: scenario "
                                                "missing '") +
                                    key + "'");
      }
    }
    ssir::Scenario scenario;
    scenario.model = ssir::model_from_string(sc.at("model").get<std::string>());
    scenario.cov = ssir::cov_from_string(sc.at("cov").get<std::string>());
    scenario.n = spec_int(sc, "n", 0);
    scenario.p = spec_int(sc, "p", 0);
    spec.scenarios.push_back(scenario);
  }
  if (doc.contains("variants")) {
    if (!doc.at("variants").is_array() || doc.at("variants").empty()) {
      throw ssir::InvalidArgument(
          "experiment spec: 'variants' must be a nonempty array");
    }
    spec.variants.clear();
    for (const json& v : doc.at("variants")) {
      spec.variants.push_back(ssir::variant_from_string(v.get<std::string>()));
    }
  }
  spec.replicates = spec_int(doc, "replicates", 100);
  if (spec.replicates < 1) {
    throw ssir::InvalidArgument("experiment spec: 'replicates' must be >= 1");
  }
  if (doc.contains("params")) {
    const json& params = doc.at("params");
    if (!params.is_object()) {
      throw ssir::InvalidArgument("experiment spec: 'params' must be an object");
    }
    check_keys(params, {"a1", "b1", "a2", "b2", "k", "l", "lprime", "d"},
               "'params'");
    spec.params.A1 = spec_int(params, "a1", spec.params.A1);
    spec.params.B1 = spec_int(params, "b1", spec.params.B1);
    spec.params.A2 = spec_int(params, "a2", spec.params.A2);
    spec.params.B2 = spec_int(params, "b2", spec.params.B2);
    spec.params.k = spec_int(params, "k", spec.params.k);
    spec.params.l = spec_int(params, "l", spec.params.l);
    spec.params.l_prime = spec_int(params, "lprime", spec.params.l_prime);
    // d comes from the model; accepting it here would only invite mismatch.
    if (params.contains("d")) {
      throw ssir::InvalidArgument(
          "experiment spec: 'd' is set by the model, remove it from params");
    }
  }
  spec.H = spec_int(doc, "slices", 10);
  if (doc.contains("kernel")) {
    spec.estimator = kernel_from_string(doc.at("kernel").get<std::string>());
  }
  spec.s = spec_int(doc, "s", 5);
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned() &&
        !doc.at("seed").is_number_integer()) {
      throw ssir::InvalidArgument("experiment spec: 'seed' must be an integer");
    }
    spec.seed = doc.at("seed").get<std::uint64_t>();
  }
  return spec;
}

json experiment_spec_json(const ssir::ExperimentSpec& spec) {
  json out;
  json scenarios = json::array();
  for (const ssir::Scenario& sc : spec.scenarios) {
    json one;
    one["model"] = ssir::to_string(sc.model);
    one["cov"] = ssir::to_string(sc.cov);
    one["n"] = sc.n;
    one["p"] = sc.p;
    scenarios.push_back(std::move(one));
  }
  out["scenarios"] = std::move(scenarios);
  json variants = json::array();
  for (const ssir::Variant v : spec.variants) {
    variants.push_back(ssir::to_string(v));
  }
  out["variants"] = std::move(variants);
  out["replicates"] = spec.replicates;
  out["params"]["a1"] = spec.params.A1;
  out["params"]["b1"] = spec.params.B1;
  out["params"]["a2"] = spec.params.A2;
  out["params"]["b2"] = spec.params.B2;
  out["params"]["k"] = spec.params.k;
  out["params"]["l"] = spec.params.l;
  out["params"]["lprime"] = spec.params.l_prime;
  out["slices"] = spec.H;
  out["kernel"] = spec.estimator == ssir::KernelEstimator::kSliceMeans
                      ? "means"
                      : "residual";
  out["s"] = spec.s;
  out["seed"] = spec.seed;
  return out;
}

int run_experiment_cmd(const ExperimentCli& cli) {
  const ssir::ExperimentSpec spec = parse_experiment_spec(cli.spec_path);
  const bool keep_records = !cli.records_path.empty();

  const auto start = std::chrono::steady_clock::now();
  const ssir::ExperimentResult result =
      ssir::run_experiment(spec, cli.threads, keep_records);
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                start)
          .count();

  std::string tsv = ssir::result_tsv_header() + "\n";
  for (const ssir::ResultRow& row : result.rows) {
    tsv += ssir::result_tsv_row(row);
    tsv += "\n";
  }
  if (cli.out_path.empty()) {
    std::cout << tsv;
  } else {
    write_file(cli.out_path, tsv);
  }

  if (keep_records) {
    std::string records =
        "model\tcov\tn\tp\tvariant\treplicate\tfailed\tcorr_loss\tsignal\t"
        "signal_exact\tchosen_l\twall_ms\n";
    for (const ssir::ReplicateRecord& rec : result.records) {
      const ssir::Scenario& sc =
          spec.scenarios[static_cast<std::size_t>(rec.scenario)];
      records += ssir::to_string(sc.model) + "\t" + ssir::to_string(sc.cov) +
                 "\t" + std::to_string(sc.n) + "\t" + std::to_string(sc.p) +
                 "\t" + ssir::to_string(rec.variant) + "\t" +
                 std::to_string(rec.replicate) + "\t" +
                 (rec.failed ? "1" : "0") + "\t" +
                 tools::format_double(rec.correlation) + "\t" +
                 (rec.signal ? "1" : "0") + "\t" +
                 (rec.signal_exact ? "1" : "0") + "\t" +
                 std::to_string(rec.chosen_l) + "\t" +
                 tools::format_double(rec.wall_ms) + "\n";
    }
    write_file(cli.records_path, records);
  }

  if (!cli.report_path.empty()) {
    json report;
    report["command"] = "experiment";
    report["spec_file"] = cli.spec_path;
    report["spec"] = experiment_spec_json(spec);
    report["threads_requested"] = cli.threads;
    report["threads_resolved"] = resolved_thread_count(cli.threads);
    report["wall_ms"] = wall_ms;
    report["rows"] = result.rows.size();
    write_file(cli.report_path, report.dump(2) + "\n");
  }
  std::cerr << "experiment: " << result.rows.size() << " result rows in "
            << tools::format_double(wall_ms) << " ms\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tune

struct TuneCli {
  std::string input;
  std::string response;
  std::string report_path = "tune_report.json";
  EstimatorCli estimator;
};

int run_tune(const TuneCli& cli) {
  const tools::CsvTable table = tools::read_csv(cli.input);
  const Design design = split_response(table, cli.response);
  const int n = static_cast<int>(design.X.rows());
  const int p = static_cast<int>(design.X.cols());
  const ResolvedEstimator resolved = resolve_estimator(cli.estimator, p, true);

  const auto start = std::chrono::steady_clock::now();
  const MomentBackend backend = build_backend(
      design.X, design.y, resolved.requested_slices, resolved.estimator);
  const ssir::TuneResult tuned =
      ssir::tune_l(*backend.source, resolved.params, *resolved.criterion,
                   resolved.grid, resolved.threads);

  json report;
  report["command"] = "tune";
  report["input"] = cli.input;
  report["response"] = cli.response;
  report["config"] = config_json(resolved, backend, n, p);
  report["chosen_l"] = tuned.chosen_l;
  report["criterion_values"] = criterion_values_json(tuned.criterion_values);
  report["screened"] = tuned.stages.screened;
  report["support"] = support_json(tuned.support, design.names);
  report["stage2_weights"] =
      weights_json(tuned.stages.stage2_weights, design.names);
  json basis = json::array();
  for (const int j : tuned.support) {
    json row = json::array();
    for (int c = 0; c < tuned.basis.d; ++c) {
      row.push_back(tuned.basis.beta(j, c));
    }
    basis.push_back(std::move(row));
  }
  report["basis_support_rows"] = std::move(basis);
  report["wall_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                start)
          .count();
  write_file(cli.report_path, report.dump(2) + "\n");
  std::cerr << "tune: chose l = " << tuned.chosen_l << ", report written to "
            << cli.report_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ssir::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ssir::IndexOutOfRange& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ssir::EmptyGrid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ssir::Error& e) {
    // Remaining library errors are numerical degeneracies of the data.
    std::cerr << "degenerate: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Sparse sliced inverse regression through random axis-aligned "
      "projections"};
  app.require_subcommand(1);

  FitCli fit;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Estimate a sparse basis from a CSV dataset");
  fit_cmd->add_option("--input", fit.input, "Headered CSV with the data")
      ->required();
  fit_cmd->add_option("--response", fit.response, "Response column name")
      ->required();
  fit_cmd->add_option("--coefficients", fit.coefficients_path,
                      "Output CSV for the support coefficients")
      ->capture_default_str();
  fit_cmd->add_option("--report", fit.report_path, "Output JSON report")
      ->capture_default_str();
  add_estimator_flags(fit_cmd, fit.estimator, true);

  SimulateCli sim;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "Draw a synthetic dataset from the benchmark models");
  sim_cmd->add_option("--model", sim.model, "Link model: I, II, III, IV, or V")
      ->capture_default_str();
  sim_cmd->add_option("--cov", sim.cov,
                      "Covariance: identity, dense, toeplitz, sparse_inverse")
      ->capture_default_str();
  sim_cmd->add_option("--n", sim.n, "Observations")->capture_default_str();
  sim_cmd->add_option("--p", sim.p, "Predictors")->capture_default_str();
  sim_cmd->add_option("--s", sim.s, "True support size")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  sim_cmd->add_option("--out", sim.out_path, "Output CSV path")
      ->capture_default_str();
  sim_cmd->add_option("--meta", sim.meta_path, "Sidecar JSON path")
      ->capture_default_str();

  ExperimentCli exp;
  CLI::App* exp_cmd = app.add_subcommand(
      "experiment", "Run a replicated benchmark grid from a JSON spec");
  exp_cmd->add_option("--spec", exp.spec_path, "Experiment spec JSON")
      ->required();
  exp_cmd->add_option("--out", exp.out_path,
                      "Results TSV path (default: standard output)");
  exp_cmd->add_option("--records", exp.records_path,
                      "Optional per-replicate TSV dump");
  exp_cmd->add_option("--report", exp.report_path,
                      "Optional JSON run report with the resolved spec");
  exp_cmd->add_option("--threads", exp.threads,
                      "Worker threads; 0 = all cores")
      ->capture_default_str();

  TuneCli tune;
  CLI::App* tune_cmd = app.add_subcommand(
      "tune", "Choose the support size by information criterion");
  tune_cmd->add_option("--input", tune.input, "Headered CSV with the data")
      ->required();
  tune_cmd->add_option("--response", tune.response, "Response column name")
      ->required();
  tune_cmd->add_option("--report", tune.report_path, "Output JSON report")
      ->capture_default_str();
  add_estimator_flags(tune_cmd, tune.estimator, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (fit_cmd->parsed()) {
    return guarded([&] { return run_fit(fit); });
  }
  if (sim_cmd->parsed()) {
    return guarded([&] { return run_simulate(sim); });
  }
  if (exp_cmd->parsed()) {
    return guarded([&] { return run_experiment_cmd(exp); });
  }
  if (tune_cmd->parsed()) {
    return guarded([&] { return run_tune(tune); });
  }
  return 2;
}
