// rdforest command-line tool.
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"

#include "rdforest/config_json.hpp"
#include "rdforest/dataset_io.hpp"
#include "rdforest/dgp.hpp"
#include "rdforest/error.hpp"
#include "rdforest/mc.hpp"
#include "rdforest/rd.hpp"
#include "rdforest/score_transform.hpp"

using namespace rdforest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

// Bad flag values or combinations detected before any computation.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Accepts inline JSON or @path.
std::string json_arg(const std::string& value) {
  if (!value.empty() && value.front() == '@') return read_text_file(value.substr(1));
  return value;
}

DGPSpec load_dgp(const std::string& preset, const std::string& spec) {
  if (!preset.empty() && !spec.empty()) throw UsageError("--preset and --spec are mutually exclusive");
  if (preset.empty() && spec.empty()) throw UsageError("one of --preset or --spec is required");
  try {
    if (!preset.empty()) return dgp_preset(preset);
    return parse_dgp_json(read_text_file(spec));
  } catch (const ConfigError& e) {
    if (!preset.empty()) throw UsageError(e.what());
    throw;
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError("failed to write to stdout");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed to write '" + path + "'");
}

struct DgpSampleArgs {
  std::string preset, spec, out;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

int run_dgp_sample(const DgpSampleArgs& a) {
  const DGPSpec spec = load_dgp(a.preset, a.spec);
  if (a.n == 0) throw UsageError("--n must be positive");
  const Dataset data = simulate(spec, a.n, a.seed);
  std::ostringstream ss;
  write_dataset_csv(ss, data, true);
  write_output(a.out, ss.str());
  return kExitOk;
}

struct TrueEffectArgs {
  std::string preset, spec;
  std::vector<double> at;
};

int run_true_effect(const TrueEffectArgs& a) {
  const DGPSpec spec = load_dgp(a.preset, a.spec);
  if (a.at.size() != spec.dim()) throw UsageError("--at needs one coordinate per score dimension");
  std::cout << format_short(true_effect(spec, ScorePoint(a.at))) << '\n';
  return kExitOk;
}

struct EstimateArgs {
  std::string data, method = "rf", rule, kernel, split_rule, lambda, out;
  std::vector<double> at;
  std::optional<double> cutoff, bandwidth, alpha, c_scale, buffer_epsilon, level;
  std::optional<std::size_t> trees, mtry, min_node, ci_group_size;
  std::optional<std::uint64_t> seed;
};

int run_estimate(const EstimateArgs& a) {
  RDMethodConfig cfg;
  try {
    cfg = RDMethodConfig::defaults(parse_rd_method(a.method));
    auto& f = cfg.forest;
    if (a.trees) f.num_trees = *a.trees;
    if (a.mtry) f.mtry = *a.mtry;
    if (a.min_node) f.min_node_size = *a.min_node;
    if (a.alpha) f.alpha = *a.alpha;
    if (a.c_scale) f.c_scale = *a.c_scale;
    if (a.ci_group_size) f.ci_group_size = *a.ci_group_size;
    if (a.seed) f.seed = *a.seed;
    if (!a.split_rule.empty()) f.split_rule = parse_split_rule(a.split_rule);
    if (!a.lambda.empty()) {
      if (a.lambda == "auto") f.ridge_lambda.reset();
      else f.ridge_lambda = std::stod(a.lambda);
    }
    if (!a.kernel.empty()) cfg.kernel.shape = parse_kernel_shape(a.kernel);
    if (a.bandwidth) cfg.kernel.bandwidth = *a.bandwidth;
    if (a.buffer_epsilon) cfg.buffer_epsilon = *a.buffer_epsilon;
    if (a.level) cfg.level = *a.level;
    cfg.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument&) {
    throw UsageError("--lambda must be a number or 'auto'");
  }
  if (a.cutoff && !a.at.empty()) throw UsageError("--cutoff and --at are mutually exclusive");
  if (!a.cutoff && a.at.empty()) throw UsageError("one of --at or --cutoff is required");
  std::vector<double> at = a.cutoff ? std::vector<double>{*a.cutoff} : a.at;

  std::optional<AssignmentRule> rule;
  if (!a.rule.empty()) {
    rule = parse_rule_json(json_arg(a.rule));
  } else if (at.size() == 1) {
    rule = AssignmentRule::threshold(at[0]);
  } else {
    throw UsageError("multivariate scores need --rule");
  }
  if (rule->dim() != at.size()) throw UsageError("--rule and --at dimensions differ");

  const Dataset data = read_dataset_csv_file(a.data, rule);
  if (data.dim() != at.size()) throw DimensionError("data has " + std::to_string(data.dim()) +
                                                    " score columns but --at has " + std::to_string(at.size()));
  cfg.forest.validate(data.dim());

  EstimateOutput out;
  out.method = a.method;
  out.at = ScorePoint(at);
  const BoundaryPoint x_c(out.at, *rule);
  if (cfg.method == RDMethod::kLlr) {
    if (!cfg.kernel.bandwidth) cfg.kernel.bandwidth = rot_bandwidth(data.scores(), at[0]);
    out.bandwidth = *cfg.kernel.bandwidth;
  } else {
    const BufferedPoints pts = buffered_eval_points(x_c, cfg.buffer_epsilon);
    out.buffer_epsilon = pts.epsilon_effective;
    out.buffer_floored = pts.floored;
    if (pts.floored) {
      std::cerr << "warning: buffer epsilon " << format_short(cfg.buffer_epsilon)
                << " is below the representable shift; using " << format_short(pts.epsilon_effective) << '\n';
    }
  }
  out.report = estimate_at(fit_rd(data, *rule, cfg), x_c);
  if (a.out.empty()) {
    std::cout << estimate_to_json(out) << '\n';
    std::cerr << a.method << ": tau = " << format_short(out.report.estimate) << " (se "
              << format_short(out.report.std_error) << ", " << format_short(100.0 * out.report.level)
              << "% CI [" << format_short(out.report.ci_lower) << ", " << format_short(out.report.ci_upper)
              << "])\n";
  } else {
    write_output(a.out, estimate_to_json(out) + "\n");
  }
  return kExitOk;
}

struct CollapseArgs {
  std::string data, rule, out;
  std::vector<double> center;
  double scale = 1.0;
};

int run_collapse(const CollapseArgs& a) {
  if (a.center.size() < 2) throw UsageError("--center needs at least two coordinates");
  if (!(a.scale > 0.0)) throw UsageError("--scale must be positive");
  const AssignmentRule rule = parse_rule_json(json_arg(a.rule));
  if (rule.dim() != a.center.size()) throw UsageError("--rule and --center dimensions differ");
  const Dataset data = read_dataset_csv_file(a.data, rule);
  const Dataset collapsed = collapse(data, CollapseSpec{ScorePoint(a.center), a.scale, rule});
  std::ostringstream ss;
  write_dataset_csv(ss, collapsed, true);
  write_output(a.out, ss.str());
  return kExitOk;
}

struct DiagnoseArgs {
  std::string data, out;
  std::size_t bins = kDefaultDiagnosticBins;
  std::optional<double> window;
  double threshold = kDefaultDiagnosticThreshold;
};

int run_diagnose(const DiagnoseArgs& a) {
  if (a.bins < 10) throw UsageError("--bins must be at least 10");
  if (a.window && !(*a.window > 0.0)) throw UsageError("--window must be positive");
  if (!(a.threshold > 0.0)) throw UsageError("--threshold must be positive");
  const Dataset data = read_dataset_csv_file(a.data);
  if (data.dim() != 1) throw DimensionError("diagnose-density expects a univariate (collapsed) score");
  const auto scores = data.scores();
  DensityDiagnostic d;
  if (a.window) {
    d = zero_density_diagnostic(scores, a.bins, *a.window, a.threshold);
  } else {
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    d = zero_density_diagnostic(scores, a.bins, (*hi - *lo) / 200.0, a.threshold);
  }
  if (a.out.empty()) {
    std::cout << diagnostic_to_json(d) << '\n';
    std::cerr << (d.flagged ? "flagged" : "not flagged") << ": density ratio near zero "
              << format_short(d.positive.ratio) << " (treated), " << format_short(d.negative.ratio)
              << " (control)\n";
  } else {
    write_output(a.out, diagnostic_to_json(d) + "\n");
  }
  return kExitOk;
}

struct McArgs {
  std::string config, out, format = "csv";
  bool timing = false;
};

int run_mc_command(const McArgs& a) {
  TableFormat format;
  try {
    format = parse_table_format(a.format);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  MCConfig cfg = parse_study_file(a.config);
  cfg.record_timing = a.timing;
  const MCResult result = run_mc(cfg);
  std::ostringstream ss;
  emit_table(result, format, ss);
  write_output(a.out, ss.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forest and local linear estimators for regression discontinuity designs"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       [] {
                         return std::string("rdforest ") + kVersion + "\ndefaults " +
                                default_parameters_fingerprint() + " " + default_parameters_json();
                       });
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: all logical cores)")
      ->check(CLI::PositiveNumber);

  int (*action)() = nullptr;
  static DgpSampleArgs dgp_args;
  static TrueEffectArgs te_args;
  static EstimateArgs est_args;
  static CollapseArgs col_args;
  static DiagnoseArgs diag_args;
  static McArgs mc_args;

  auto* dgp = app.add_subcommand("dgp", "Synthetic data generating processes");
  dgp->require_subcommand(1);
  auto* sample = dgp->add_subcommand("sample", "Simulate a dataset as CSV");
  sample->add_option("--preset", dgp_args.preset, "Preset name (lee, square2d, kt_price, kt_age, kt_turnout)");
  sample->add_option("--spec", dgp_args.spec, "DGP JSON file")->check(CLI::ExistingFile);
  sample->add_option("--n", dgp_args.n, "Rows")->required();
  sample->add_option("--seed", dgp_args.seed, "Seed")->required();
  sample->add_option("--out", dgp_args.out, "Output CSV (default stdout)");
  sample->callback([&] { action = [] { return run_dgp_sample(dgp_args); }; });

  auto* te = app.add_subcommand("true-effect", "Print the true effect at a boundary point");
  te->add_option("--preset", te_args.preset, "Preset name");
  te->add_option("--spec", te_args.spec, "DGP JSON file")->check(CLI::ExistingFile);
  te->add_option("--at", te_args.at, "Boundary point coordinates")->required()->expected(1, -1);
  te->callback([&] { action = [] { return run_true_effect(te_args); }; });

  auto* est = app.add_subcommand("estimate", "Estimate the effect at a boundary point");
  est->add_option("--data", est_args.data, "Input CSV (y,x1..xd[,d])")->required()->check(CLI::ExistingFile);
  est->add_option("--method", est_args.method, "rf, llf or llr")->check(CLI::IsMember({"rf", "llf", "llr"}));
  est->add_option("--at", est_args.at, "Boundary point coordinates")->expected(1, -1);
  est->add_option("--cutoff", est_args.cutoff, "Univariate cutoff");
  est->add_option("--rule", est_args.rule, "Assignment rule JSON (inline or @file)");
  est->add_option("--bandwidth", est_args.bandwidth, "llr bandwidth (default rule of thumb)");
  est->add_option("--kernel", est_args.kernel, "llr kernel")
      ->check(CLI::IsMember({"triangular", "epanechnikov", "uniform"}));
  est->add_option("--trees", est_args.trees, "Number of trees");
  est->add_option("--mtry", est_args.mtry, "Features tried per split");
  est->add_option("--min-node", est_args.min_node, "Minimum estimation rows per leaf");
  est->add_option("--alpha", est_args.alpha, "Minimum child share")->check(CLI::Range(0.0, 0.5));
  est->add_option("--c-scale", est_args.c_scale, "Subsample constant c")->check(CLI::Range(0.05, 0.5));
  est->add_option("--lambda", est_args.lambda, "llf ridge penalty or 'auto'");
  est->add_option("--split-rule", est_args.split_rule, "cart or ridge_residual");
  est->add_option("--ci-group-size", est_args.ci_group_size, "Trees per little bag");
  est->add_option("--buffer-epsilon", est_args.buffer_epsilon, "Boundary buffer");
  est->add_option("--level", est_args.level, "Confidence level");
  est->add_option("--seed", est_args.seed, "Seed");
  est->add_option("--out", est_args.out, "Write the JSON report here");
  est->callback([&] { action = [] { return run_estimate(est_args); }; });

  auto* col = app.add_subcommand("collapse", "Collapse multivariate scores to a signed distance");
  col->add_option("--data", col_args.data, "Input CSV")->required()->check(CLI::ExistingFile);
  col->add_option("--center", col_args.center, "Boundary point")->required()->expected(2, -1);
  col->add_option("--rule", col_args.rule, "Assignment rule JSON (inline or @file)")->required();
  col->add_option("--scale", col_args.scale, "Distance scale");
  col->add_option("--out", col_args.out, "Output CSV (default stdout)");
  col->callback([&] { action = [] { return run_collapse(col_args); }; });

  auto* diag = app.add_subcommand("diagnose-density", "Check for a vanishing density at the cutoff");
  diag->add_option("--data", diag_args.data, "Univariate CSV, cutoff at 0")->required()->check(CLI::ExistingFile);
  diag->add_option("--bins", diag_args.bins, "Histogram bins");
  diag->add_option("--window", diag_args.window, "Near-zero window (default range/200)");
  diag->add_option("--threshold", diag_args.threshold, "Flag when the density ratio falls below this");
  diag->add_option("--out", diag_args.out, "Write the JSON report here");
  diag->callback([&] { action = [] { return run_diagnose(diag_args); }; });

  auto* mc = app.add_subcommand("mc", "Monte Carlo study");
  mc->add_option("--config", mc_args.config, "Study JSON")->required()->check(CLI::ExistingFile);
  mc->add_option("--out", mc_args.out, "Output table (default stdout)");
  mc->add_option("--format", mc_args.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  mc->add_flag("--timing", mc_args.timing, "Record wall time (output is then not reproducible)");
  mc->callback([&] { action = [] { return run_mc_command(mc_args); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error[UsageError]: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error[" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error[Internal]: " << e.what() << '\n';
    return kExitData;
  }
}
