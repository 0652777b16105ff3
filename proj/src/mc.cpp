#include "rdforest/mc.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"

#include "rdforest/dataset_io.hpp"
#include "rdforest/error.hpp"
#include "rdforest/random.hpp"

namespace rdforest {

MethodEntry MethodEntry::builtin(RDMethodConfig config) {
  std::string name(rd_method_name(config.method));
  return {std::move(name), std::move(config)};
}

MethodEntry MethodEntry::custom(std::string name, CustomEstimator estimator) {
  return {std::move(name), std::move(estimator)};
}

void MCConfig::validate() const {
  dgp.validate();
  if (x_c.dim() != dgp.dim()) throw DimensionError("boundary point dimension differs from the DGP");
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (sample_sizes.empty()) throw ConfigError("at least one sample size is required");
  for (std::size_t n : sample_sizes) {
    if (n == 0) throw ConfigError("sample sizes must be positive");
  }
  if (replications < 2) throw ConfigError("replications must be at least 2");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  for (const auto& m : methods) {
    if (m.name.empty()) throw ConfigError("method names must be non-empty");
    if (const auto* cfg = std::get_if<RDMethodConfig>(&m.method)) {
      cfg->validate();
    } else if (!std::get<CustomEstimator>(m.method)) {
      throw ConfigError("custom method '" + m.name + "' has no estimator");
    }
  }
}

std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t n, std::size_t r) {
  return derive_seed(master_seed, {n, r});
}

namespace {

struct Outcome {
  bool ok = false;
  double estimate = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double seconds = 0.0;
};

struct Task {
  std::size_t n;
  std::size_t r;
};

void run_replication(const MCConfig& config, const BoundaryPoint& x_c, const Task& task,
                     Outcome* out) {
  const std::uint64_t rep = replication_seed(config.master_seed, task.n, task.r);
  std::optional<Dataset> data;
  try {
    data.emplace(simulate(config.dgp, task.n, derive_seed(rep, {0})));
  } catch (const Error&) {
    return;  // every method fails on this replication
  }
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    const auto& entry = config.methods[m];
    const auto start = std::chrono::steady_clock::now();
    try {
      EstimateReport report;
      if (const auto* cfg = std::get_if<RDMethodConfig>(&entry.method)) {
        RDMethodConfig local = *cfg;
        local.level = config.level;
        local.forest.seed = derive_seed(cfg->forest.seed, {rep});
        report = estimate_at(fit_rd(*data, x_c.rule(), local), x_c);
      } else {
        report = std::get<CustomEstimator>(entry.method)(*data, x_c, derive_seed(rep, {1, m}));
      }
      if (std::isfinite(report.estimate) && std::isfinite(report.ci_lower) &&
          std::isfinite(report.ci_upper)) {
        out[m] = {true, report.estimate, report.ci_lower, report.ci_upper, 0.0};
      }
    } catch (const Error&) {
    }
    if (config.record_timing) {
      out[m].seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  }
}

MCResult summarize(const MCConfig& config, double truth, const std::vector<Outcome>& outcomes) {
  const std::size_t methods = config.methods.size();
  const std::size_t reps = config.replications;
  MCResult result;
  result.truth = truth;
  result.replications = reps;
  for (std::size_t k = 0; k < config.sample_sizes.size(); ++k) {
    for (std::size_t m = 0; m < methods; ++m) {
      MCRow row;
      row.method = config.methods[m].name;
      row.n = config.sample_sizes[k];
      std::size_t ok = 0, covered = 0;
      double sum = 0.0, length = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        const Outcome& o = outcomes[(k * reps + r) * methods + m];
        row.wall_time += o.seconds;
        if (!o.ok) continue;
        ++ok;
        sum += o.estimate - truth;
        length += o.ci_upper - o.ci_lower;
        if (o.ci_lower <= truth && truth <= o.ci_upper) ++covered;
      }
      row.failures = reps - ok;
      if (ok == 0) {
        throw HarnessError("all " + std::to_string(reps) + " replications failed for method '" +
                           row.method + "' at n = " + std::to_string(row.n));
      }
      // work with errors so an exact estimator reports exactly zero bias
      const double mean = sum / static_cast<double>(ok);
      double ss = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        const Outcome& o = outcomes[(k * reps + r) * methods + m];
        if (!o.ok) continue;
        const double dev = (o.estimate - truth) - mean;
        ss += dev * dev;
      }
      row.mean_bias = mean;
      row.variance = ok > 1 ? ss / static_cast<double>(ok - 1) : 0.0;
      row.coverage = static_cast<double>(covered) / static_cast<double>(ok);
      row.mean_ci_length = length / static_cast<double>(ok);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

MCResult run_mc_impl(const MCConfig& config, bool parallel) {
  config.validate();
  const BoundaryPoint x_c(config.x_c, config.dgp.rule);
  const double truth = true_effect(config.dgp, config.x_c);

  std::vector<Task> tasks;
  for (std::size_t n : config.sample_sizes) {
    for (std::size_t r = 0; r < config.replications; ++r) tasks.push_back({n, r});
  }
  const std::size_t methods = config.methods.size();
  std::vector<Outcome> outcomes(tasks.size() * methods);
  const auto count = static_cast<std::int64_t>(tasks.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t t = 0; t < count; ++t) {
      run_replication(config, x_c, tasks[t], outcomes.data() + t * methods);
    }
  } else {
    for (std::int64_t t = 0; t < count; ++t) {
      run_replication(config, x_c, tasks[t], outcomes.data() + t * methods);
    }
  }
  return summarize(config, truth, outcomes);
}

}  // namespace

MCResult run_mc(const MCConfig& config) { return run_mc_impl(config, true); }

MCResult run_mc_serial(const MCConfig& config) { return run_mc_impl(config, false); }

TableFormat parse_table_format(std::string_view name) {
  if (name == "csv") return TableFormat::kCsv;
  if (name == "json") return TableFormat::kJson;
  throw ConfigError("unknown table format '" + std::string(name) + "'");
}

void emit_table(const MCResult& result, TableFormat format, std::ostream& out) {
  if (result.rows.empty()) throw ConfigError("emit_table: empty result");
  if (format == TableFormat::kCsv) {
    out << "method,n,mean_bias,variance,coverage,mean_ci_length,failures,wall_time\n";
    for (const auto& row : result.rows) {
      out << row.method << ',' << row.n << ',' << format_full(row.mean_bias) << ','
          << format_full(row.variance) << ',' << format_full(row.coverage) << ','
          << format_full(row.mean_ci_length) << ',' << row.failures << ','
          << format_full(row.wall_time) << '\n';
    }
  } else {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : result.rows) {
      rows.push_back({{"method", row.method},
                      {"n", row.n},
                      {"mean_bias", row.mean_bias},
                      {"variance", row.variance},
                      {"coverage", row.coverage},
                      {"mean_ci_length", row.mean_ci_length},
                      {"failures", row.failures},
                      {"wall_time", row.wall_time}});
    }
    nlohmann::ordered_json doc;
    doc["truth"] = result.truth;
    doc["replications"] = result.replications;
    doc["rows"] = std::move(rows);
    out << doc.dump(2) << '\n';
  }
  out.flush();
  if (!out) throw IoError("failed to write result table");
}

MCResult parse_mc_result_json(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    MCResult result;
    result.truth = doc.at("truth").get<double>();
    result.replications = doc.at("replications").get<std::size_t>();
    for (const auto& r : doc.at("rows")) {
      MCRow row;
      row.method = r.at("method").get<std::string>();
      row.n = r.at("n").get<std::size_t>();
      row.mean_bias = r.at("mean_bias").get<double>();
      row.variance = r.at("variance").get<double>();
      row.coverage = r.at("coverage").get<double>();
      row.mean_ci_length = r.at("mean_ci_length").get<double>();
      row.failures = r.at("failures").get<std::size_t>();
      row.wall_time = r.at("wall_time").get<double>();
      result.rows.push_back(std::move(row));
    }
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("result JSON: ") + e.what());
  }
}

}  // namespace rdforest
