#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rdforest/dgp.hpp"
#include "rdforest/domain.hpp"
#include "rdforest/rd.hpp"

namespace rdforest {

/// Estimator plugged into the harness directly. Receives the replication's
/// dataset, the boundary point and a seed private to (replication, method).
using CustomEstimator =
    std::function<EstimateReport(const Dataset& data, const BoundaryPoint& x_c, std::uint64_t seed)>;

struct MethodEntry {
  std::string name;
  std::variant<RDMethodConfig, CustomEstimator> method;

  static MethodEntry builtin(RDMethodConfig config);
  static MethodEntry custom(std::string name, CustomEstimator estimator);
};

struct MCConfig {
  DGPSpec dgp;
  ScorePoint x_c{0.0};
  std::vector<MethodEntry> methods;
  std::vector<std::size_t> sample_sizes;
  std::size_t replications = 100;
  std::uint64_t master_seed = 1;
  double level = 0.95;
  bool record_timing = false;  // wall_time stays 0 otherwise, keeping output reproducible

  void validate() const;
};

struct MCRow {
  std::string method;
  std::size_t n = 0;
  double mean_bias = 0.0;
  double variance = 0.0;  // sample variance of the point estimates
  double coverage = 0.0;
  double mean_ci_length = 0.0;
  std::size_t failures = 0;
  double wall_time = 0.0;  // seconds spent estimating, summed over replications

  friend bool operator==(const MCRow&, const MCRow&) = default;
};

struct MCResult {
  double truth = 0.0;
  std::size_t replications = 0;
  std::vector<MCRow> rows;  // sample-size major, methods in configured order

  friend bool operator==(const MCResult&, const MCResult&) = default;
};

/// Seed of replication r at sample size n. Every method sees the dataset
/// simulated from this seed.
std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t n, std::size_t r);

/// OpenMP kernel: (n, r) replications run in parallel and are reduced in a
/// fixed order, so results do not depend on the thread count.
MCResult run_mc(const MCConfig& config);

/// Serial reference for run_mc.
MCResult run_mc_serial(const MCConfig& config);

enum class TableFormat { kCsv, kJson };

TableFormat parse_table_format(std::string_view name);

/// Columns: method,n,mean_bias,variance,coverage,mean_ci_length,failures,wall_time.
/// Throws IoError when the stream fails.
void emit_table(const MCResult& result, TableFormat format, std::ostream& out);

/// Inverse of emit_table for the JSON format.
MCResult parse_mc_result_json(std::istream& in);

}  // namespace rdforest
