#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "rdforest/domain.hpp"
#include "rdforest/forest.hpp"
#include "rdforest/local_linear.hpp"

namespace rdforest {

enum class RDMethod { kRf, kLlf, kLlr };

RDMethod parse_rd_method(std::string_view name);
std::string_view rd_method_name(RDMethod method);

inline constexpr double kDefaultBufferEpsilon = 1e-9;

struct RDMethodConfig {
  RDMethod method = RDMethod::kRf;
  ForestConfig forest;         // rf / llf
  KernelSpec kernel;           // llr
  double buffer_epsilon = kDefaultBufferEpsilon;  // forests only
  double level = 0.95;

  /// Defaults per method; llf switches the forest to ridge-residual splits.
  static RDMethodConfig defaults(RDMethod method);
  void validate() const;
};

struct BufferedPoints {
  ScorePoint plus;
  ScorePoint minus;
  double epsilon_effective = 0.0;
  bool floored = false;  // requested epsilon was below the representable shift
};

/// Evaluation points moved off the boundary by eps_eff along the inward
/// normal, eps_eff = max(epsilon * max(1, |x_c|_inf), 8 ulp(|x_c|_inf)).
/// Throws GeometryError if a shifted point lands on the wrong side.
BufferedPoints buffered_eval_points(const BoundaryPoint& x_c, double epsilon);

/// Two side-wise models fitted on disjoint data.
class FittedRD {
 public:
  const RDMethodConfig& config() const noexcept { return config_; }
  const AssignmentRule& rule() const noexcept { return rule_; }
  const FittedForest* treated_forest() const { return treated_ ? &*treated_ : nullptr; }
  const FittedForest* control_forest() const { return control_ ? &*control_ : nullptr; }
  std::size_t n_treated() const noexcept { return n_treated_; }
  std::size_t n_control() const noexcept { return n_control_; }

 private:
  friend FittedRD fit_rd(const Dataset&, const AssignmentRule&, const RDMethodConfig&);
  friend EstimateReport estimate_at(const FittedRD&, const BoundaryPoint&);

  FittedRD(RDMethodConfig config, AssignmentRule rule) : config_(std::move(config)), rule_(std::move(rule)) {}

  RDMethodConfig config_;
  AssignmentRule rule_;
  std::optional<FittedForest> treated_;
  std::optional<FittedForest> control_;
  std::shared_ptr<const Dataset> treated_data_;
  std::shared_ptr<const Dataset> control_data_;
  std::shared_ptr<const Dataset> all_data_;  // llr bandwidth rule
  std::size_t n_treated_ = 0;
  std::size_t n_control_ = 0;
};

/// Splits by `rule` and fits one model per side. Forest seeds are derived
/// from the configured seed and the side's scores, so exchanging the roles of
/// the two sides exchanges the fitted forests.
FittedRD fit_rd(const Dataset& data, const AssignmentRule& rule, const RDMethodConfig& config);

/// tau_hat = mu_plus(x_plus) - mu_minus(x_minus) with SE = sqrt(v_plus + v_minus).
EstimateReport estimate_at(const FittedRD& fitted, const BoundaryPoint& x_c);

}  // namespace rdforest
