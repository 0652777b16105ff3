#include "rdforest/rd.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rdforest/error.hpp"
#include "rdforest/random.hpp"

namespace rdforest {

RDMethod parse_rd_method(std::string_view name) {
  if (name == "rf") return RDMethod::kRf;
  if (name == "llf") return RDMethod::kLlf;
  if (name == "llr") return RDMethod::kLlr;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view rd_method_name(RDMethod method) {
  switch (method) {
    case RDMethod::kRf: return "rf";
    case RDMethod::kLlf: return "llf";
    case RDMethod::kLlr: return "llr";
  }
  return "rf";
}

RDMethodConfig RDMethodConfig::defaults(RDMethod method) {
  RDMethodConfig cfg;
  cfg.method = method;
  if (method == RDMethod::kLlf) cfg.forest.split_rule = SplitRule::kRidgeResidual;
  return cfg;
}

void RDMethodConfig::validate() const {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  if (!(buffer_epsilon >= 0.0) || !std::isfinite(buffer_epsilon)) {
    throw ConfigError("buffer epsilon must be non-negative");
  }
  kernel.validate();
}

BufferedPoints buffered_eval_points(const BoundaryPoint& x_c, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("buffer epsilon must be non-negative");
  const ScorePoint& p = x_c.point();
  const double mag = p.magnitude();
  const double ulp = std::nextafter(mag, std::numeric_limits<double>::infinity()) - mag;
  const double requested = epsilon * std::max(1.0, mag);
  const double floor = 8.0 * ulp;
  const double eps = std::max(requested, floor);

  const auto normal = x_c.rule().inward_normal(p.coords());
  std::vector<double> plus(p.dim()), minus(p.dim());
  for (std::size_t j = 0; j < p.dim(); ++j) {
    plus[j] = p[j] + eps * normal[j];
    minus[j] = p[j] - eps * normal[j];
  }
  BufferedPoints out{ScorePoint(std::move(plus)), ScorePoint(std::move(minus)), eps, requested < floor};
  if (assign(x_c.rule(), out.plus) != 1 || assign(x_c.rule(), out.minus) != 0) {
    throw GeometryError("buffered evaluation point fell on the wrong side of the boundary");
  }
  return out;
}

namespace {

// Side seed from the configured seed and the bit patterns of the side's scores.
std::uint64_t side_seed(std::uint64_t seed, const Dataset& side) {
  std::uint64_t h = splitmix64(side.size());
  for (double v : side.scores()) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(v));
  return derive_seed(seed, {h});
}

ForestVariant variant_of(RDMethod method) {
  return method == RDMethod::kLlf ? ForestVariant::kLlf : ForestVariant::kRf;
}

LinearFit llr_side(const Dataset& side, double cutoff, KernelShape shape, double h) {
  const auto x = side.scores();
  std::vector<double> w(side.size());
  for (std::size_t i = 0; i < side.size(); ++i) w[i] = kernel_weight(shape, x[i] - cutoff, h);
  return wls_linear_fit(x, side.outcomes(), w, cutoff);
}

}  // namespace

FittedRD fit_rd(const Dataset& data, const AssignmentRule& rule, const RDMethodConfig& config) {
  config.validate();
  if (rule.dim() != data.dim()) throw DimensionError("fit_rd: rule and data dimensions differ");
  if (config.method == RDMethod::kLlr && data.dim() != 1) {
    throw MethodError("llr is univariate; collapse multivariate scores first");
  }
  auto [treated, control] = split_by_treatment(data, rule);
  FittedRD fitted(config, rule);
  fitted.n_treated_ = treated.size();
  fitted.n_control_ = control.size();
  fitted.treated_data_ = std::make_shared<const Dataset>(std::move(treated));
  fitted.control_data_ = std::make_shared<const Dataset>(std::move(control));

  if (config.method == RDMethod::kLlr) {
    fitted.all_data_ = std::make_shared<const Dataset>(data);
    return fitted;
  }
  const std::size_t min_side = 2 * config.forest.min_node_size;
  if (fitted.n_treated_ < min_side || fitted.n_control_ < min_side) {
    throw EmptySideError("each side needs at least 2 * min_node_size observations");
  }
  const ForestVariant variant = variant_of(config.method);
  ForestConfig fc = config.forest;
  fc.seed = side_seed(config.forest.seed, *fitted.treated_data_);
  fitted.treated_ = fit_forest(fitted.treated_data_, fc, variant);
  fc.seed = side_seed(config.forest.seed, *fitted.control_data_);
  fitted.control_ = fit_forest(fitted.control_data_, fc, variant);
  return fitted;
}

EstimateReport estimate_at(const FittedRD& fitted, const BoundaryPoint& x_c) {
  const auto& cfg = fitted.config_;
  if (x_c.point().dim() != fitted.rule_.dim()) throw DimensionError("estimate_at: dimension mismatch");

  if (cfg.method == RDMethod::kLlr) {
    const double cutoff = x_c.point()[0];
    const double h = cfg.kernel.bandwidth ? *cfg.kernel.bandwidth
                                          : rot_bandwidth(fitted.all_data_->scores(), cutoff);
    const LinearFit plus = llr_side(*fitted.treated_data_, cutoff, cfg.kernel.shape, h);
    const LinearFit minus = llr_side(*fitted.control_data_, cutoff, cfg.kernel.shape, h);
    const double se = std::sqrt(plus.intercept_se * plus.intercept_se + minus.intercept_se * minus.intercept_se);
    return EstimateReport::make(plus.intercept - minus.intercept, se, cfg.level, fitted.n_treated_,
                                fitted.n_control_);
  }

  // The boundary point must belong to the rule the model was fitted with.
  const BoundaryPoint on_rule(x_c.point(), fitted.rule_);
  const BufferedPoints pts = buffered_eval_points(on_rule, cfg.buffer_epsilon);
  const Predictor predictor = cfg.method == RDMethod::kLlf ? Predictor::kLlf : Predictor::kRf;
  const auto plus = predict_with_variance(*fitted.treated_, pts.plus.coords(), predictor);
  const auto minus = predict_with_variance(*fitted.control_, pts.minus.coords(), predictor);
  return EstimateReport::make(plus.estimate - minus.estimate, std::sqrt(plus.variance + minus.variance),
                              cfg.level,
                              fitted.n_treated_, fitted.n_control_);
}

}  // namespace rdforest
