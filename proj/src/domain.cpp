#include "rdforest/domain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "rdforest/error.hpp"
#include "rdforest/random.hpp"

namespace rdforest {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimension: return "DimensionError";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kEmptySide: return "EmptySideError";
    case ErrorCode::kSingularDesign: return "SingularDesignError";
    case ErrorCode::kDomain: return "DomainError";
    case ErrorCode::kNumerical: return "NumericalError";
    case ErrorCode::kBoundary: return "BoundaryError";
    case ErrorCode::kPrediction: return "PredictionError";
    case ErrorCode::kGeometry: return "GeometryError";
    case ErrorCode::kMethod: return "MethodError";
    case ErrorCode::kHarness: return "HarnessError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kParse: return "ParseError";
  }
  return "Error";
}

// ---------------------------------------------------------------------------
// ScorePoint

ScorePoint::ScorePoint(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) throw DimensionError("ScorePoint: dimension must be at least 1");
  for (double c : coords_) {
    if (!std::isfinite(c)) throw DomainError("ScorePoint: non-finite coordinate");
  }
}

double ScorePoint::magnitude() const noexcept {
  double m = 0.0;
  for (double c : coords_) m = std::max(m, std::abs(c));
  return m;
}

// ---------------------------------------------------------------------------
// AssignmentRule

std::pair<double, double> CurveBoundary::height_and_slope(double x1) const {
  // Segment k joins vertices k and k+1; pick the one covering x1, clamping to
  // the first/last segment outside the vertex range.
  auto it = std::upper_bound(vertices.begin(), vertices.end(), x1,
                             [](double v, const auto& p) { return v < p.first; });
  std::size_t k = static_cast<std::size_t>(std::distance(vertices.begin(), it));
  k = std::clamp<std::size_t>(k, 1, vertices.size() - 1) - 1;
  const auto [xa, ya] = vertices[k];
  const auto [xb, yb] = vertices[k + 1];
  const double slope = (yb - ya) / (xb - xa);
  return {ya + slope * (x1 - xa), slope};
}

AssignmentRule::AssignmentRule(UnivariateThreshold rule) : rule_(rule) {
  if (!std::isfinite(rule.cutoff)) throw ConfigError("threshold cutoff must be finite");
}

AssignmentRule::AssignmentRule(HalfPlane rule) : rule_(std::move(rule)) {
  const auto& hp = std::get<HalfPlane>(rule_);
  if (hp.normal.empty()) throw DimensionError("half-plane normal must be non-empty");
  double norm2 = 0.0;
  for (double v : hp.normal) {
    if (!std::isfinite(v)) throw ConfigError("half-plane normal must be finite");
    norm2 += v * v;
  }
  if (norm2 == 0.0) throw ConfigError("half-plane normal must be non-zero");
  if (!std::isfinite(hp.offset)) throw ConfigError("half-plane offset must be finite");
}

AssignmentRule::AssignmentRule(CurveBoundary rule) : rule_(std::move(rule)) {
  const auto& curve = std::get<CurveBoundary>(rule_);
  if (curve.vertices.size() < 2) throw ConfigError("curve boundary needs at least two vertices");
  for (std::size_t k = 0; k < curve.vertices.size(); ++k) {
    const auto [a, b] = curve.vertices[k];
    if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError("curve vertex must be finite");
    if (k > 0 && !(a > curve.vertices[k - 1].first)) {
      throw ConfigError("curve vertices must be strictly increasing in the first coordinate");
    }
  }
}

std::size_t AssignmentRule::dim() const noexcept {
  return std::visit(
      [](const auto& r) -> std::size_t {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, UnivariateThreshold>) return 1;
        else if constexpr (std::is_same_v<T, HalfPlane>) return r.normal.size();
        else return 2;
      },
      rule_);
}

std::vector<double> AssignmentRule::inward_normal(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("inward_normal: dimension mismatch");
  return std::visit(
      [&](const auto& r) -> std::vector<double> {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, UnivariateThreshold>) {
          return {1.0};
        } else if constexpr (std::is_same_v<T, HalfPlane>) {
          double norm2 = 0.0;
          for (double v : r.normal) norm2 += v * v;
          const double inv = 1.0 / std::sqrt(norm2);
          std::vector<double> n(r.normal);
          for (double& v : n) v *= inv;
          return n;
        } else {
          const double slope = r.height_and_slope(x[0]).second;
          const double inv = 1.0 / std::sqrt(1.0 + slope * slope);
          // (-slope, 1) points above the curve.
          const double sign = r.treated_side == TreatedSide::kAbove ? 1.0 : -1.0;
          return {-slope * inv * sign, inv * sign};
        }
      },
      rule_);
}

AssignmentRule AssignmentRule::negated() const {
  return std::visit(
      [](const auto& r) -> AssignmentRule {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, UnivariateThreshold>) {
          return HalfPlane{{-1.0}, -r.cutoff};
        } else if constexpr (std::is_same_v<T, HalfPlane>) {
          HalfPlane flipped = r;
          for (double& v : flipped.normal) v = -v;
          flipped.offset = -flipped.offset;
          return flipped;
        } else {
          CurveBoundary flipped = r;
          flipped.treated_side =
              r.treated_side == TreatedSide::kBelow ? TreatedSide::kAbove : TreatedSide::kBelow;
          return flipped;
        }
      },
      rule_);
}

int assign(const AssignmentRule& rule, std::span<const double> x) {
  if (x.size() != rule.dim()) {
    throw DimensionError("assign: score has dimension " + std::to_string(x.size()) +
                         ", rule expects " + std::to_string(rule.dim()));
  }
  return std::visit(
      [&](const auto& r) -> int {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, UnivariateThreshold>) {
          return x[0] >= r.cutoff ? 1 : 0;
        } else if constexpr (std::is_same_v<T, HalfPlane>) {
          double dot = 0.0;
          for (std::size_t j = 0; j < x.size(); ++j) dot += r.normal[j] * x[j];
          return dot >= r.offset ? 1 : 0;
        } else {
          const double g = r.height_and_slope(x[0]).first;
          return (r.treated_side == TreatedSide::kBelow ? x[1] <= g : x[1] >= g) ? 1 : 0;
        }
      },
      rule.variant());
}

bool probe_boundary(const AssignmentRule& rule, const ScorePoint& x, std::span<const double> radii,
                    std::size_t probes_per_radius, std::uint64_t seed) {
  if (radii.empty()) throw ConfigError("probe_boundary: empty radius list");
  if (x.dim() != rule.dim()) throw DimensionError("probe_boundary: dimension mismatch");
  for (double r : radii) {
    if (!(r > 0.0)) throw ConfigError("probe_boundary: radii must be positive");
  }
  Rng rng(seed);
  const std::size_t d = x.dim();
  std::vector<double> probe(d);
  for (double r : radii) {
    bool seen[2] = {false, false};
    for (std::size_t k = 0; k < probes_per_radius; ++k) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        probe[j] = rng.normal();
        norm2 += probe[j] * probe[j];
      }
      const double scale = r * std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) /
                           std::sqrt(norm2);
      for (std::size_t j = 0; j < d; ++j) probe[j] = x[j] + probe[j] * scale;
      seen[assign(rule, probe)] = true;
      if (seen[0] && seen[1]) break;
    }
    if (!(seen[0] && seen[1])) return false;
  }
  return true;
}

bool probe_boundary(const AssignmentRule& rule, const ScorePoint& x) {
  const double scale = std::max(1.0, x.magnitude());
  const std::array<double, 3> radii = {1e-1 * scale, 1e-2 * scale, 1e-3 * scale};
  return probe_boundary(rule, x, radii, 64, 0x5eedb0de5eedb0deULL);
}

BoundaryPoint::BoundaryPoint(ScorePoint point, AssignmentRule rule)
    : point_(std::move(point)), rule_(std::move(rule)) {
  if (point_.dim() != rule_.dim()) throw DimensionError("BoundaryPoint: dimension mismatch");
  if (!probe_boundary(rule_, point_)) {
    throw BoundaryError("point is not on the treatment boundary of the rule");
  }
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<LabeledSample> rows, std::optional<AssignmentRule> rule)
    : dim_(rows.empty() ? 0 : rows.front().x.dim()), rule_(std::move(rule)) {
  if (rows.empty()) throw ConfigError("Dataset: at least one row is required");
  y_.reserve(rows.size());
  x_.reserve(rows.size() * dim_);
  d_.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.x.dim() != dim_) throw DimensionError("Dataset: rows have differing dimensions");
    y_.push_back(row.y);
    x_.insert(x_.end(), row.x.coords().begin(), row.x.coords().end());
    d_.push_back(static_cast<std::uint8_t>(row.d));
  }
  validate();
}

Dataset::Dataset(std::size_t dim, std::vector<double> y, std::vector<double> x,
                 std::vector<std::uint8_t> d, std::optional<AssignmentRule> rule)
    : dim_(dim), y_(std::move(y)), x_(std::move(x)), d_(std::move(d)), rule_(std::move(rule)) {
  validate();
}

void Dataset::validate() const {
  if (dim_ == 0) throw DimensionError("Dataset: dimension must be at least 1");
  if (y_.empty()) throw ConfigError("Dataset: at least one row is required");
  if (x_.size() != y_.size() * dim_ || d_.size() != y_.size()) {
    throw DimensionError("Dataset: column lengths disagree");
  }
  for (double v : x_) {
    if (!std::isfinite(v)) throw DomainError("Dataset: non-finite score");
  }
  for (std::uint8_t v : d_) {
    if (v > 1) throw ConfigError("Dataset: treatment labels must be 0 or 1");
  }
  if (rule_) {
    if (rule_->dim() != dim_) throw DimensionError("Dataset: rule dimension mismatch");
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (assign(*rule_, point(i)) != d_[i]) {
        throw ConfigError("Dataset: row " + std::to_string(i) +
                          " has a treatment label that disagrees with the rule");
      }
    }
  }
}

LabeledSample Dataset::row(std::size_t i) const {
  return {y_[i], ScorePoint(std::vector<double>(point(i).begin(), point(i).end())), d_[i]};
}

std::pair<Dataset, Dataset> split_by_treatment(const Dataset& data, const AssignmentRule& rule) {
  if (rule.dim() != data.dim()) throw DimensionError("split_by_treatment: dimension mismatch");
  std::vector<double> y[2], x[2];
  std::vector<std::uint8_t> d[2];
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int side = assign(rule, data.point(i));
    y[side].push_back(data.y(i));
    x[side].insert(x[side].end(), data.point(i).begin(), data.point(i).end());
    d[side].push_back(static_cast<std::uint8_t>(side));
  }
  if (y[1].empty()) throw EmptySideError("no treated observations");
  if (y[0].empty()) throw EmptySideError("no control observations");
  return {Dataset(data.dim(), std::move(y[1]), std::move(x[1]), std::move(d[1]), rule),
          Dataset(data.dim(), std::move(y[0]), std::move(x[0]), std::move(d[0]), rule)};
}

// ---------------------------------------------------------------------------
// EstimateReport

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 * (1.0 + level));
}

EstimateReport EstimateReport::make(double estimate, double std_error, double level,
                                    std::size_t n_treated, std::size_t n_control) {
  if (!(std_error >= 0.0)) throw NumericalError("standard error must be non-negative");
  const double z = normal_critical_value(level);
  return {estimate, std_error, level, estimate - z * std_error, estimate + z * std_error,
          n_treated, n_control};
}

}  // namespace rdforest
