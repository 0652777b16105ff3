#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace rdforest {

/// A d-dimensional running variable. Coordinates are raw score units.
class ScorePoint {
 public:
  /// Throws DimensionError on an empty coordinate list and DomainError on a
  /// non-finite coordinate.
  explicit ScorePoint(std::vector<double> coords);
  ScorePoint(std::initializer_list<double> coords)
      : ScorePoint(std::vector<double>(coords)) {}

  std::size_t dim() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const noexcept { return coords_; }

  /// Largest absolute coordinate.
  double magnitude() const noexcept;

  friend bool operator==(const ScorePoint&, const ScorePoint&) = default;

 private:
  std::vector<double> coords_;
};

enum class TreatedSide { kBelow, kAbove };

/// Treated iff x >= cutoff.
struct UnivariateThreshold {
  double cutoff = 0.0;
};

/// Treated iff <normal, x> >= offset.
struct HalfPlane {
  std::vector<double> normal;
  double offset = 0.0;
};

/// Two-dimensional boundary given as the graph x2 = g(x1) of a polyline.
/// Outside the vertex range the first/last segment is extended.
struct CurveBoundary {
  std::vector<std::pair<double, double>> vertices;
  TreatedSide treated_side = TreatedSide::kBelow;

  /// Curve height and slope of the governing segment at abscissa x1.
  std::pair<double, double> height_and_slope(double x1) const;
};

/// Sharp treatment assignment A: X -> {0, 1}. Validated on construction.
class AssignmentRule {
 public:
  using Variant = std::variant<UnivariateThreshold, HalfPlane, CurveBoundary>;

  AssignmentRule(UnivariateThreshold rule);  // NOLINT(google-explicit-constructor)
  AssignmentRule(HalfPlane rule);            // NOLINT(google-explicit-constructor)
  AssignmentRule(CurveBoundary rule);        // NOLINT(google-explicit-constructor)

  static AssignmentRule threshold(double cutoff) { return UnivariateThreshold{cutoff}; }

  std::size_t dim() const noexcept;
  const Variant& variant() const noexcept { return rule_; }

  /// Unit vector pointing from the control side into the treated side at
  /// (or nearest to) `x`.
  std::vector<double> inward_normal(std::span<const double> x) const;

  /// Rule with treated and control regions exchanged (up to the boundary
  /// itself, which stays treated). Curves flip their treated side;
  /// thresholds become half-planes.
  AssignmentRule negated() const;

 private:
  Variant rule_;
};

/// 1 iff x is in the treated region. Throws DimensionError on mismatch.
int assign(const AssignmentRule& rule, std::span<const double> x);
inline int assign(const AssignmentRule& rule, const ScorePoint& x) {
  return assign(rule, x.coords());
}

/// Randomized check that every probed ball around x holds both classes.
bool probe_boundary(const AssignmentRule& rule, const ScorePoint& x,
                    std::span<const double> radii, std::size_t probes_per_radius,
                    std::uint64_t seed);

/// Default probe: radii {1e-1, 1e-2, 1e-3} times max(1, |x|_inf), 64 probes.
bool probe_boundary(const AssignmentRule& rule, const ScorePoint& x);

/// A point on the treatment boundary. Construction runs the default probe
/// and throws BoundaryError when it fails.
class BoundaryPoint {
 public:
  BoundaryPoint(ScorePoint point, AssignmentRule rule);

  const ScorePoint& point() const noexcept { return point_; }
  const AssignmentRule& rule() const noexcept { return rule_; }

 private:
  ScorePoint point_;
  AssignmentRule rule_;
};

struct LabeledSample {
  double y = 0.0;
  ScorePoint x;
  int d = 0;
};

/// Rows of (y, x, d) sharing one dimension. Scores are stored row-major.
class Dataset {
 public:
  /// Throws ConfigError on n = 0, DimensionError on ragged rows, and
  /// ConfigError if a supplied rule disagrees with a row's label.
  Dataset(std::vector<LabeledSample> rows, std::optional<AssignmentRule> rule = std::nullopt);

  /// Columnar constructor; `x` is row-major with `dim` columns.
  Dataset(std::size_t dim, std::vector<double> y, std::vector<double> x, std::vector<std::uint8_t> d,
          std::optional<AssignmentRule> rule = std::nullopt);

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t dim() const noexcept { return dim_; }

  double y(std::size_t i) const { return y_[i]; }
  double x(std::size_t i, std::size_t j) const { return x_[i * dim_ + j]; }
  std::span<const double> point(std::size_t i) const { return {x_.data() + i * dim_, dim_}; }
  int treatment(std::size_t i) const { return d_[i]; }
  LabeledSample row(std::size_t i) const;

  std::span<const double> outcomes() const noexcept { return y_; }
  std::span<const double> scores() const noexcept { return x_; }
  std::span<const std::uint8_t> treatments() const noexcept { return d_; }
  const std::optional<AssignmentRule>& rule() const noexcept { return rule_; }

  /// Copy of this dataset with every outcome replaced by f(row index, y).
  template <class F>
  Dataset with_outcomes(F&& f) const {
    std::vector<double> y(y_);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(i, y[i]);
    return Dataset(dim_, std::move(y), x_, d_, rule_);
  }

 private:
  void validate() const;

  std::size_t dim_;
  std::vector<double> y_;
  std::vector<double> x_;
  std::vector<std::uint8_t> d_;
  std::optional<AssignmentRule> rule_;
};

/// Rows with assign = 1 (first) and assign = 0 (second), order preserved.
/// Throws EmptySideError when either side is empty.
std::pair<Dataset, Dataset> split_by_treatment(const Dataset& data, const AssignmentRule& rule);

/// Two-sided standard normal critical value: Phi^{-1}((1 + level) / 2).
double normal_critical_value(double level);

struct EstimateReport {
  double estimate = 0.0;
  double std_error = 0.0;
  double level = 0.95;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;

  /// Fills the interval from estimate, std_error, level.
  static EstimateReport make(double estimate, double std_error, double level, std::size_t n_treated,
                             std::size_t n_control);

  bool covers(double truth) const noexcept { return ci_lower <= truth && truth <= ci_upper; }
};

}  // namespace rdforest
