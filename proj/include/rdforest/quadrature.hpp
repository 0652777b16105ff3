#pragma once

#include <cstddef>
#include <vector>

namespace rdforest {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point rule, nodes found by Newton iteration on P_n. Exact for
/// polynomials of degree 2n - 1.
GaussLegendreRule gauss_legendre(std::size_t n);

/// Integral of f over [a, b] under `rule`.
template <class F>
double integrate(F&& f, double a, double b, const GaussLegendreRule& rule) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return acc * half;
}

}  // namespace rdforest
