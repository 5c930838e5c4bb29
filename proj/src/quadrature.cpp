#include "icepred/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "icepred/errors.hpp"

namespace icepred {

QuadratureRule QuadratureRule::gauss(int n) {
  if (n < 1) throw InvalidArgument("quadrature rule needs at least one point");
  QuadratureRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  // Newton iteration on P_n starting from the Chebyshev-like guesses.
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int m = 2; m <= n; ++m) {
        const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
      }
      const double pn = (n == 1) ? x : p1;
      const double pnm1 = (n == 1) ? 1.0 : p0;
      dp = n * (x * pn - pnm1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at converged root
    double p0 = 1.0, p1 = x;
    for (int m = 2; m <= n; ++m) {
      const double p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
      p0 = p1;
      p1 = p2;
    }
    const double pn = (n == 1) ? x : p1;
    const double pnm1 = (n == 1) ? 1.0 : p0;
    dp = n * (x * pn - pnm1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1, 1] -> [0, 1], ascending order
    rule.points[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

QuadratureRule2D QuadratureRule2D::tensor(const QuadratureRule& rule) {
  QuadratureRule2D out;
  const int n = rule.size();
  for (int iz = 0; iz < n; ++iz) {
    for (int ix = 0; ix < n; ++ix) {
      out.xi.push_back(rule.points[ix]);
      out.zeta.push_back(rule.points[iz]);
      out.weights.push_back(rule.weights[ix] * rule.weights[iz]);
    }
  }
  return out;
}

LagrangeBasis1D::LagrangeBasis1D(int degree) : degree_(degree) {
  if (degree < 1) throw InvalidArgument("Lagrange basis degree must be >= 1");
  nodes_.resize(degree + 1);
  for (int j = 0; j <= degree; ++j) nodes_[j] = static_cast<double>(j) / degree;
}

LagrangeBasis1D::LagrangeBasis1D(std::vector<double> nodes)
    : degree_(static_cast<int>(nodes.size()) - 1), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InvalidArgument("Lagrange basis needs at least one node");
}

double LagrangeBasis1D::value(int j, double t) const {
  double v = 1.0;
  for (int m = 0; m <= degree_; ++m) {
    if (m == j) continue;
    v *= (t - nodes_[m]) / (nodes_[j] - nodes_[m]);
  }
  return v;
}

double LagrangeBasis1D::derivative(int j, double t) const {
  double sum = 0.0;
  for (int l = 0; l <= degree_; ++l) {
    if (l == j) continue;
    double prod = 1.0 / (nodes_[j] - nodes_[l]);
    for (int m = 0; m <= degree_; ++m) {
      if (m == j || m == l) continue;
      prod *= (t - nodes_[m]) / (nodes_[j] - nodes_[m]);
    }
    sum += prod;
  }
  return sum;
}

}  // namespace icepred
