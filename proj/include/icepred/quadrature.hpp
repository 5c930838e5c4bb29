#pragma once

#include <vector>

namespace icepred {

/// Gauss-Legendre rule on the unit interval [0, 1].
struct QuadratureRule {
  std::vector<double> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }

  /// n-point rule; exact for polynomials of degree 2n - 1.
  static QuadratureRule gauss(int n);
};

/// Tensor-product rule on the unit square, point i = ix + n * iz.
struct QuadratureRule2D {
  std::vector<double> xi;
  std::vector<double> zeta;
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }

  static QuadratureRule2D tensor(const QuadratureRule& rule);
};

/// Lagrange polynomials of degree k, by default through equispaced nodes j / k on [0, 1].
class LagrangeBasis1D {
 public:
  explicit LagrangeBasis1D(int degree);
  /// Interpolating basis through arbitrary distinct nodes; one node gives the constant.
  explicit LagrangeBasis1D(std::vector<double> nodes);

  int degree() const { return degree_; }
  int size() const { return degree_ + 1; }
  double node(int j) const { return nodes_[j]; }

  double value(int j, double t) const;
  double derivative(int j, double t) const;

 private:
  int degree_;
  std::vector<double> nodes_;
};

}  // namespace icepred
