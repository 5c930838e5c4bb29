#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace icepred {

template <class Op, class Prec>
int fgmres(const Op& apply, const Prec& precondition, const Eigen::VectorXd& b, Eigen::VectorXd& x,
           double rel_tol, int max_iters, int restart, double* final_relres) {
  const double bnorm = b.norm();
  if (x.size() != b.size()) x = Eigen::VectorXd::Zero(b.size());
  if (bnorm == 0.0) {
    x.setZero();
    if (final_relres) *final_relres = 0.0;
    return 0;
  }
  int total = 0;
  double relres = 1.0;
  while (total < max_iters) {
    Eigen::VectorXd r = b - apply(x);
    double beta = r.norm();
    relres = beta / bnorm;
    if (relres <= rel_tol) break;
    const int m = std::min(restart, max_iters - total);
    std::vector<Eigen::VectorXd> V, Z;
    V.push_back(r / beta);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
    g[0] = beta;
    int j = 0;
    for (; j < m; ++j) {
      Z.push_back(precondition(V[j]));
      Eigen::VectorXd w = apply(Z[j]);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = w.dot(V[i]);
        w -= H(i, j) * V[i];
      }
      H(j + 1, j) = w.norm();
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double d = std::hypot(H(j, j), H(j + 1, j));
      cs[j] = H(j, j) / d;
      sn[j] = H(j + 1, j) / d;
      H(j, j) = d;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++total;
      relres = std::abs(g[j + 1]) / bnorm;
      if (relres <= rel_tol || H(j, j) == 0.0) {
        ++j;
        break;
      }
      if (w.norm() == 0.0) {
        ++j;
        break;
      }
      V.push_back(w / w.norm());
    }
    const Eigen::VectorXd y =
        H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    for (int i = 0; i < j; ++i) x += y[i] * Z[i];
    if (relres <= rel_tol) break;
  }
  if (final_relres) *final_relres = (b - apply(x)).norm() / bnorm;
  return total;
}

}  // namespace icepred
