#pragma once

// Primal active-set solver for the minimum-norm problem
//
//     minimize ||x||^2   subject to   E x = e,   G x >= g.
//
// The objective is strictly convex, so the minimizer is unique. Each
// working-set subproblem is the projection of the origin onto an affine set,
// solved with a rank-revealing complete orthogonal decomposition.

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace fjlab {

struct MinNormQp {
  Eigen::MatrixXd eq;    // E
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ineq;  // G
  Eigen::VectorXd ineq_rhs;
};

struct QpResult {
  Eigen::VectorXd x;
  bool converged = false;
  int iterations = 0;
};

class MinNormQpSolver {
 public:
  explicit MinNormQpSolver(double tol = 1e-9) : tol_(tol) {}

  // x0 must be feasible. The iteration cap follows the problem size.
  QpResult solve(const MinNormQp& qp, const Eigen::VectorXd& x0) const {
    const int n = static_cast<int>(x0.size());
    const int n_eq = static_cast<int>(qp.eq.rows());
    const int n_in = static_cast<int>(qp.ineq.rows());
    if ((n_eq > 0 && qp.eq.cols() != n) || (n_in > 0 && qp.ineq.cols() != n)) {
      throw std::invalid_argument("qp: inconsistent dimensions");
    }

    QpResult out;
    out.x = x0;
    std::vector<bool> active(n_in, false);
    for (int r = 0; r < n_in; ++r) {
      active[r] = qp.ineq.row(r).dot(x0) - qp.ineq_rhs(r) <= tol_;
    }

    const int max_iter = 10 * (n + n_eq + n_in) + 20;
    for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
      // Assemble the working set: all equalities plus active inequalities.
      std::vector<int> work;
      for (int r = 0; r < n_in; ++r) {
        if (active[r]) work.push_back(r);
      }
      const int mw = n_eq + static_cast<int>(work.size());
      Eigen::MatrixXd a(mw, n);
      Eigen::VectorXd b(mw);
      if (n_eq > 0) {
        a.topRows(n_eq) = qp.eq;
        b.head(n_eq) = qp.eq_rhs;
      }
      for (int idx = 0; idx < static_cast<int>(work.size()); ++idx) {
        a.row(n_eq + idx) = qp.ineq.row(work[idx]);
        b(n_eq + idx) = qp.ineq_rhs(work[idx]);
      }

      Eigen::VectorXd target;
      if (mw == 0) {
        target = Eigen::VectorXd::Zero(n);
      } else {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
        target = cod.solve(b);  // least-norm point of the working-set affine set
      }

      const Eigen::VectorXd step = target - out.x;
      if (step.lpNorm<Eigen::Infinity>() <= tol_) {
        // Stationary on the working set; check multiplier signs. With
        // gradient 2x, the multipliers solve A^T lambda = 2x in least-norm
        // sense.
        if (work.empty()) {
          out.converged = true;
          return out;
        }
        Eigen::MatrixXd at = a.transpose();
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(at);
        Eigen::VectorXd lambda = cod.solve(2.0 * out.x);
        int drop = -1;
        double most_negative = -tol_;
        for (int idx = 0; idx < static_cast<int>(work.size()); ++idx) {
          const double l = lambda(n_eq + idx);
          if (l < most_negative) {
            most_negative = l;
            drop = work[idx];
          }
        }
        if (drop < 0) {
          out.converged = true;
          return out;
        }
        active[drop] = false;
        continue;
      }

      // Step toward the subproblem minimizer, stopping at the first blocking
      // inactive inequality.
      double alpha = 1.0;
      int blocker = -1;
      for (int r = 0; r < n_in; ++r) {
        if (active[r]) continue;
        const double d = qp.ineq.row(r).dot(step);
        if (d < -tol_) {
          const double slack = qp.ineq.row(r).dot(out.x) - qp.ineq_rhs(r);
          const double ratio = std::max(0.0, -slack / d);
          if (ratio < alpha) {
            alpha = ratio;
            blocker = r;
          }
        }
      }
      out.x += alpha * step;
      if (blocker >= 0) active[blocker] = true;
    }
    return out;  // converged == false: iteration cap reached
  }

 private:
  double tol_;
};

}  // namespace fjlab
