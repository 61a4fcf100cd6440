#pragma once

// Dense two-phase primal simplex for small LPs, Bland's rule throughout.
// Instances in this project have at most a few dozen variables, so a plain
// tableau with full artificial-variable phase 1 is the robust choice.

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace fjlab {

enum class Relation : char { le = 'L', eq = 'E' };

struct LinearProgram {
  // minimize cost . x  subject to  A x (<= | =) rhs,  x >= 0
  Eigen::MatrixXd coeff;
  Eigen::VectorXd rhs;
  Eigen::VectorXd cost;
  std::vector<Relation> relation;
};

struct SimplexResult {
  enum class Status { optimal, infeasible, iteration_limit };
  Status status = Status::optimal;
  Eigen::VectorXd x;
  double value = 0.0;
};

class SimplexSolver {
 public:
  explicit SimplexSolver(double tol = 1e-9) : tol_(tol) {}

  SimplexResult solve(const LinearProgram& lp) const {
    const int m = static_cast<int>(lp.coeff.rows());
    const int n = static_cast<int>(lp.coeff.cols());
    if (lp.rhs.size() != m || lp.cost.size() != n ||
        static_cast<int>(lp.relation.size()) != m) {
      throw std::invalid_argument("simplex: inconsistent problem dimensions");
    }

    // Canonical rows with nonnegative right-hand sides. A flipped <= row
    // becomes >= and needs a surplus column plus an artificial.
    enum RowForm { row_le, row_ge, row_eq };
    std::vector<RowForm> form(m);
    Eigen::MatrixXd a = lp.coeff;
    Eigen::VectorXd b = lp.rhs;
    for (int r = 0; r < m; ++r) {
      const bool flip = b(r) < 0.0;
      if (flip) {
        a.row(r) = -a.row(r);
        b(r) = -b(r);
      }
      if (lp.relation[r] == Relation::eq) {
        form[r] = row_eq;
      } else {
        form[r] = flip ? row_ge : row_le;
      }
    }

    int n_slack = 0;
    int n_art = 0;
    for (int r = 0; r < m; ++r) {
      if (form[r] != row_eq) ++n_slack;
      if (form[r] != row_le) ++n_art;
    }
    const int cols = n + n_slack + n_art;

    // Tableau with an extra RHS column; basis_ holds the basic column of
    // each row.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, cols + 1);
    std::vector<int> basis(m, -1);
    t.block(0, 0, m, n) = a;
    t.col(cols) = b;
    int slack_at = n;
    int art_at = n + n_slack;
    for (int r = 0; r < m; ++r) {
      if (form[r] == row_le) {
        t(r, slack_at) = 1.0;
        basis[r] = slack_at++;
      } else if (form[r] == row_ge) {
        t(r, slack_at++) = -1.0;
        t(r, art_at) = 1.0;
        basis[r] = art_at++;
      } else {
        t(r, art_at) = 1.0;
        basis[r] = art_at++;
      }
    }

    SimplexResult out;
    if (n_art > 0) {
      Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
      phase1.segment(n + n_slack, n_art).setOnes();
      if (!run_phase(t, basis, phase1, cols, /*forbid_from=*/cols)) {
        out.status = SimplexResult::Status::iteration_limit;
        return out;
      }
      double art_value = 0.0;
      for (int r = 0; r < m; ++r) {
        if (basis[r] >= n + n_slack) art_value += t(r, cols);
      }
      if (art_value > 1e-7) {
        out.status = SimplexResult::Status::infeasible;
        return out;
      }
      // Pivot remaining artificials out of the basis where possible; a row
      // with no eligible pivot is redundant and is neutralized.
      for (int r = 0; r < m; ++r) {
        if (basis[r] < n + n_slack) continue;
        int enter = -1;
        for (int ccol = 0; ccol < n + n_slack; ++ccol) {
          if (std::abs(t(r, ccol)) > tol_) {
            enter = ccol;
            break;
          }
        }
        if (enter >= 0) {
          pivot(t, basis, r, enter);
        } else {
          t.row(r).setZero();
        }
      }
    }

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
    phase2.head(n) = lp.cost;
    if (!run_phase(t, basis, phase2, cols, /*forbid_from=*/n + n_slack)) {
      out.status = SimplexResult::Status::iteration_limit;
      return out;
    }

    out.x = Eigen::VectorXd::Zero(n);
    for (int r = 0; r < m; ++r) {
      if (basis[r] >= 0 && basis[r] < n) out.x(basis[r]) = t(r, cols);
    }
    out.value = lp.cost.dot(out.x);
    out.status = SimplexResult::Status::optimal;
    return out;
  }

 private:
  void pivot(Eigen::MatrixXd& t, std::vector<int>& basis, int row, int col) const {
    t.row(row) /= t(row, col);
    for (int r = 0; r < t.rows(); ++r) {
      if (r == row) continue;
      const double f = t(r, col);
      if (std::abs(f) > 0.0) t.row(r) -= f * t.row(row);
    }
    basis[row] = col;
  }

  // Minimizes cost over the current tableau. Columns >= forbid_from may not
  // enter the basis (used to lock artificials out in phase 2). Bland's rule:
  // lowest-index entering and leaving columns, which precludes cycling.
  bool run_phase(Eigen::MatrixXd& t, std::vector<int>& basis,
                 const Eigen::VectorXd& cost, int cols, int forbid_from) const {
    const int m = static_cast<int>(t.rows());
    // Reduced costs maintained as a dense row.
    Eigen::RowVectorXd red = Eigen::RowVectorXd::Zero(cols + 1);
    red.head(cols) = cost.transpose();
    for (int r = 0; r < m; ++r) {
      if (basis[r] >= 0 && std::abs(cost(basis[r])) > 0.0) {
        red -= cost(basis[r]) * t.row(r);
      }
    }
    const long max_iter = 2000L + 200L * static_cast<long>(cols);
    for (long iter = 0; iter < max_iter; ++iter) {
      int enter = -1;
      for (int c = 0; c < cols && enter < 0; ++c) {
        if (c >= forbid_from) break;
        if (red(c) < -tol_) enter = c;
      }
      if (enter < 0) return true;
      int leave = -1;
      double best_ratio = 0.0;
      for (int r = 0; r < m; ++r) {
        if (t(r, enter) > tol_) {
          const double ratio = t(r, cols) / t(r, enter);
          if (leave < 0 || ratio < best_ratio - tol_ ||
              (ratio < best_ratio + tol_ && basis[r] < basis[leave])) {
            leave = r;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) return true;  // unbounded direction; cannot occur here
      pivot(t, basis, leave, enter);
      red -= red(enter) * t.row(leave);
    }
    return false;
  }

  double tol_;
};

}  // namespace fjlab
