#pragma once

// Workload-splitting optimization layer. For a parameter vector
// b = (q_k per dedicated server, w_i per shared server), solve_lp computes
//
//   z(b) = min sum_j h_j y_j
//          s.t. y_j >= q_k            (k in K_j)
//               y_j >= q_ij           (i in I_j)
//               sum_{j in J_i} q_ij / mu_ij = w_i
//               q_ij >= 0
//
// and select_solution picks the optimal split of smallest Euclidean norm by
// solving the quadratic selection problem over the LP's optimal face. The
// selected solution is unique and Lipschitz in b, which is what makes it
// usable as a tracking target over time.

#include <Eigen/Dense>

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjlab/qp.hpp"
#include "fjlab/simplex.hpp"
#include "fjlab/topology.hpp"

namespace fjlab {

struct LpInstance {
  const NetworkTopology* topo = nullptr;
  Eigen::VectorXd b;  // [q_k for k in global order, w_i ascending]

  double dedicated_backlog(int k) const { return b(k); }
  double workload(int i) const { return b(topo->dedicated_count() + i); }

  void check() const {
    if (topo == nullptr) throw std::invalid_argument("LpInstance without topology");
    if (b.size() != topo->b_dim()) throw std::invalid_argument("LpInstance: b has wrong dimension");
    for (int idx = 0; idx < b.size(); ++idx) {
      if (b(idx) < 0.0) throw std::invalid_argument("LpInstance: b must be componentwise nonnegative");
    }
  }
};

struct LpSolution {
  enum class Status { optimal, numerical_failure };
  Status status = Status::optimal;
  Eigen::VectorXd y;  // per type
  Eigen::VectorXd q;  // per shared class, flat index
  double value = 0.0;
};

class Optimizer {
 public:
  explicit Optimizer(double tol = 1e-9) : tol_(tol), simplex_(tol), qp_(tol) {}

  // Effective lower bound for y_j: the largest dedicated backlog of type j
  // (zero when there is none; y_j >= 0 is implied by the other constraints).
  static double y_floor(const LpInstance& inst, int j) {
    double floor_j = 0.0;
    for (int k : inst.topo->dedicated_of(j)) {
      floor_j = std::max(floor_j, inst.dedicated_backlog(k));
    }
    return floor_j;
  }

  LpSolution solve_lp(const LpInstance& inst) const {
    inst.check();
    const NetworkTopology& topo = *inst.topo;
    const int J = topo.type_count();
    const int P = topo.class_count();
    const int I = topo.shared_count();

    // Shift y_j by its floor so every variable is nonnegative:
    //   vars = [y'_j, q_c],  y_j = y'_j + floor_j.
    // Rows: q_c - y'_j <= floor_j for each class, then the workload
    // equalities.
    LinearProgram lp;
    const int n = J + P;
    const int m = P + I;
    lp.coeff = Eigen::MatrixXd::Zero(m, n);
    lp.rhs = Eigen::VectorXd::Zero(m);
    lp.cost = Eigen::VectorXd::Zero(n);
    lp.relation.assign(m, Relation::le);
    for (int j = 0; j < J; ++j) lp.cost(j) = topo.holding_cost[j];
    for (int c = 0; c < P; ++c) {
      const int j = topo.class_type(c);
      lp.coeff(c, J + c) = 1.0;
      lp.coeff(c, j) = -1.0;
      lp.rhs(c) = y_floor(inst, j);
    }
    for (int i = 0; i < I; ++i) {
      const int row = P + i;
      for (int c : topo.classes_of_server(i)) {
        lp.coeff(row, J + c) = 1.0 / topo.class_service(c).rate;
      }
      lp.rhs(row) = inst.workload(i);
      lp.relation[row] = Relation::eq;
    }

    const SimplexResult res = simplex_.solve(lp);
    LpSolution out;
    if (res.status != SimplexResult::Status::optimal) {
      out.status = LpSolution::Status::numerical_failure;
      return out;
    }
    out.y.resize(J);
    out.q.resize(P);
    for (int j = 0; j < J; ++j) out.y(j) = res.x(j) + y_floor(inst, j);
    for (int c = 0; c < P; ++c) out.q(c) = res.x(J + c);
    out.value = 0.0;
    for (int j = 0; j < J; ++j) out.value += topo.holding_cost[j] * out.y(j);
    return out;
  }

  double value_z(const LpInstance& inst) const {
    const LpSolution sol = solve_lp(inst);
    if (sol.status != LpSolution::Status::optimal) {
      throw std::runtime_error("LP solve failed");
    }
    return sol.value;
  }

  // Minimum-norm optimal solution (unique). The value constraint carries a
  // 1e-9 slack so floating-point in z never empties the feasible set.
  LpSolution select_solution(const LpInstance& inst) const {
    const LpSolution lp_sol = solve_lp(inst);
    if (lp_sol.status != LpSolution::Status::optimal) return lp_sol;
    return select_solution(inst, lp_sol);
  }

  LpSolution select_solution(const LpInstance& inst, const LpSolution& lp_sol) const {
    inst.check();
    const NetworkTopology& topo = *inst.topo;
    const int J = topo.type_count();
    const int P = topo.class_count();
    const int I = topo.shared_count();
    const int n = J + P;

    MinNormQp qp;
    qp.eq = Eigen::MatrixXd::Zero(I, n);
    qp.eq_rhs = Eigen::VectorXd::Zero(I);
    for (int i = 0; i < I; ++i) {
      for (int c : topo.classes_of_server(i)) {
        qp.eq(i, J + c) = 1.0 / topo.class_service(c).rate;
      }
      qp.eq_rhs(i) = inst.workload(i);
    }
    // Rows: y_j >= floor_j, y_j - q_c >= 0, q_c >= 0, -sum h_j y_j >= -(z + slack).
    const int n_in = J + 2 * P + 1;
    qp.ineq = Eigen::MatrixXd::Zero(n_in, n);
    qp.ineq_rhs = Eigen::VectorXd::Zero(n_in);
    for (int j = 0; j < J; ++j) {
      qp.ineq(j, j) = 1.0;
      qp.ineq_rhs(j) = y_floor(inst, j);
    }
    for (int c = 0; c < P; ++c) {
      qp.ineq(J + c, topo.class_type(c)) = 1.0;
      qp.ineq(J + c, J + c) = -1.0;
      qp.ineq(J + P + c, J + c) = 1.0;
    }
    for (int j = 0; j < J; ++j) qp.ineq(J + 2 * P, j) = -topo.holding_cost[j];
    qp.ineq_rhs(J + 2 * P) = -(lp_sol.value + 1e-9);

    Eigen::VectorXd x0(n);
    x0.head(J) = lp_sol.y;
    x0.tail(P) = lp_sol.q.cwiseMax(0.0);

    const QpResult res = qp_.solve(qp, x0);
    LpSolution out;
    if (!res.converged) {
      out.status = LpSolution::Status::numerical_failure;
      return out;
    }
    out.y = res.x.head(J);
    out.q = res.x.tail(P);
    out.value = 0.0;
    for (int j = 0; j < J; ++j) out.value += topo.holding_cost[j] * out.y(j);
    return out;
  }

  // Constraint residuals of a candidate solution; the largest violation of
  // the LP system (used by tests and the self-checks).
  double feasibility_error(const LpInstance& inst, const LpSolution& sol) const {
    const NetworkTopology& topo = *inst.topo;
    double err = 0.0;
    for (int j = 0; j < topo.type_count(); ++j) {
      err = std::max(err, y_floor(inst, j) - sol.y(j));
    }
    for (int c = 0; c < topo.class_count(); ++c) {
      err = std::max(err, sol.q(c) - sol.y(topo.class_type(c)));
      err = std::max(err, -sol.q(c));
    }
    for (int i = 0; i < topo.shared_count(); ++i) {
      double load = 0.0;
      for (int c : topo.classes_of_server(i)) {
        load += sol.q(c) / topo.class_service(c).rate;
      }
      err = std::max(err, std::abs(load - inst.workload(i)));
    }
    return err;
  }

 private:
  double tol_;
  SimplexSolver simplex_;
  MinNormQpSolver qp_;
};

// One CSV row per solved instance for offline diffing: the b vector, the
// selected solution and its value.
inline std::string debug_csv_row(const LpInstance& inst, const LpSolution& sol) {
  std::string row;
  auto append = [&row](double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    if (!row.empty()) row += ',';
    row += buf;
  };
  for (int idx = 0; idx < inst.b.size(); ++idx) append(inst.b(idx));
  for (int j = 0; j < sol.y.size(); ++j) append(sol.y(j));
  for (int c = 0; c < sol.q.size(); ++c) append(sol.q(c));
  append(sol.value);
  return row;
}

struct LipschitzProbeResult {
  double z_ratio = 0.0;
  double q_ratio = 0.0;
  int pairs_used = 0;
};

// Empirical difference quotients of z and of the selected solution map over
// parameter pairs sharing one topology. Zero-distance pairs are skipped.
inline LipschitzProbeResult lipschitz_probe(
    const NetworkTopology& topo,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs) {
  Optimizer opt;
  LipschitzProbeResult out;
  for (const auto& [b1, b2] : pairs) {
    const double dist = (b1 - b2).lpNorm<Eigen::Infinity>();
    if (dist <= 0.0) continue;
    LpInstance i1{&topo, b1};
    LpInstance i2{&topo, b2};
    const LpSolution s1 = opt.select_solution(i1);
    const LpSolution s2 = opt.select_solution(i2);
    if (s1.status != LpSolution::Status::optimal ||
        s2.status != LpSolution::Status::optimal) {
      throw std::runtime_error("lipschitz_probe: solver failure");
    }
    out.z_ratio = std::max(out.z_ratio, std::abs(s1.value - s2.value) / dist);
    out.q_ratio = std::max(out.q_ratio, (s1.q - s2.q).lpNorm<Eigen::Infinity>() / dist);
    ++out.pairs_used;
  }
  return out;
}

}  // namespace fjlab
