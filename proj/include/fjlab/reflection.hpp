#pragma once

// One-dimensional Skorokhod reflection on discrete paths, Euler simulation of
// the limiting reflected Brownian motion, and the Monte Carlo lower-bound
// estimator built on top of them.
//
// The reflection matrix of the limit is diagonal, so each coordinate reflects
// independently: the reflected value is Phi(X) = X + Psi(X) with
// Psi(X)(t) = sup_{s<=t} (-X(s))^+, and the pushing process of coordinate k
// is Psi(X_k) scaled by 1/R_kk.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjlab/optimizer.hpp"
#include "fjlab/rng.hpp"
#include "fjlab/topology.hpp"

namespace fjlab {

struct ReflectedPath {
  std::vector<double> phi;
  std::vector<double> psi;
};

inline ReflectedPath reflect_1d(const std::vector<double>& x) {
  ReflectedPath out;
  out.phi.resize(x.size());
  out.psi.resize(x.size());
  double running = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    running = std::max(running, -x[n]);
    out.psi[n] = std::max(running, 0.0);
    out.phi[n] = x[n] + out.psi[n];
  }
  return out;
}

struct SrbmPath {
  std::vector<double> times;
  Eigen::MatrixXd w;  // dim x times, componentwise nonnegative
};

class SrbmSimulator {
 public:
  explicit SrbmSimulator(const DiffusionData& data) : data_(data) {
    const int n = data.dim();
    if (data.covariance.cwiseAbs().maxCoeff() == 0.0) {
      chol_ = Eigen::MatrixXd::Zero(n, n);
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(data.covariance);
      if (llt.info() != Eigen::Success) {
        throw std::runtime_error("SRBM covariance is not positive definite");
      }
      chol_ = llt.matrixL();
    }
  }

  const DiffusionData& data() const { return data_; }

  // Free Brownian path with drift, X(0) = 0, on the grid {0, dt, ..., n dt}.
  Eigen::MatrixXd free_path(double horizon, double dt, RandomStream& stream) const {
    if (dt <= 0.0) throw std::invalid_argument("srbm: dt must be positive");
    const int dim = data_.dim();
    const int steps = static_cast<int>(std::llround(horizon / dt));
    Eigen::MatrixXd x(dim, steps + 1);
    x.col(0).setZero();
    const double sqrt_dt = std::sqrt(dt);
    Eigen::VectorXd z(dim);
    for (int n = 1; n <= steps; ++n) {
      for (int d = 0; d < dim; ++d) z(d) = stream.next_normal();
      x.col(n) = x.col(n - 1) + data_.drift * dt + sqrt_dt * (chol_ * z);
    }
    return x;
  }

  // Reflect every coordinate of a free path, reading every stride-th column.
  // stride 2 reproduces the Euler scheme at twice the step from the same
  // Brownian increments.
  static Eigen::MatrixXd reflect(const Eigen::MatrixXd& free, int stride = 1) {
    const int dim = static_cast<int>(free.rows());
    const int cols = (static_cast<int>(free.cols()) - 1) / stride + 1;
    Eigen::MatrixXd w(dim, cols);
    for (int d = 0; d < dim; ++d) {
      double running = 0.0;
      for (int n = 0; n < cols; ++n) {
        const double value = free(d, n * stride);
        running = std::max(running, -value);
        w(d, n) = value + std::max(running, 0.0);
      }
    }
    return w;
  }

  SrbmPath simulate(double horizon, double dt, RandomStream& stream) const {
    SrbmPath out;
    const Eigen::MatrixXd x = free_path(horizon, dt, stream);
    out.w = reflect(x);
    out.times.resize(x.cols());
    for (int n = 0; n < x.cols(); ++n) out.times[n] = n * dt;
    return out;
  }

 private:
  DiffusionData data_;
  Eigen::MatrixXd chol_;
};

// Maps an SRBM state to the LP parameter vector: heavy dedicated coordinates
// land on their q_k entries, shared coordinates on w_i, light dedicated
// servers contribute zero.
inline Eigen::VectorXd srbm_to_b(const DiffusionData& data, const NetworkTopology& topo,
                                 const Eigen::VectorXd& w) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(topo.b_dim());
  for (int d = 0; d < data.dim(); ++d) {
    const auto& coord = data.coords[d];
    const int at = coord.is_shared ? topo.dedicated_count() + coord.index : coord.index;
    b(at) = std::max(0.0, w(d));
  }
  return b;
}

struct LowerBoundEstimate {
  std::vector<double> times;
  std::vector<double> mean;   // E[z] per time
  std::vector<double> se;
  std::vector<std::pair<double, double>> exceedance;  // (epsilon, P(z > eps)) at times.back()
  long long paths = 0;
  long long failures = 0;
};

// Monte Carlo estimate of E[z(Q(t), W(t))] for the limiting SRBM at each
// requested time, plus the exceedance curve at the last time. Times must lie
// on the dt grid.
inline LowerBoundEstimate estimate_lower_bound(
    const DiffusionData& data, const NetworkTopology& topo,
    const std::vector<double>& times, long long n_paths, double dt, std::uint64_t seed,
    const std::vector<double>& epsilons = {}) {
  if (times.empty()) throw std::invalid_argument("lower bound: no evaluation times");
  SrbmSimulator sim(data);
  Optimizer opt;
  const double horizon = times.back();

  std::vector<int> index(times.size());
  for (std::size_t s = 0; s < times.size(); ++s) {
    const double pos = times[s] / dt;
    index[s] = static_cast<int>(std::llround(pos));
    if (std::abs(pos - index[s]) > 1e-6) {
      throw std::invalid_argument("lower bound: time " + std::to_string(times[s]) +
                                  " is not on the dt grid");
    }
  }

  LowerBoundEstimate out;
  out.times = times;
  std::vector<double> sum(times.size(), 0.0), sum2(times.size(), 0.0);
  std::vector<long long> exceed(epsilons.size(), 0);

  for (long long p = 0; p < n_paths; ++p) {
    RandomStream stream(seed, StreamId{StreamKind::noise, static_cast<std::uint32_t>(p), 1});
    const Eigen::MatrixXd x = sim.free_path(horizon, dt, stream);
    const Eigen::MatrixXd w = SrbmSimulator::reflect(x);
    bool ok = true;
    for (std::size_t s = 0; s < times.size() && ok; ++s) {
      LpInstance inst{&topo, srbm_to_b(data, topo, w.col(index[s]))};
      const LpSolution sol = opt.solve_lp(inst);
      if (sol.status != LpSolution::Status::optimal) {
        ok = false;
        break;
      }
      sum[s] += sol.value;
      sum2[s] += sol.value * sol.value;
      if (s + 1 == times.size()) {
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
          if (sol.value > epsilons[e]) exceed[e] += 1;
        }
      }
    }
    if (ok) {
      out.paths += 1;
    } else {
      out.failures += 1;
    }
  }
  if (out.paths == 0) throw std::runtime_error("lower bound: every path failed");
  out.mean.resize(times.size());
  out.se.resize(times.size());
  for (std::size_t s = 0; s < times.size(); ++s) {
    const double n = static_cast<double>(out.paths);
    out.mean[s] = sum[s] / n;
    const double var = std::max(0.0, sum2[s] / n - out.mean[s] * out.mean[s]);
    out.se[s] = std::sqrt(var / n);
  }
  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    out.exceedance.emplace_back(epsilons[e],
                                static_cast<double>(exceed[e]) / static_cast<double>(out.paths));
  }
  return out;
}

struct StepSizeGateResult {
  double estimate = 0.0;       // at dt
  double estimate_fine = 0.0;  // at dt/2, same Brownian increments
  double se = 0.0;             // Monte Carlo error of the dt estimate
  double shift = 0.0;          // |estimate - estimate_fine|
};

// Halving dt must not move the estimate by more than its own standard error.
// Both grids are driven by the same increments so the difference isolates the
// discretization effect.
inline StepSizeGateResult step_size_gate(const DiffusionData& data,
                                         const NetworkTopology& topo, double t,
                                         long long n_paths, double dt, std::uint64_t seed) {
  SrbmSimulator sim(data);
  Optimizer opt;
  const double fine_dt = dt / 2.0;
  const int fine_index = static_cast<int>(std::llround(t / fine_dt));

  double sum_c = 0.0, sum2_c = 0.0, sum_f = 0.0;
  long long used = 0;
  for (long long p = 0; p < n_paths; ++p) {
    RandomStream stream(seed, StreamId{StreamKind::noise, static_cast<std::uint32_t>(p), 2});
    const Eigen::MatrixXd x = sim.free_path(t, fine_dt, stream);
    const Eigen::MatrixXd w_fine = SrbmSimulator::reflect(x, 1);
    const Eigen::MatrixXd w_coarse = SrbmSimulator::reflect(x, 2);
    LpInstance inst_f{&topo, srbm_to_b(data, topo, w_fine.col(fine_index))};
    LpInstance inst_c{&topo, srbm_to_b(data, topo, w_coarse.col(fine_index / 2))};
    const LpSolution f = opt.solve_lp(inst_f);
    const LpSolution c = opt.solve_lp(inst_c);
    if (f.status != LpSolution::Status::optimal || c.status != LpSolution::Status::optimal) {
      continue;
    }
    sum_f += f.value;
    sum_c += c.value;
    sum2_c += c.value * c.value;
    ++used;
  }
  if (used == 0) throw std::runtime_error("step size gate: every path failed");
  StepSizeGateResult out;
  const double n = static_cast<double>(used);
  out.estimate = sum_c / n;
  out.estimate_fine = sum_f / n;
  out.se = std::sqrt(std::max(0.0, sum2_c / n - out.estimate * out.estimate) / n);
  out.shift = std::abs(out.estimate - out.estimate_fine);
  return out;
}

}  // namespace fjlab
