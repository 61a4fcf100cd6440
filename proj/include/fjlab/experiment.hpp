#pragma once

// Scaling experiment runner: for each system index r and each policy, run
// paired-seed replications, collect diffusion- and fluid-scaled statistics,
// and put the SRBM lower-bound estimate alongside them.
//
// Replications are embarrassingly parallel: workers fill preallocated slots
// and the reduction is a single deterministic pass, so results do not depend
// on scheduling.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "fjlab/optimizer.hpp"
#include "fjlab/policies.hpp"
#include "fjlab/reflection.hpp"
#include "fjlab/scaling.hpp"
#include "fjlab/simulation.hpp"
#include "fjlab/topology.hpp"

namespace fjlab {

struct ExperimentPlan {
  std::vector<int> r_values = {5, 20};
  std::vector<std::string> policies = {"proposed", "cmu_priority"};
  int replications = 100;
  double horizon = 1.0;  // scaled time
  std::vector<double> checkpoints = {0.25, 0.5, 1.0};
  double tracking_dt = 0.01;  // scaled sampling step for the tracking statistic
  std::uint64_t seed = 1;
  int jobs = 1;
  long long srbm_paths = 10000;
  double srbm_dt = 1e-3;
  std::vector<double> epsilons = {0.0, 0.5, 1.0, 2.0, 4.0};
  TieRule tie_rule = TieRule::paper;
  std::vector<long long> initial_dedicated;
  std::vector<long long> initial_shared;
  bool estimate_bound = true;
};

struct ReplicationRow {
  int r = 0;
  std::string policy;
  std::uint64_t seed = 0;
  double scaled_cost = 0.0;
  double truncation_bound = 0.0;
  long long max_queue = 0;
  bool failed = false;
  std::string error;
};

struct MetricRow {
  int r = 0;
  std::string policy;
  std::string metric;
  std::string key;
  double value = 0.0;
  double se = 0.0;
  long long n = 0;
};

struct ExperimentResult {
  std::vector<MetricRow> summary;
  std::vector<ReplicationRow> replications;
  LowerBoundEstimate bound;  // valid when bound_available
  bool bound_available = false;
};

inline void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || count <= 1) {
    for (int idx = 0; idx < count; ++idx) body(idx);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  const int n_workers = std::min(jobs, count);
  workers.reserve(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&]() {
      while (true) {
        const int idx = next.fetch_add(1);
        if (idx >= count) return;
        body(idx);
      }
    });
  }
  for (auto& t : workers) t.join();
}

namespace detail {

inline std::string num_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

inline std::string class_label(const NetworkTopology& topo, int c) {
  return "i=" + std::to_string(topo.class_server(c) + 1) +
         ",j=" + std::to_string(topo.class_type(c) + 1);
}

struct RepOutcome {
  bool failed = false;
  std::string error;
  double scaled_cost = 0.0;
  double truncation = 0.0;
  long long max_queue = 0;
  std::vector<double> cost_rate;     // per checkpoint
  std::vector<double> njobs_hat;     // type-major: j * n_checkpoints + s
  std::vector<double> workload_hat;  // server-major: i * n_checkpoints + s
  std::vector<double> tracking_max;  // per class
  std::vector<double> busy_frac;     // per class
  std::vector<double> fluid_queue;   // dedicated legs then shared classes
};

struct Accumulator {
  double sum = 0.0, sum2 = 0.0;
  long long n = 0;
  std::vector<double> values;  // kept for medians
  void add(double x) {
    sum += x;
    sum2 += x * x;
    ++n;
    values.push_back(x);
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  double se() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, sum2 / n - m * m);
    return std::sqrt(var / n);
  }
  double median() const {
    if (values.empty()) return 0.0;
    std::vector<double> v = values;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  }
};

}  // namespace detail

inline ExperimentResult run_experiment(const HeavyTrafficSequence& seq,
                                       const ExperimentPlan& plan) {
  const NetworkTopology& topo = seq.base;
  ExperimentResult result;

  // Scaled sampling grid: multiples of tracking_dt plus every checkpoint.
  std::vector<double> grid;
  for (double t = plan.tracking_dt; t < plan.horizon + 1e-12; t += plan.tracking_dt) {
    grid.push_back(t);
  }
  for (double c : plan.checkpoints) grid.push_back(c);
  grid.push_back(plan.horizon);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             grid.end());
  std::vector<std::size_t> checkpoint_at;
  for (double c : plan.checkpoints) {
    const auto it = std::lower_bound(grid.begin(), grid.end(), c - 1e-12);
    checkpoint_at.push_back(static_cast<std::size_t>(it - grid.begin()));
  }
  const int n_checks = static_cast<int>(plan.checkpoints.size());

  for (int r : plan.r_values) {
    const double r2 = static_cast<double>(r) * r;
    std::vector<double> raw_grid(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) raw_grid[g] = r2 * grid[g];

    for (const std::string& policy_name : plan.policies) {
      std::vector<detail::RepOutcome> outcomes(plan.replications);

      parallel_for(plan.replications, plan.jobs, [&](int rep) {
        detail::RepOutcome& out = outcomes[rep];
        try {
          const std::uint64_t rep_seed = derive_seed(plan.seed, rep);
          auto policy = make_policy(policy_name, rep_seed, plan.tie_rule);
          SimConfig cfg;
          cfg.r = r;
          cfg.horizon = r2 * plan.horizon;
          cfg.seed = rep_seed;
          cfg.discount = topo.discount / r2;
          cfg.sample_grid = raw_grid;
          cfg.initial_dedicated = plan.initial_dedicated;
          cfg.initial_shared = plan.initial_shared;
          Simulator sim(seq, *policy, cfg);
          const RunResult run = sim.run();

          // (a) discounted diffusion-scaled cost over [0, horizon].
          double cost = 0.0;
          for (int j = 0; j < topo.type_count(); ++j) {
            cost += topo.holding_cost[j] * run.discounted_integral[j];
          }
          out.scaled_cost = cost / (r2 * r);
          out.truncation = run.truncation_bound / (r2 * r);
          out.max_queue = run.max_queue;

          // (b) checkpoint statistics under diffusion scaling.
          out.cost_rate.assign(n_checks, 0.0);
          out.njobs_hat.assign(static_cast<std::size_t>(topo.type_count()) * n_checks, 0.0);
          out.workload_hat.assign(static_cast<std::size_t>(topo.shared_count()) * n_checks, 0.0);
          for (int s = 0; s < n_checks; ++s) {
            const TrajectoryRow& row = run.trajectory.at(checkpoint_at[s]);
            for (int j = 0; j < topo.type_count(); ++j) {
              const double nhat = static_cast<double>(row.njobs[j]) / r;
              out.njobs_hat[static_cast<std::size_t>(j) * n_checks + s] = nhat;
              out.cost_rate[s] += topo.holding_cost[j] * nhat;
            }
            for (int i = 0; i < topo.shared_count(); ++i) {
              out.workload_hat[static_cast<std::size_t>(i) * n_checks + s] =
                  row.workload[i] / r;
            }
          }

          // (c) tracking statistic against the selected LP solution.
          Optimizer opt;
          out.tracking_max.assign(topo.class_count(), 0.0);
          for (const TrajectoryRow& row : run.trajectory) {
            LpInstance inst{&topo, Eigen::VectorXd(topo.b_dim())};
            for (int k = 0; k < topo.dedicated_count(); ++k) {
              inst.b(k) = static_cast<double>(row.ded_pre[k]);
            }
            for (int i = 0; i < topo.shared_count(); ++i) {
              inst.b(topo.dedicated_count() + i) = row.workload[i];
            }
            const LpSolution sol = opt.select_solution(inst);
            if (sol.status != LpSolution::Status::optimal) {
              throw std::runtime_error("tracking: optimizer failed");
            }
            for (int c = 0; c < topo.class_count(); ++c) {
              const double gap = std::abs(static_cast<double>(row.shr_pre[c]) - sol.q(c)) / r;
              out.tracking_max[c] = std::max(out.tracking_max[c], gap);
            }
          }

          // (d) fluid busy-time fractions and fluid queues at the horizon.
          out.busy_frac.assign(topo.class_count(), 0.0);
          for (int c = 0; c < topo.class_count(); ++c) {
            out.busy_frac[c] = run.final_state.shr_busy_class_at(c, cfg.horizon) / cfg.horizon;
          }
          out.fluid_queue.assign(topo.dedicated_count() + topo.class_count(), 0.0);
          const TrajectoryRow& last = run.trajectory.back();
          for (int k = 0; k < topo.dedicated_count(); ++k) {
            out.fluid_queue[k] = static_cast<double>(last.ded_pre[k]) / r2;
          }
          for (int c = 0; c < topo.class_count(); ++c) {
            out.fluid_queue[topo.dedicated_count() + c] =
                static_cast<double>(last.shr_pre[c]) / r2;
          }
        } catch (const std::exception& e) {
          out.failed = true;
          out.error = e.what();
        }
      });

      // Deterministic reduction over replication index.
      detail::Accumulator cost_acc;
      std::vector<detail::Accumulator> rate_acc(n_checks);
      std::vector<detail::Accumulator> njobs_acc(static_cast<std::size_t>(topo.type_count()) * n_checks);
      std::vector<detail::Accumulator> work_acc(static_cast<std::size_t>(topo.shared_count()) * n_checks);
      std::vector<detail::Accumulator> track_acc(topo.class_count());
      std::vector<detail::Accumulator> busy_acc(topo.class_count());
      std::vector<detail::Accumulator> fluidq_acc(topo.dedicated_count() + topo.class_count());
      long long failures = 0;

      for (int rep = 0; rep < plan.replications; ++rep) {
        const detail::RepOutcome& out = outcomes[rep];
        ReplicationRow row;
        row.r = r;
        row.policy = policy_name;
        row.seed = derive_seed(plan.seed, rep);
        row.failed = out.failed;
        row.error = out.error;
        row.scaled_cost = out.scaled_cost;
        row.truncation_bound = out.truncation;
        row.max_queue = out.max_queue;
        result.replications.push_back(std::move(row));
        if (out.failed) {
          ++failures;
          continue;
        }
        cost_acc.add(out.scaled_cost);
        for (int s = 0; s < n_checks; ++s) rate_acc[s].add(out.cost_rate[s]);
        for (std::size_t idx = 0; idx < out.njobs_hat.size(); ++idx) {
          njobs_acc[idx].add(out.njobs_hat[idx]);
        }
        for (std::size_t idx = 0; idx < out.workload_hat.size(); ++idx) {
          work_acc[idx].add(out.workload_hat[idx]);
        }
        for (int c = 0; c < topo.class_count(); ++c) {
          track_acc[c].add(out.tracking_max[c]);
          busy_acc[c].add(out.busy_frac[c]);
        }
        for (std::size_t idx = 0; idx < out.fluid_queue.size(); ++idx) {
          fluidq_acc[idx].add(out.fluid_queue[idx]);
        }
      }

      auto push = [&](const std::string& metric, const std::string& key,
                      const detail::Accumulator& acc) {
        result.summary.push_back({r, policy_name, metric, key, acc.mean(), acc.se(), acc.n});
      };
      push("scaled_discounted_cost", "", cost_acc);
      for (int s = 0; s < n_checks; ++s) {
        push("cost_rate", "t=" + detail::num_label(plan.checkpoints[s]), rate_acc[s]);
      }
      for (int j = 0; j < topo.type_count(); ++j) {
        for (int s = 0; s < n_checks; ++s) {
          push("njobs_hat",
               "j=" + std::to_string(j + 1) + ",t=" + detail::num_label(plan.checkpoints[s]),
               njobs_acc[static_cast<std::size_t>(j) * n_checks + s]);
        }
      }
      for (int i = 0; i < topo.shared_count(); ++i) {
        for (int s = 0; s < n_checks; ++s) {
          push("workload_hat",
               "i=" + std::to_string(i + 1) + ",t=" + detail::num_label(plan.checkpoints[s]),
               work_acc[static_cast<std::size_t>(i) * n_checks + s]);
        }
      }
      for (int c = 0; c < topo.class_count(); ++c) {
        const std::string key = detail::class_label(topo, c);
        push("tracking_mean", key, track_acc[c]);
        result.summary.push_back(
            {r, policy_name, "tracking_median", key, track_acc[c].median(), 0.0, track_acc[c].n});
        push("fluid_busy_frac", key, busy_acc[c]);
        const double limit =
            topo.arrival_rate[topo.class_type(c)] / topo.class_service(c).rate;
        result.summary.push_back({r, policy_name, "fluid_busy_limit", key, limit, 0.0, 0});
      }
      for (int k = 0; k < topo.dedicated_count(); ++k) {
        push("fluid_queue", "k=" + std::to_string(k + 1), fluidq_acc[k]);
      }
      for (int c = 0; c < topo.class_count(); ++c) {
        push("fluid_queue", detail::class_label(topo, c),
             fluidq_acc[topo.dedicated_count() + c]);
      }
      result.summary.push_back(
          {r, policy_name, "failures", "", static_cast<double>(failures), 0.0, failures});
    }
  }

  if (plan.estimate_bound && validate(topo, ValidationMode::strict).empty()) {
    const DiffusionData data = diffusion_data(seq);
    result.bound = estimate_lower_bound(data, topo, plan.checkpoints, plan.srbm_paths,
                                        plan.srbm_dt, derive_seed(plan.seed, 0x5bbd),
                                        plan.epsilons);
    result.bound_available = true;
    for (int s = 0; s < n_checks; ++s) {
      result.summary.push_back({0, "srbm_limit", "lower_bound",
                                "t=" + detail::num_label(plan.checkpoints[s]),
                                result.bound.mean[s], result.bound.se[s], result.bound.paths});
    }
  }
  return result;
}

}  // namespace fjlab
