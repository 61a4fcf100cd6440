#pragma once

// Scheduling policies for the shared servers: the LP-tracking review policy
// and the work-conserving baselines it is compared against.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjlab/optimizer.hpp"
#include "fjlab/rng.hpp"
#include "fjlab/simulation.hpp"
#include "fjlab/topology.hpp"

namespace fjlab {

// ---------------------------------------------------------------------------
// Baselines. All are work conserving; "arbitrary" choices are fixed to the
// lowest type index so replays are deterministic.

class CmuPolicy : public Policy {
 public:
  std::string name() const override { return "cmu_priority"; }
  int decide(const SimulationState& s, int i) override {
    const NetworkTopology& topo = *s.topo;
    int best = idle_decision;
    double best_score = -1.0;
    for (int c : topo.classes_of_server(i)) {
      if (s.shr_pre[c] == 0) continue;
      const double score = topo.holding_cost[topo.class_type(c)] * topo.class_service(c).rate;
      if (score > best_score + 1e-12) {
        best = c;
        best_score = score;
      }
    }
    return best;
  }
};

class FifoGlobalPolicy : public Policy {
 public:
  std::string name() const override { return "fifo_global"; }
  int decide(const SimulationState& s, int i) override {
    int best = idle_decision;
    double earliest = std::numeric_limits<double>::infinity();
    for (int c : s.topo->classes_of_server(i)) {
      if (s.shr_pre[c] == 0) continue;
      if (s.shr_fifo[c].front() < earliest - 1e-15) {
        earliest = s.shr_fifo[c].front();
        best = c;
      }
    }
    return best;
  }
};

class LongestQueuePolicy : public Policy {
 public:
  std::string name() const override { return "longest_queue"; }
  int decide(const SimulationState& s, int i) override {
    int best = idle_decision;
    long long longest = 0;
    for (int c : s.topo->classes_of_server(i)) {
      if (s.shr_pre[c] > longest) {
        longest = s.shr_pre[c];
        best = c;
      }
    }
    return best;
  }
};

// Uniform over nonempty buffers, drawing from its own substream so primitive
// sequences are untouched.
class RandomWcPolicy : public Policy {
 public:
  explicit RandomWcPolicy(std::uint64_t seed)
      : rng_(seed, StreamId{StreamKind::policy, 0, 0}) {}
  std::string name() const override { return "random_wc"; }
  int decide(const SimulationState& s, int i) override {
    nonempty_.clear();
    for (int c : s.topo->classes_of_server(i)) {
      if (s.shr_pre[c] > 0) nonempty_.push_back(c);
    }
    if (nonempty_.empty()) return idle_decision;
    if (nonempty_.size() == 1) return nonempty_[0];
    return nonempty_[rng_.next_u64() % nonempty_.size()];
  }

 private:
  RandomStream rng_;
  std::vector<int> nonempty_;
};

// ---------------------------------------------------------------------------
// Proposed review policy.
//
// Each shared server runs its own asynchronous review loop. At a review
// start the LP is solved on b = (Q_k, W_i) and the minimum-norm optimal
// split q* is selected; the ceilings of q* over the server's classes are
// frozen as targets. With no buffer above target the review is a step-2
// review: serve anything (or the first external arrival if empty) and end at
// the server's next completion. Otherwise it is a step-3 review: pick the
// excluded type m, serve excess jobs of every other type until no buffer but
// m exceeds its target, then end.

enum class TieRule { paper, rate_free };

struct ReviewRecord {
  int server = 0;
  double start = 0.0;
  double end = 0.0;
  int step = 2;
  std::vector<long long> targets;  // aligned with classes_of_server(server)
  int excluded_class = -1;
  // over_classes as class indices at review start
  std::vector<int> over_classes;
};

struct ClassifyResult {
  std::vector<int> over;      // class indices with Q > ceil(q*)
  std::vector<int> under;     // complement within the server
  std::vector<int> argmax;    // J_i^<: under-set classes maximizing the gap
};

// Ceiling with a dust allowance so integral optima round to themselves.
inline long long target_ceiling(double q_star) {
  return static_cast<long long>(std::ceil(q_star - 1e-9));
}

inline ClassifyResult classify(const SimulationState& s, int i, const LpSolution& sol,
                               TieRule rule = TieRule::paper) {
  const NetworkTopology& topo = *s.topo;
  ClassifyResult out;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (int c : topo.classes_of_server(i)) {
    if (s.shr_pre[c] > target_ceiling(sol.q(c))) {
      out.over.push_back(c);
      continue;
    }
    out.under.push_back(c);
    const double raw_gap = sol.q(c) - static_cast<double>(s.shr_pre[c]);
    const double gap =
        rule == TieRule::paper ? raw_gap / topo.arrival_rate[topo.class_type(c)] : raw_gap;
    if (gap > best_gap + 1e-12) {
      best_gap = gap;
      out.argmax.clear();
      out.argmax.push_back(c);
    } else if (gap > best_gap - 1e-12) {
      out.argmax.push_back(c);
    }
  }
  return out;
}

// Step-2 service rule: lowest-index nonempty buffer of server i, or
// idle_decision when the whole server is empty (serve the first arrival).
inline int step2_select(const SimulationState& s, int i) {
  for (int c : s.topo->classes_of_server(i)) {
    if (s.shr_pre[c] > 0) return c;
  }
  return Policy::idle_decision;
}

// Step-3 service rule: among classes above their frozen targets (excluding
// m), serve the largest excess, ties by lowest type index. idle_decision
// means the step-3 stopping time has been reached. The excluded class must
// have been in the under set when the plan was frozen.
inline int step3_select(const SimulationState& s, const std::vector<int>& classes,
                        const std::vector<long long>& targets, int excluded_class) {
  if (std::find(classes.begin(), classes.end(), excluded_class) == classes.end()) {
    throw std::invalid_argument("step-3 excluded class does not belong to the server");
  }
  int best = Policy::idle_decision;
  long long best_excess = 0;
  for (std::size_t idx = 0; idx < classes.size(); ++idx) {
    const int c = classes[idx];
    if (c == excluded_class) continue;
    const long long excess = s.shr_pre[c] - targets[idx];
    if (excess > best_excess) {
      best_excess = excess;
      best = c;
    }
  }
  return best;
}

// Contract of a step-3 plan at its creation epoch: the excluded class must
// belong to the server and sit at or below its frozen target.
inline void check_step3_plan(const SimulationState& s, const std::vector<int>& classes,
                             const std::vector<long long>& targets, int excluded_class) {
  const auto it = std::find(classes.begin(), classes.end(), excluded_class);
  if (it == classes.end()) {
    throw std::invalid_argument("step-3 excluded class does not belong to the server");
  }
  const auto idx = static_cast<std::size_t>(it - classes.begin());
  if (s.shr_pre[excluded_class] > targets[idx]) {
    throw std::invalid_argument("step-3 excluded class must be in the under set");
  }
}

// Diagnostic only: the shortest admissible expected review length,
// max over the under-set of (q* - Q)/lambda. Can be negative when every
// under-set buffer already sits at or above its unrounded optimum.
inline double expected_review_length(const SimulationState& s, int i,
                                     const LpSolution& sol) {
  const NetworkTopology& topo = *s.topo;
  double length = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int c : topo.classes_of_server(i)) {
    if (s.shr_pre[c] > target_ceiling(sol.q(c))) continue;
    any = true;
    const double gap = (sol.q(c) - static_cast<double>(s.shr_pre[c])) /
                       topo.arrival_rate[topo.class_type(c)];
    length = std::max(length, gap);
  }
  if (!any) throw std::invalid_argument("expected_review_length: empty under-set");
  return length;
}

class ProposedPolicy : public Policy {
 public:
  explicit ProposedPolicy(TieRule rule = TieRule::paper, bool keep_records = false)
      : rule_(rule), keep_records_(keep_records) {}

  std::string name() const override { return "proposed"; }

  void begin_run(const SimulationState& s) override {
    plans_.assign(s.topo->shared_count(), {});
    records_.clear();
    for (int i = 0; i < s.topo->shared_count(); ++i) begin_review(s, i);
  }

  int decide(const SimulationState& s, int i) override {
    const Plan& plan = plans_[i];
    if (plan.step3) {
      const int c = step3_select(s, plan.classes, plan.targets, plan.excluded_class);
      if (c == idle_decision) {
        throw SimulationError("step-3 review has no excess to serve at server " +
                              std::to_string(i + 1));
      }
      return c;
    }
    return step2_select(s, i);
  }

  void on_completion(const SimulationState& s, int i) override {
    Plan& plan = plans_[i];
    if (plan.step3) {
      if (excess_remains(s, plan)) return;
      finish_review(s, i);
    } else {
      // A step-2 review ends at the server's first completion epoch.
      finish_review(s, i);
    }
  }

  const std::vector<ReviewRecord>& records() const { return records_; }
  long long reviews_started() const { return reviews_started_; }

 private:
  struct Plan {
    bool step3 = false;
    double started = 0.0;
    std::vector<int> classes;         // classes_of_server(i) snapshot
    std::vector<long long> targets;   // frozen ceilings
    int excluded_class = -1;
    long long excluded_completions = 0;
    std::vector<int> over_classes;
  };

  bool excess_remains(const SimulationState& s, const Plan& plan) const {
    for (std::size_t idx = 0; idx < plan.classes.size(); ++idx) {
      const int c = plan.classes[idx];
      if (c == plan.excluded_class) continue;
      if (s.shr_pre[c] > plan.targets[idx]) return true;
    }
    return false;
  }

  void finish_review(const SimulationState& s, int i) {
    const Plan& plan = plans_[i];
    if (plan.step3) {
      // Structural guarantees of the stopping rule, checked at the boundary:
      // over-set buffers sit exactly at target, the rest (except m) at or
      // below, and the excluded buffer was never served.
      for (std::size_t idx = 0; idx < plan.classes.size(); ++idx) {
        const int c = plan.classes[idx];
        const bool was_over =
            std::find(plan.over_classes.begin(), plan.over_classes.end(), c) !=
            plan.over_classes.end();
        if (c == plan.excluded_class) continue;
        if (was_over && s.shr_pre[c] != plan.targets[idx]) {
          throw SimulationError("step-3 review ended off target at server " +
                                std::to_string(i + 1));
        }
        if (!was_over && s.shr_pre[c] > plan.targets[idx]) {
          throw SimulationError("step-3 review ended above target at server " +
                                std::to_string(i + 1));
        }
      }
      if (s.shr_completions[plan.excluded_class] != plan.excluded_completions) {
        throw SimulationError("excluded buffer was served during a step-3 review at server " +
                              std::to_string(i + 1));
      }
    }
    if (keep_records_) {
      ReviewRecord rec;
      rec.server = i;
      rec.start = plan.started;
      rec.end = s.clock;
      rec.step = plan.step3 ? 3 : 2;
      rec.targets = plan.targets;
      rec.excluded_class = plan.excluded_class;
      rec.over_classes = plan.over_classes;
      records_.push_back(std::move(rec));
    }
    begin_review(s, i);
  }

  void begin_review(const SimulationState& s, int i) {
    const NetworkTopology& topo = *s.topo;
    LpInstance inst{&topo, Eigen::VectorXd(topo.b_dim())};
    for (int k = 0; k < topo.dedicated_count(); ++k) {
      inst.b(k) = static_cast<double>(s.ded_pre[k]);
    }
    for (int n = 0; n < topo.shared_count(); ++n) {
      inst.b(topo.dedicated_count() + n) = s.workload(n);
    }
    const LpSolution sol = optimizer_.select_solution(inst);
    if (sol.status != LpSolution::Status::optimal) {
      throw SimulationError("optimizer failed in review at t=" + std::to_string(s.clock) +
                            " for server " + std::to_string(i + 1));
    }

    Plan plan;
    plan.started = s.clock;
    plan.classes = topo.classes_of_server(i);
    plan.targets.reserve(plan.classes.size());
    for (int c : plan.classes) plan.targets.push_back(target_ceiling(sol.q(c)));

    const ClassifyResult cls = classify(s, i, sol, rule_);
    plan.over_classes = cls.over;
    plan.step3 = !cls.over.empty();
    if (plan.step3) {
      if (cls.argmax.empty()) {
        throw SimulationError("step-3 review with empty argmax set at server " +
                              std::to_string(i + 1));
      }
      plan.excluded_class = cls.argmax.front();  // lowest type index
      check_step3_plan(s, plan.classes, plan.targets, plan.excluded_class);
      plan.excluded_completions = s.shr_completions[plan.excluded_class];
    }
    plans_[i] = std::move(plan);
    ++reviews_started_;
  }

  TieRule rule_;
  bool keep_records_;
  Optimizer optimizer_;
  std::vector<Plan> plans_;
  std::vector<ReviewRecord> records_;
  long long reviews_started_ = 0;
};

inline std::unique_ptr<Policy> make_policy(const std::string& name, std::uint64_t seed,
                                           TieRule rule = TieRule::paper,
                                           bool keep_records = false) {
  if (name == "proposed") return std::make_unique<ProposedPolicy>(rule, keep_records);
  if (name == "cmu_priority") return std::make_unique<CmuPolicy>();
  if (name == "fifo_global") return std::make_unique<FifoGlobalPolicy>();
  if (name == "longest_queue") return std::make_unique<LongestQueuePolicy>();
  if (name == "random_wc") return std::make_unique<RandomWcPolicy>(seed);
  throw std::invalid_argument("unknown policy: " + name);
}

}  // namespace fjlab
