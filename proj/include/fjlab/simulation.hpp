#pragma once

// Event-driven simulation of the fork-join network dynamics with exact
// integer queue accounting.
//
// Each job type j forks on arrival into one task per dedicated server in K_j
// and one per shared server in I_j. Tasks wait in pre-service buffers
// (including the task in service), move to post-service join buffers on
// completion, and the join fires instantly as soon as every leg has a task
// waiting, releasing one job. Scheduling control exists only at the shared
// servers and is supplied through the Policy callback.
//
// The engine verifies the flow identities, join synchronization, idle-time
// identities and work conservation after every event (integers exactly,
// times to 1e-9) and throws SimulationError on the first violation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjlab/rng.hpp"
#include "fjlab/topology.hpp"

namespace fjlab {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerSlot {
  int serving = -1;       // class index (shared) or dedicated k's type (dedicated)
  double start = 0.0;
  double duration = 0.0;  // engine bookkeeping; policies must not read this
  bool busy() const { return serving >= 0; }
};

struct SimulationState {
  const NetworkTopology* topo = nullptr;
  double clock = 0.0;

  // Dedicated legs, indexed by global dedicated server k.
  std::vector<long long> ded_pre, ded_post, ded_initial, ded_completions;
  std::vector<double> ded_busy;  // completed service time only
  std::vector<ServerSlot> ded_server;

  // Shared legs, indexed by flat class c; one server slot per shared server i.
  std::vector<long long> shr_pre, shr_post, shr_initial, shr_completions;
  std::vector<double> shr_busy;
  std::vector<std::deque<double>> shr_fifo;  // arrival epochs, head first
  std::vector<ServerSlot> shr_server;

  std::vector<long long> arrivals;    // A_j
  std::vector<long long> departures;  // joined jobs per type
  std::vector<long long> njobs;       // N_j

  void init(const NetworkTopology& t, const std::vector<long long>& initial_dedicated,
            const std::vector<long long>& initial_shared) {
    topo = &t;
    const int K = t.dedicated_count();
    const int P = t.class_count();
    const int J = t.type_count();
    ded_pre.assign(K, 0);
    ded_post.assign(K, 0);
    ded_completions.assign(K, 0);
    ded_busy.assign(K, 0.0);
    ded_server.assign(K, {});
    shr_pre.assign(P, 0);
    shr_post.assign(P, 0);
    shr_completions.assign(P, 0);
    shr_busy.assign(P, 0.0);
    shr_fifo.assign(P, {});
    shr_server.assign(t.shared_count(), {});
    arrivals.assign(J, 0);
    departures.assign(J, 0);
    njobs.assign(J, 0);
    if (!initial_dedicated.empty()) {
      if (static_cast<int>(initial_dedicated.size()) != K)
        throw std::invalid_argument("initial dedicated queue list has wrong size");
      ded_pre = initial_dedicated;
    }
    if (!initial_shared.empty()) {
      if (static_cast<int>(initial_shared.size()) != P)
        throw std::invalid_argument("initial shared queue list has wrong size");
      shr_pre = initial_shared;
    }
    for (long long q : ded_pre) {
      if (q < 0) throw std::invalid_argument("initial queue contents must be nonnegative");
    }
    for (long long q : shr_pre) {
      if (q < 0) throw std::invalid_argument("initial queue contents must be nonnegative");
    }
    // Initial contents are pre-service tasks of jobs already forked; the
    // missing tasks of each job sit in the other legs' post buffers, so
    // N_j(0) = max over legs and every post buffer tops up to it.
    for (int j = 0; j < J; ++j) {
      long long n = 0;
      for (int k : t.dedicated_of(j)) n = std::max(n, ded_pre[k]);
      for (int c : t.classes_of_type(j)) n = std::max(n, shr_pre[c]);
      njobs[j] = n;
      for (int k : t.dedicated_of(j)) ded_post[k] = n - ded_pre[k];
      for (int c : t.classes_of_type(j)) shr_post[c] = n - shr_pre[c];
    }
    for (int c = 0; c < P; ++c) {
      for (long long x = 0; x < shr_pre[c]; ++x) shr_fifo[c].push_back(0.0);
    }
    ded_initial = ded_pre;
    shr_initial = shr_pre;
  }

  // Expected service time embodied in server i's buffers: sum Q_ij / mu_ij.
  double workload(int i) const {
    double w = 0.0;
    for (int c : topo->classes_of_server(i)) {
      w += static_cast<double>(shr_pre[c]) / topo->class_service(c).rate;
    }
    return w;
  }

  // N_j, cross-checked against every leg's pre + post sum.
  long long job_count(int j) const {
    long long expect = njobs[j];
    for (int k : topo->dedicated_of(j)) {
      if (ded_pre[k] + ded_post[k] != expect) {
        throw SimulationError("job count mismatch on dedicated leg of type " +
                              std::to_string(j + 1));
      }
    }
    for (int c : topo->classes_of_type(j)) {
      if (shr_pre[c] + shr_post[c] != expect) {
        throw SimulationError("job count mismatch on shared leg of type " +
                              std::to_string(j + 1));
      }
    }
    return expect;
  }

  double ded_busy_at(int k, double t) const {
    return ded_busy[k] + (ded_server[k].busy() ? t - ded_server[k].start : 0.0);
  }
  double shr_busy_class_at(int c, double t) const {
    const ServerSlot& s = shr_server[topo->class_server(c)];
    return shr_busy[c] + (s.serving == c ? t - s.start : 0.0);
  }
  double shr_busy_server_at(int i, double t) const {
    double total = 0.0;
    for (int c : topo->classes_of_server(i)) total += shr_busy[c];
    if (shr_server[i].busy()) total += t - shr_server[i].start;
    return total;
  }

  // Moves one completed task of the given leg to its join buffer and fires
  // the instantaneous join; returns the number of departures (0 or 1).
  int complete_dedicated(int k) {
    if (ded_pre[k] <= 0) throw SimulationError("completion on empty dedicated buffer");
    ded_pre[k] -= 1;
    ded_post[k] += 1;
    ded_completions[k] += 1;
    return join_flush(topo->dedicated[k].type);
  }
  int complete_shared(int c) {
    if (shr_pre[c] <= 0) throw SimulationError("completion on empty shared buffer");
    shr_pre[c] -= 1;
    shr_post[c] += 1;
    shr_completions[c] += 1;
    shr_fifo[c].pop_front();
    return join_flush(topo->class_type(c));
  }

  int join_flush(int j) {
    long long m = std::numeric_limits<long long>::max();
    for (int k : topo->dedicated_of(j)) m = std::min(m, ded_post[k]);
    for (int c : topo->classes_of_type(j)) m = std::min(m, shr_post[c]);
    if (m == std::numeric_limits<long long>::max()) m = 0;
    if (m > 1) {
      throw SimulationError("join flush of " + std::to_string(m) +
                            " jobs for type " + std::to_string(j + 1) +
                            "; head-of-line service admits at most one");
    }
    if (m == 1) {
      for (int k : topo->dedicated_of(j)) ded_post[k] -= 1;
      for (int c : topo->classes_of_type(j)) shr_post[c] -= 1;
      departures[j] += 1;
      njobs[j] -= 1;
    }
    return static_cast<int>(m);
  }
};

// Scheduling callback for the shared servers. decide() is invoked only when
// server i is free and at least one of its buffers is nonempty; it must name
// a class of server i with a waiting task (returning idle_decision while work
// is waiting violates work conservation and aborts the run). Service is
// non-preemptive and FIFO within each buffer. on_completion() fires at every
// service completion epoch of server i before the next decision.
class Policy {
 public:
  static constexpr int idle_decision = -1;

  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void begin_run(const SimulationState&) {}
  virtual int decide(const SimulationState&, int server_i) = 0;
  virtual void on_completion(const SimulationState&, int /*server_i*/) {}
};

// Piecewise-exact integral of e^{-delta t} N_j(t); no quadrature error.
class CostAccumulator {
 public:
  void init(int types, double discount) {
    discount_ = discount;
    integral_.assign(types, 0.0);
    last_ = 0.0;
  }
  void advance(double t, const std::vector<long long>& njobs) {
    if (t <= last_) return;
    const double seg = discount_ > 0.0
                           ? (std::exp(-discount_ * last_) - std::exp(-discount_ * t)) / discount_
                           : t - last_;
    for (std::size_t j = 0; j < integral_.size(); ++j) {
      integral_[j] += seg * static_cast<double>(njobs[j]);
    }
    last_ = t;
  }
  const std::vector<double>& per_type() const { return integral_; }
  double weighted(const std::vector<double>& h) const {
    double total = 0.0;
    for (std::size_t j = 0; j < integral_.size(); ++j) total += h[j] * integral_[j];
    return total;
  }
  double discount() const { return discount_; }

 private:
  double discount_ = 0.0;
  std::vector<double> integral_;
  double last_ = 0.0;
};

struct TrajectoryRow {
  double t = 0.0;
  std::vector<long long> ded_pre, shr_pre, ded_post, shr_post;
  std::vector<double> workload;
  std::vector<long long> njobs;
};

struct SimConfig {
  int r = 1;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  double discount = 1.0;  // raw-time rate used for the cost integral
  std::vector<double> sample_grid;
  std::vector<long long> initial_dedicated;
  std::vector<long long> initial_shared;
  bool check_invariants = true;
};

struct RunResult {
  std::vector<TrajectoryRow> trajectory;
  std::vector<double> discounted_integral;  // per type, over [0, horizon]
  double truncation_bound = 0.0;
  long long event_count = 0;
  long long max_queue = 0;
  SimulationState final_state;
};

class Simulator {
 public:
  Simulator(const HeavyTrafficSequence& seq, Policy& policy, const SimConfig& cfg)
      : topo_(seq.base), policy_(policy), cfg_(cfg), rates_(seq.rates_at(cfg.r)) {}

  // Overload for direct rate control (unit tests with degenerate topologies).
  Simulator(const NetworkTopology& topo, std::vector<double> rates, Policy& policy,
            const SimConfig& cfg)
      : topo_(topo), policy_(policy), cfg_(cfg), rates_(std::move(rates)) {}

  RunResult run() {
    const int J = topo_.type_count();
    const int K = topo_.dedicated_count();
    const int I = topo_.shared_count();

    state_.init(topo_, cfg_.initial_dedicated, cfg_.initial_shared);
    cost_.init(J, cfg_.discount);
    events_ = {};
    seq_no_ = 0;

    arrival_streams_.clear();
    arrival_specs_.clear();
    for (int j = 0; j < J; ++j) {
      arrival_streams_.emplace_back(cfg_.seed, StreamId{StreamKind::arrival,
                                                        static_cast<std::uint32_t>(j), 0});
      arrival_specs_.push_back(
          DistributionSpec::make(topo_.arrival_family[j], 1.0, topo_.arrival_scv[j]));
    }
    ded_streams_.clear();
    ded_specs_.clear();
    for (int k = 0; k < K; ++k) {
      ded_streams_.emplace_back(cfg_.seed, StreamId{StreamKind::dedicated_service,
                                                    static_cast<std::uint32_t>(k), 0});
      const auto& d = topo_.dedicated[k];
      ded_specs_.push_back(DistributionSpec::make(d.family, 1.0 / d.rate, d.scv));
    }
    shr_streams_.clear();
    shr_specs_.clear();
    for (int c = 0; c < topo_.class_count(); ++c) {
      shr_streams_.emplace_back(cfg_.seed,
                               StreamId{StreamKind::shared_service,
                                        static_cast<std::uint32_t>(topo_.class_server(c)),
                                        static_cast<std::uint32_t>(topo_.class_type(c))});
      const auto& svc = topo_.class_service(c);
      shr_specs_.push_back(DistributionSpec::make(svc.family, 1.0 / svc.rate, svc.scv));
    }

    RunResult out;
    grid_pos_ = 0;
    max_queue_ = 0;
    for (long long q : state_.ded_pre) max_queue_ = std::max(max_queue_, q);
    for (long long q : state_.shr_pre) max_queue_ = std::max(max_queue_, q);
    next_arrival_.assign(J, 0.0);

    for (int j = 0; j < J; ++j) schedule_next_arrival(j);
    policy_.begin_run(state_);
    // Initial contents may already demand service.
    for (int k = 0; k < K; ++k) dispatch_dedicated(k);
    for (int i = 0; i < I; ++i) dispatch_shared(i);
    if (cfg_.check_invariants) check_all();

    while (!events_.empty() && events_.top().time <= cfg_.horizon) {
      const Event ev = events_.top();
      events_.pop();
      while (grid_pos_ < cfg_.sample_grid.size() && cfg_.sample_grid[grid_pos_] < ev.time) {
        emit_row(out, cfg_.sample_grid[grid_pos_++]);
      }
      cost_.advance(ev.time, state_.njobs);
      state_.clock = ev.time;
      switch (ev.kind) {
        case Event::tag_arrival:
          handle_arrival(ev.index);
          break;
        case Event::tag_ded:
          handle_ded_completion(ev.index);
          break;
        case Event::tag_shr:
          handle_shr_completion(ev.index);
          break;
      }
      ++out.event_count;
      if (cfg_.check_invariants) check_all();
    }

    while (grid_pos_ < cfg_.sample_grid.size() && cfg_.sample_grid[grid_pos_] <= cfg_.horizon) {
      emit_row(out, cfg_.sample_grid[grid_pos_++]);
    }
    cost_.advance(cfg_.horizon, state_.njobs);
    state_.clock = cfg_.horizon;

    out.discounted_integral = cost_.per_type();
    double terminal_cost = 0.0;
    for (int j = 0; j < J; ++j) terminal_cost += topo_.holding_cost[j] * state_.njobs[j];
    out.truncation_bound = cfg_.discount > 0.0
                               ? std::exp(-cfg_.discount * cfg_.horizon) * terminal_cost / cfg_.discount
                               : std::numeric_limits<double>::infinity();
    out.max_queue = max_queue_;
    out.final_state = state_;
    return out;
  }

 private:
  struct Event {
    double time;
    int rank;  // completions before arrivals at equal times
    std::uint64_t seq;
    int kind;
    int index;

    static constexpr int tag_ded = 0;
    static constexpr int tag_shr = 1;
    static constexpr int tag_arrival = 2;
  };

  const NetworkTopology& topo_;
  Policy& policy_;
  SimConfig cfg_;
  std::vector<double> rates_;

  SimulationState state_;
  CostAccumulator cost_;
  std::vector<RandomStream> arrival_streams_, ded_streams_, shr_streams_;
  std::vector<DistributionSpec> arrival_specs_, ded_specs_, shr_specs_;
  std::vector<double> next_arrival_;
  std::uint64_t seq_no_ = 0;
  std::size_t grid_pos_ = 0;
  long long max_queue_ = 0;

  struct EventOrder {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.rank != b.rank) return a.rank > b.rank;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, EventOrder> events_;

  void push_event(double time, int rank, int kind, int index) {
    events_.push(Event{time, rank, seq_no_++, kind, index});
  }

  void schedule_next_arrival(int j) {
    if (rates_[j] <= 0.0) return;  // zero-rate types never arrive
    next_arrival_[j] += arrival_specs_[j].sample(arrival_streams_[j]) / rates_[j];
    push_event(next_arrival_[j], /*rank=*/1, Event::tag_arrival, j);
  }

  void handle_arrival(int j) {
    state_.arrivals[j] += 1;
    state_.njobs[j] += 1;
    for (int k : topo_.dedicated_of(j)) {
      state_.ded_pre[k] += 1;
      max_queue_ = std::max(max_queue_, state_.ded_pre[k]);
    }
    for (int c : topo_.classes_of_type(j)) {
      state_.shr_pre[c] += 1;
      state_.shr_fifo[c].push_back(state_.clock);
      max_queue_ = std::max(max_queue_, state_.shr_pre[c]);
    }
    schedule_next_arrival(j);
    for (int k : topo_.dedicated_of(j)) dispatch_dedicated(k);
    for (int i : topo_.servers_of_type(j)) dispatch_shared(i);
  }

  void handle_ded_completion(int k) {
    ServerSlot& slot = state_.ded_server[k];
    state_.ded_busy[k] += slot.duration;
    slot.serving = -1;
    state_.complete_dedicated(k);
    dispatch_dedicated(k);
  }

  void handle_shr_completion(int i) {
    ServerSlot& slot = state_.shr_server[i];
    const int c = slot.serving;
    state_.shr_busy[c] += slot.duration;
    slot.serving = -1;
    state_.complete_shared(c);
    policy_.on_completion(state_, i);
    dispatch_shared(i);
  }

  void dispatch_dedicated(int k) {
    ServerSlot& slot = state_.ded_server[k];
    if (slot.busy() || state_.ded_pre[k] == 0) return;
    slot.serving = topo_.dedicated[k].type;
    slot.start = state_.clock;
    slot.duration = ded_specs_[k].sample(ded_streams_[k]);
    push_event(state_.clock + slot.duration, /*rank=*/0, Event::tag_ded, k);
  }

  void dispatch_shared(int i) {
    ServerSlot& slot = state_.shr_server[i];
    if (slot.busy()) return;
    bool any = false;
    for (int c : topo_.classes_of_server(i)) any = any || state_.shr_pre[c] > 0;
    if (!any) return;
    const int c = policy_.decide(state_, i);
    if (c == Policy::idle_decision) {
      throw SimulationError("policy idles shared server " + std::to_string(i + 1) +
                            " with work waiting at t=" + std::to_string(state_.clock));
    }
    if (c < 0 || c >= topo_.class_count() || topo_.class_server(c) != i ||
        state_.shr_pre[c] == 0) {
      throw SimulationError("policy chose an invalid or empty buffer at shared server " +
                            std::to_string(i + 1) + " at t=" + std::to_string(state_.clock));
    }
    slot.serving = c;
    slot.start = state_.clock;
    slot.duration = shr_specs_[c].sample(shr_streams_[c]);
    push_event(state_.clock + slot.duration, /*rank=*/0, Event::tag_shr, i);
  }

  void emit_row(RunResult& out, double t) const {
    TrajectoryRow row;
    row.t = t;
    row.ded_pre = state_.ded_pre;
    row.shr_pre = state_.shr_pre;
    row.ded_post = state_.ded_post;
    row.shr_post = state_.shr_post;
    row.njobs = state_.njobs;
    row.workload.resize(topo_.shared_count());
    for (int i = 0; i < topo_.shared_count(); ++i) row.workload[i] = state_.workload(i);
    out.trajectory.push_back(std::move(row));
  }

  void check_all() const {
    const double t = state_.clock;
    const double tol = 1e-9;
    for (int k = 0; k < topo_.dedicated_count(); ++k) {
      const int j = topo_.dedicated[k].type;
      if (state_.ded_pre[k] !=
          state_.ded_initial[k] + state_.arrivals[j] - state_.ded_completions[k]) {
        throw SimulationError("flow identity violated on dedicated server " + std::to_string(k + 1));
      }
      const double busy = state_.ded_busy_at(k, t);
      if (busy < -tol || busy > t + tol) {
        throw SimulationError("idle-time identity violated on dedicated server " + std::to_string(k + 1));
      }
      if (!state_.ded_server[k].busy() && state_.ded_pre[k] > 0) {
        throw SimulationError("work conservation violated on dedicated server " + std::to_string(k + 1));
      }
      if (state_.ded_server[k].busy()) {
        const double elapsed = t - state_.ded_server[k].start;
        if (elapsed < -tol || elapsed > state_.ded_server[k].duration + tol) {
          throw SimulationError("service accounting violated on dedicated server " + std::to_string(k + 1));
        }
      }
    }
    for (int c = 0; c < topo_.class_count(); ++c) {
      const int j = topo_.class_type(c);
      if (state_.shr_pre[c] !=
          state_.shr_initial[c] + state_.arrivals[j] - state_.shr_completions[c]) {
        throw SimulationError("flow identity violated on shared class " + std::to_string(c));
      }
      if (state_.shr_fifo[c].size() != static_cast<std::size_t>(state_.shr_pre[c])) {
        throw SimulationError("FIFO bookkeeping out of sync on shared class " + std::to_string(c));
      }
    }
    for (int i = 0; i < topo_.shared_count(); ++i) {
      const double busy = state_.shr_busy_server_at(i, t);
      if (busy < -tol || busy > t + tol) {
        throw SimulationError("idle-time identity violated on shared server " + std::to_string(i + 1));
      }
      if (!state_.shr_server[i].busy()) {
        for (int c : topo_.classes_of_server(i)) {
          if (state_.shr_pre[c] > 0) {
            throw SimulationError("work conservation violated on shared server " + std::to_string(i + 1));
          }
        }
      }
    }
    for (int j = 0; j < topo_.type_count(); ++j) {
      state_.job_count(j);  // throws on any per-leg mismatch
      long long min_post = std::numeric_limits<long long>::max();
      for (int k : topo_.dedicated_of(j)) min_post = std::min(min_post, state_.ded_post[k]);
      for (int c : topo_.classes_of_type(j)) min_post = std::min(min_post, state_.shr_post[c]);
      if (min_post != std::numeric_limits<long long>::max() && min_post != 0) {
        throw SimulationError("join synchronization violated for type " + std::to_string(j + 1));
      }
    }
  }
};

}  // namespace fjlab
