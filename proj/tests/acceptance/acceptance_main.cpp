// Acceptance suite: every exit criterion of the laboratory, one per run
// function, each printing a single PASS/FAIL line. Run with no arguments for
// the full battery or with criterion numbers to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fjlab/csv.hpp"
#include "fjlab/experiment.hpp"
#include "fjlab/optimizer.hpp"
#include "fjlab/policies.hpp"
#include "fjlab/reflection.hpp"
#include "fjlab/scaling.hpp"
#include "fjlab/simulation.hpp"
#include "fjlab/topology.hpp"
#include "support/fixtures.hpp"
#include "support/lp_oracle.hpp"

using namespace fjlab;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

int hardware_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 2 : static_cast<int>(n);
}

// Shared experiment results for criteria 5-8; computed once on demand.
struct Lab {
  ExperimentResult wide;      // r = 20, all policies
  ExperimentResult proposed5; // r = 5, proposed only
  bool ready = false;
  static constexpr int replications = 1000;

  const Lab& ensure() {
    if (ready) return *this;
    const auto seq = testing::make_figure2();
    ExperimentPlan plan;
    plan.replications = replications;
    plan.horizon = 1.0;
    plan.checkpoints = {0.25, 0.5, 1.0};
    plan.tracking_dt = 0.01;
    plan.seed = 20240801;
    plan.jobs = hardware_jobs();
    plan.srbm_paths = 10000;
    plan.srbm_dt = 1e-3;

    plan.r_values = {20};
    plan.policies = {"proposed", "cmu_priority", "fifo_global", "longest_queue", "random_wc"};
    wide = run_experiment(seq, plan);

    plan.r_values = {5};
    plan.policies = {"proposed"};
    plan.estimate_bound = false;
    proposed5 = run_experiment(seq, plan);
    ready = true;
    return *this;
  }

  static const MetricRow& find(const ExperimentResult& result, const std::string& metric,
                               const std::string& policy, const std::string& key) {
    for (const auto& row : result.summary) {
      if (row.metric == metric && row.policy == policy && row.key == key) return row;
    }
    throw std::runtime_error("summary row not found: " + metric + "/" + policy + "/" + key);
  }
};

Lab lab;

bool criterion_1(std::string& detail) {
  const double t0 = now_seconds();
  Optimizer opt;
  RandomStream rng(424242, {StreamKind::noise, 1, 0});
  double worst_gap = 0.0, worst_restart = 0.0, worst_feas = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = testing::random_lp_case(rng);
    const LpInstance inst{&c.topo, c.b};
    const auto lp = opt.solve_lp(inst);
    if (lp.status != LpSolution::Status::optimal) {
      detail = "simplex failed on trial " + std::to_string(trial);
      return false;
    }
    const auto oracle = testing::oracle_lp(inst);
    worst_gap = std::max(worst_gap, std::abs(lp.value - oracle.value));

    const auto qp = opt.select_solution(inst, lp);
    if (qp.status != LpSolution::Status::optimal) {
      detail = "qp failed on trial " + std::to_string(trial);
      return false;
    }
    worst_feas = std::max(worst_feas, opt.feasibility_error(inst, qp));
    worst_feas = std::max(worst_feas, std::abs(qp.value - lp.value));

    LpSolution mid = lp;
    mid.y = 0.5 * (lp.y + qp.y);
    mid.q = 0.5 * (lp.q + qp.q);
    const auto restart = opt.select_solution(inst, mid);
    worst_restart = std::max(worst_restart,
                             std::max((restart.y - qp.y).lpNorm<Eigen::Infinity>(),
                                      (restart.q - qp.q).lpNorm<Eigen::Infinity>()));
  }
  const double elapsed = now_seconds() - t0;
  std::ostringstream os;
  os << "max |lp-oracle| " << worst_gap << ", max qp infeasibility/value gap " << worst_feas
     << ", max restart distance " << worst_restart << ", " << elapsed << " s";
  detail = os.str();
  return worst_gap < 1e-6 && worst_feas < 1e-8 && worst_restart < 1e-7 && elapsed < 10.0;
}

bool criterion_2(std::string& detail) {
  Optimizer opt;
  NetworkTopology topo;
  topo.arrival_rate = {0.4, 0.4};
  topo.arrival_scv = {1.0, 1.0};
  topo.arrival_family = {Family::exponential, Family::exponential};
  topo.holding_cost = {3.0, 1.0};
  topo.discount = 1.0;
  topo.server_types = {{0, 1}};
  topo.shared_service = {{{1.0, 1.0, Family::exponential}, {2.0, 1.0, Family::exponential}}};
  topo.finalize();

  Eigen::VectorXd b1(1);
  b1 << 2.0;
  const auto s1 = opt.solve_lp({&topo, b1});
  const bool first = std::abs(s1.value - 4.0) < 1e-8 && std::abs(s1.q(0)) < 1e-8 &&
                     std::abs(s1.q(1) - 4.0) < 1e-8;

  NetworkTopology with_ded = topo;
  with_ded.dedicated.push_back({0, 1.0, 1.0, Family::exponential});
  with_ded.finalize();
  Eigen::VectorXd b2(2);
  b2 << 5.0, 2.0;
  const auto s2 = opt.solve_lp({&with_ded, b2});
  const bool second = std::abs(s2.value - 15.0) < 1e-8 && std::abs(s2.q(0) - 2.0) < 1e-8 &&
                      std::abs(s2.q(1)) < 1e-8;

  NetworkTopology symmetric = topo;
  symmetric.holding_cost = {1.0, 1.0};
  symmetric.shared_service = {{{1.0, 1.0, Family::exponential}, {1.0, 1.0, Family::exponential}}};
  symmetric.finalize();
  const auto s3 = opt.select_solution({&symmetric, b1});
  const bool third = std::abs(s3.q(0) - 1.0) < 1e-8 && std::abs(s3.q(1) - 1.0) < 1e-8;

  std::ostringstream os;
  os << "z=" << s1.value << " split (" << s1.q(0) << "," << s1.q(1) << "); z=" << s2.value
     << " split (" << s2.q(0) << "," << s2.q(1) << "); tie split (" << s3.q(0) << ","
     << s3.q(1) << ")";
  detail = os.str();
  return first && second && third;
}

bool criterion_3(std::string& detail) {
  const double t0 = now_seconds();
  const auto seq = testing::make_threetype(1.0);
  RandomWcPolicy policy(4242);
  SimConfig cfg;
  cfg.r = 4;
  cfg.horizon = 1.7e5;
  cfg.seed = 20240802;
  cfg.discount = seq.base.discount;
  cfg.initial_dedicated = {11, 0, 6};
  cfg.initial_shared = {4, 3, 0, 8};
  cfg.check_invariants = true;  // every identity checked at every event
  Simulator sim(seq, policy, cfg);
  long long events = 0;
  try {
    const auto res = sim.run();
    events = res.event_count;
  } catch (const std::exception& e) {
    detail = std::string("dynamics violation: ") + e.what();
    return false;
  }
  const double elapsed = now_seconds() - t0;
  std::ostringstream os;
  os << events << " events, zero violations, " << elapsed << " s";
  detail = os.str();
  return events >= 1000000 && elapsed < 60.0;
}

bool criterion_4(std::string& detail) {
  const auto seq = testing::make_threetype(1.0);
  ProposedPolicy policy(TieRule::paper, /*keep_records=*/true);
  SimConfig cfg;
  cfg.r = 5;
  cfg.horizon = 2.2e4;
  cfg.seed = 20240803;
  cfg.discount = seq.base.discount;
  cfg.initial_dedicated = {9, 0, 5};
  cfg.initial_shared = {7, 2, 0, 9};
  Simulator sim(seq, policy, cfg);
  long long events = 0;
  try {
    // Step-3 end-state targets, the untouched excluded buffer and the
    // step-2 boundary rule are asserted inside the policy while running.
    const auto res = sim.run();
    events = res.event_count;
  } catch (const std::exception& e) {
    detail = std::string("structure violation: ") + e.what();
    return false;
  }
  // Reviews tile [0, horizon] per server with no gaps.
  std::map<int, double> last_end;
  long long step3 = 0;
  for (const auto& rec : policy.records()) {
    const double expected = last_end.count(rec.server) ? last_end[rec.server] : 0.0;
    if (std::abs(rec.start - expected) > 1e-9 || rec.end < rec.start) {
      detail = "review tiling broken at server " + std::to_string(rec.server + 1);
      return false;
    }
    last_end[rec.server] = rec.end;
    step3 += rec.step == 3 ? 1 : 0;
  }
  std::ostringstream os;
  os << events << " events, " << policy.records().size() << " reviews (" << step3
     << " step-3), zero violations";
  detail = os.str();
  return events >= 100000 && step3 > 0;
}

bool criterion_5(std::string& detail) {
  lab.ensure();
  const auto seq = testing::make_figure2();
  const auto& topo = seq.base;
  double worst_busy = 0.0, worst_queue = 0.0;
  for (const std::string policy : {"proposed", "cmu_priority"}) {
    for (int c = 0; c < topo.class_count(); ++c) {
      const std::string key = "i=1,j=" + std::to_string(topo.class_type(c) + 1);
      const double frac = Lab::find(lab.wide, "fluid_busy_frac", policy, key).value;
      const double limit = Lab::find(lab.wide, "fluid_busy_limit", policy, key).value;
      worst_busy = std::max(worst_busy, std::abs(frac - limit));
      worst_queue = std::max(worst_queue, Lab::find(lab.wide, "fluid_queue", policy, key).value);
    }
    for (int k = 0; k < topo.dedicated_count(); ++k) {
      const std::string key = "k=" + std::to_string(k + 1);
      worst_queue = std::max(worst_queue, Lab::find(lab.wide, "fluid_queue", policy, key).value);
    }
  }
  std::ostringstream os;
  os << "max |busy - lambda/mu| " << worst_busy << ", max fluid queue " << worst_queue
     << " (r=20, " << Lab::replications << " reps)";
  detail = os.str();
  return worst_busy < 0.05 && worst_queue < 0.05;
}

bool criterion_6(std::string& detail) {
  lab.ensure();
  double worst_rel = 0.0;
  for (const double t : {0.5, 1.0}) {
    const std::string key = "i=1,t=" + fjlab::detail::num_label(t);
    const double proposed = Lab::find(lab.wide, "workload_hat", "proposed", key).value;
    const double cmu = Lab::find(lab.wide, "workload_hat", "cmu_priority", key).value;
    worst_rel = std::max(worst_rel, std::abs(proposed - cmu) / cmu);
  }
  std::ostringstream os;
  os << "max relative workload difference " << 100.0 * worst_rel << "% (threshold 5%)";
  detail = os.str();
  return worst_rel < 0.05;
}

bool criterion_7(std::string& detail) {
  lab.ensure();
  const auto seq = testing::make_figure2();
  std::ostringstream os;
  bool ok = true;
  for (int c = 0; c < seq.base.class_count(); ++c) {
    const std::string key = "i=1,j=" + std::to_string(seq.base.class_type(c) + 1);
    const double at20 = Lab::find(lab.wide, "tracking_median", "proposed", key).value;
    const double at5 = Lab::find(lab.proposed5, "tracking_median", "proposed", key).value;
    os << key << ": " << at5 << " (r=5) -> " << at20 << " (r=20); ";
    ok = ok && at20 < at5;
  }
  detail = os.str();
  return ok;
}

bool criterion_8(std::string& detail) {
  lab.ensure();
  const std::string key = "t=1";
  const auto& bound = Lab::find(lab.wide, "lower_bound", "srbm_limit", key);

  bool sandwich = true;
  std::ostringstream os;
  os << "bound " << bound.value << "+-" << bound.se << "; ";
  std::map<std::string, double> gap;
  for (const std::string policy :
       {"proposed", "cmu_priority", "fifo_global", "longest_queue", "random_wc"}) {
    const auto& row = Lab::find(lab.wide, "cost_rate", policy, key);
    const double joint_se = std::sqrt(row.se * row.se + bound.se * bound.se);
    if (row.value < bound.value - 2.0 * joint_se) sandwich = false;
    gap[policy] = row.value - bound.value;
    os << policy << " gap " << gap[policy] << "; ";
  }
  const auto& rate5 = Lab::find(lab.proposed5, "cost_rate", "proposed", key);
  const double gap5 = rate5.value - bound.value;
  os << "proposed gap at r=5 " << gap5;
  detail = os.str();

  bool shrinking = gap["proposed"] < gap5;
  bool best = true;
  for (const auto& [policy, g] : gap) {
    if (policy != "proposed" && gap["proposed"] >= g) best = false;
  }
  return sandwich && shrinking && best;
}

bool criterion_9(std::string& detail) {
  {
    std::vector<double> up, down;
    for (int n = 0; n <= 30; ++n) {
      up.push_back(0.25 * n);
      down.push_back(-0.25 * n);
    }
    const auto r1 = reflect_1d(up);
    const auto r2 = reflect_1d(down);
    for (int n = 0; n <= 30; ++n) {
      if (r1.psi[n] != 0.0 || r1.phi[n] != up[n]) {
        detail = "nonnegative path altered";
        return false;
      }
      if (r2.phi[n] != 0.0 || r2.psi[n] != -down[n]) {
        detail = "negative ramp not fully pushed";
        return false;
      }
    }
    const auto r3 = reflect_1d({0.0, -1.0, 1.0});
    if (r3.psi != std::vector<double>{0.0, 1.0, 1.0} ||
        r3.phi != std::vector<double>{0.0, 0.0, 2.0}) {
      detail = "hand-evaluated reflection mismatch";
      return false;
    }
  }
  RandomStream rng(2026, {StreamKind::noise, 5, 0});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x = {0.0};
    for (int n = 0; n < 300; ++n) x.push_back(x.back() + (rng.next_unit() - 0.52));
    const auto r = reflect_1d(x);
    double pairing = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      pairing += r.phi[n] * (r.psi[n] - (n == 0 ? 0.0 : r.psi[n - 1]));
    }
    if (pairing != 0.0) {
      detail = "complementarity violated on random path " + std::to_string(trial);
      return false;
    }
  }
  detail = "three exact examples and 100 random complementarity checks";
  return true;
}

bool criterion_10(std::string& detail) {
  const auto seq = testing::make_figure2();
  const auto data = diffusion_data(seq);
  const auto gate = step_size_gate(data, seq.base, 1.0, 4000, 1e-3, 20240804);
  std::ostringstream os;
  os << "estimate " << gate.estimate << " (dt=1e-3) vs " << gate.estimate_fine
     << " (dt=5e-4), shift " << gate.shift << ", se " << gate.se;
  detail = os.str();
  return gate.shift < gate.se;
}

bool criterion_11(std::string& detail) {
  const auto seq = testing::make_figure2();
  const auto& topo = seq.base;
  RandomStream rng(80808, {StreamKind::noise, 6, 0});
  auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.next_unit(); };
  const std::vector<double> scales = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  double coarse_z = 0.0, fine_z = 0.0, coarse_q = 0.0, fine_q = 0.0;
  int pairs_used = 0;
  for (double scale : scales) {
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
    for (int p = 0; p < 84; ++p) {
      Eigen::VectorXd b1(topo.b_dim());
      for (int idx = 0; idx < b1.size(); ++idx) b1(idx) = uniform(0.0, 4.0);
      Eigen::VectorXd b2 = b1;
      for (int idx = 0; idx < b2.size(); ++idx) {
        b2(idx) = std::max(0.0, b2(idx) + uniform(-scale, scale));
      }
      pairs.emplace_back(b1, b2);
    }
    const auto probe = lipschitz_probe(topo, pairs);
    pairs_used += probe.pairs_used;
    if (scale == 1e-1) {
      coarse_z = probe.z_ratio;
      coarse_q = probe.q_ratio;
    }
    if (scale == 1e-6) {
      fine_z = probe.z_ratio;
      fine_q = probe.q_ratio;
    }
  }
  std::ostringstream os;
  os << pairs_used << " pairs; z-ratio " << coarse_z << " (1e-1) vs " << fine_z
     << " (1e-6); q-ratio " << coarse_q << " vs " << fine_q;
  detail = os.str();
  return fine_z <= 2.0 * coarse_z && fine_q <= 2.0 * coarse_q;
}

bool criterion_12(std::string& detail) {
  const auto seq = testing::make_figure2();
  ExperimentPlan plan;
  plan.r_values = {4};
  plan.policies = {"proposed", "random_wc"};
  plan.replications = 16;
  plan.horizon = 0.5;
  plan.checkpoints = {0.25, 0.5};
  plan.tracking_dt = 0.05;
  plan.seed = 1234;
  plan.srbm_paths = 500;
  plan.srbm_dt = 1e-2;

  auto render = [](const ExperimentResult& result) {
    CsvBuilder summary({"r", "policy", "metric", "key", "value", "se", "n"});
    for (const auto& row : result.summary) {
      summary.row({std::to_string(row.r), row.policy, row.metric, row.key,
                   format_double(row.value), format_double(row.se), std::to_string(row.n)});
    }
    CsvBuilder reps({"seed", "policy", "r", "cost", "bound", "maxq"});
    for (const auto& row : result.replications) {
      reps.row({std::to_string(row.seed), row.policy, std::to_string(row.r),
                format_double(row.scaled_cost), format_double(row.truncation_bound),
                std::to_string(row.max_queue)});
    }
    return summary.text() + reps.text();
  };

  plan.jobs = 1;
  const std::string first = render(run_experiment(seq, plan));
  plan.jobs = hardware_jobs();
  const std::string second = render(run_experiment(seq, plan));

  CmuPolicy p1, p2;
  SimConfig cfg;
  cfg.r = 3;
  cfg.horizon = 50.0;
  cfg.seed = 777;
  for (int g = 1; g <= 40; ++g) cfg.sample_grid.push_back(50.0 * g / 40);
  const auto t1 = Simulator(seq, p1, cfg).run();
  const auto t2 = Simulator(seq, p2, cfg).run();
  bool trajectories_equal = t1.trajectory.size() == t2.trajectory.size();
  for (std::size_t n = 0; trajectories_equal && n < t1.trajectory.size(); ++n) {
    trajectories_equal = t1.trajectory[n].shr_pre == t2.trajectory[n].shr_pre &&
                         t1.trajectory[n].ded_pre == t2.trajectory[n].ded_pre &&
                         t1.trajectory[n].workload == t2.trajectory[n].workload;
  }

  const bool csv_equal = first == second;
  std::ostringstream os;
  os << "experiment CSVs " << (csv_equal ? "byte-identical" : "DIFFER") << " across runs ("
     << fnv1a64_hex(first) << "), trajectories "
     << (trajectories_equal ? "identical" : "DIFFER");
  detail = os.str();
  return csv_equal && trajectories_equal;
}

struct Criterion {
  int id;
  const char* title;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "optimizer matches the vertex-enumeration oracle", criterion_1},
      {2, "worked LP and QP instances reproduce exactly", criterion_2},
      {3, "dynamics identities hold through a million-event fuzz", criterion_3},
      {4, "review-policy structure holds over 1e5 events", criterion_4},
      {5, "fluid busy-time and queue limits at r=20", criterion_5},
      {6, "workload means are policy-invariant within 5%", criterion_6},
      {7, "tracking error shrinks from r=5 to r=20", criterion_7},
      {8, "cost rates sandwich onto the SRBM lower bound", criterion_8},
      {9, "reflection map unit suite", criterion_9},
      {10, "halving the SRBM step moves the bound by less than one se", criterion_10},
      {11, "difference quotients stay bounded across scales", criterion_11},
      {12, "identical manifests give byte-identical outputs", criterion_12},
  };

  std::vector<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.push_back(std::atoi(argv[a]));

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), criterion.id) == wanted.end()) {
      continue;
    }
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion.id,
                criterion.title, detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
