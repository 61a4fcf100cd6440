#pragma once

// Shared test topologies and random-instance generators.

#include <Eigen/Dense>

#include <vector>

#include "fjlab/optimizer.hpp"
#include "fjlab/rng.hpp"
#include "fjlab/topology.hpp"

namespace fjlab::testing {

// Two job types, one shared server, a heavy-traffic dedicated server for
// type 1 and a light one for type 2. The canonical instance used across the
// simulation and scaling tests. scv selects the primitive variability: 0.25
// gives Erlang(4) everywhere, 1.0 gives exponential.
inline HeavyTrafficSequence make_figure2(double scv = 0.25) {
  const Family fam = scv == 1.0 ? Family::exponential : Family::erlang;
  NetworkTopology topo;
  topo.arrival_rate = {0.4, 1.2};
  topo.arrival_scv = {scv, scv};
  topo.arrival_family = {fam, fam};
  topo.holding_cost = {3.0, 1.0};
  topo.discount = 1.0;
  topo.dedicated.push_back({0, 0.4, scv, fam});  // heavy: mu = lambda_1
  topo.dedicated.push_back({1, 2.0, scv, fam});  // light
  topo.server_types = {{0, 1}};
  topo.shared_service = {{{1.0, scv, fam}, {2.0, scv, fam}}};
  topo.finalize();

  HeavyTrafficSequence seq;
  seq.base = topo;
  seq.perturbation = {-0.08, -0.24};
  seq.r_values = {5, 20};
  return seq;
}

// Single type, single shared server, deterministic primitives. Lenient only.
inline HeavyTrafficSequence make_dd1() {
  NetworkTopology topo;
  topo.arrival_rate = {1.0};
  topo.arrival_scv = {0.0};
  topo.arrival_family = {Family::deterministic};
  topo.holding_cost = {1.0};
  topo.discount = 1.0;
  topo.server_types = {{0}};
  topo.shared_service = {{{2.0, 0.0, Family::deterministic}}};
  topo.finalize();

  HeavyTrafficSequence seq;
  seq.base = topo;
  seq.perturbation = {0.0};
  seq.r_values = {1};
  return seq;
}

// Three types, two shared servers, three dedicated servers; strict-mode
// valid. Used by the fuzz and structural policy tests.
inline HeavyTrafficSequence make_threetype(double scv = 1.0) {
  const Family fam = scv == 1.0 ? Family::exponential : Family::erlang;
  NetworkTopology topo;
  topo.arrival_rate = {0.5, 0.6, 0.9};
  topo.arrival_scv = {scv, scv, scv};
  topo.arrival_family = {fam, fam, fam};
  topo.holding_cost = {2.0, 1.0, 3.0};
  topo.discount = 0.5;
  topo.dedicated.push_back({0, 0.5, scv, fam});  // heavy for type 1
  topo.dedicated.push_back({1, 1.5, scv, fam});  // light
  topo.dedicated.push_back({2, 0.9, scv, fam});  // heavy for type 3
  // server 1 serves {1,2}: 0.5/1.25 + 0.6/1.0 = 1; server 2 serves {2,3}:
  // 0.6/1.2 + 0.9/1.8 = 1.
  topo.server_types = {{0, 1}, {1, 2}};
  topo.shared_service = {{{1.25, scv, fam}, {1.0, scv, fam}},
                         {{1.2, scv, fam}, {1.8, scv, fam}}};
  topo.finalize();

  HeavyTrafficSequence seq;
  seq.base = topo;
  seq.perturbation = {-0.05, -0.06, -0.09};
  seq.r_values = {5, 20};
  return seq;
}

// Random small strict-shaped topology plus a nonnegative parameter vector,
// sized for the vertex-enumeration oracle (dimension <= 8).
struct RandomLpCase {
  NetworkTopology topo;
  Eigen::VectorXd b;
};

inline RandomLpCase random_lp_case(RandomStream& rng) {
  RandomLpCase out;
  auto uniform = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.next_unit(); };
  while (true) {
    NetworkTopology topo;
    const int J = 2 + static_cast<int>(rng.next_u64() % 2);  // 2..3
    const int I = 1 + static_cast<int>(rng.next_u64() % 2);  // 1..2
    topo.arrival_rate.assign(J, 1.0);
    topo.arrival_scv.assign(J, 1.0);
    topo.arrival_family.assign(J, Family::exponential);
    topo.holding_cost.resize(J);
    for (int j = 0; j < J; ++j) topo.holding_cost[j] = uniform(0.0, 5.0);
    topo.holding_cost[rng.next_u64() % J] = uniform(0.5, 5.0);
    topo.discount = 1.0;
    topo.server_types.assign(I, {});
    topo.shared_service.assign(I, {});
    for (int i = 0; i < I; ++i) {
      for (int j = 0; j < J; ++j) {
        if (rng.next_unit() < 0.7) {
          topo.server_types[i].push_back(j);
          topo.shared_service[i].push_back({uniform(0.5, 3.0), 1.0, Family::exponential});
        }
      }
      if (topo.server_types[i].size() < 2) {
        topo.server_types[i].clear();
        topo.shared_service[i].clear();
        for (int j = 0; j < 2; ++j) {
          topo.server_types[i].push_back(j);
          topo.shared_service[i].push_back({uniform(0.5, 3.0), 1.0, Family::exponential});
        }
      }
    }
    const int n_ded = static_cast<int>(rng.next_u64() % 4);  // 0..3
    for (int k = 0; k < n_ded; ++k) {
      const int j = static_cast<int>(rng.next_u64() % J);
      topo.dedicated.push_back({j, uniform(0.5, 3.0), 1.0, Family::exponential});
    }
    topo.finalize();
    int classes = topo.class_count();
    if (classes > 6 || J + classes > 8) continue;
    bool covered = true;
    for (int j = 0; j < J; ++j) covered = covered && !topo.servers_of_type(j).empty();
    if (!covered) continue;

    out.topo = topo;
    out.b.resize(topo.b_dim());
    for (int k = 0; k < topo.dedicated_count(); ++k) out.b(k) = uniform(0.0, 5.0);
    for (int i = 0; i < topo.shared_count(); ++i) {
      out.b(topo.dedicated_count() + i) = uniform(0.0, 4.0);
    }
    return out;
  }
}

}  // namespace fjlab::testing
