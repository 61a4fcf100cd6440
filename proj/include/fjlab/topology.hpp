#pragma once

// Static description of a fork-join network instance: job types, shared and
// dedicated servers, rates, holding costs, and the heavy-traffic sequence of
// systems indexed by r. Everything here is immutable after construction and
// safe to share across concurrent replications.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjlab/rng.hpp"

namespace fjlab {

struct SharedService {
  double rate = 1.0;  // mu_ij
  double scv = 1.0;
  Family family = Family::exponential;
};

struct DedicatedServer {
  int type = 0;  // job type j served by this server
  double rate = 1.0;
  double scv = 1.0;
  Family family = Family::exponential;
};

class NetworkTopology {
 public:
  // Per job type j.
  std::vector<double> arrival_rate;  // limiting lambda_j
  std::vector<double> arrival_scv;   // beta_j^2
  std::vector<Family> arrival_family;
  std::vector<double> holding_cost;
  double discount = 1.0;

  // Dedicated servers in global k order; dedicated_of(j) gives K_j.
  std::vector<DedicatedServer> dedicated;

  // Shared server i processes server_types[i] (ascending type indices) with
  // service parameters shared_service[i] aligned entrywise.
  std::vector<std::vector<int>> server_types;
  std::vector<std::vector<SharedService>> shared_service;

  int type_count() const { return static_cast<int>(arrival_rate.size()); }
  int shared_count() const { return static_cast<int>(server_types.size()); }
  int dedicated_count() const { return static_cast<int>(dedicated.size()); }
  // Total number of (i, j) shared classes.
  int class_count() const { return static_cast<int>(class_server_.size()); }

  // Flat index of the (i, j) class, or -1 when server i does not serve j.
  int class_index(int i, int j) const {
    const auto& types = server_types[i];
    const auto it = std::lower_bound(types.begin(), types.end(), j);
    if (it == types.end() || *it != j) return -1;
    return class_offset_[i] + static_cast<int>(it - types.begin());
  }
  int class_server(int c) const { return class_server_[c]; }
  int class_type(int c) const { return class_type_[c]; }
  const SharedService& class_service(int c) const {
    return shared_service[class_server_[c]][c - class_offset_[class_server_[c]]];
  }
  const std::vector<int>& classes_of_server(int i) const { return server_classes_[i]; }
  const std::vector<int>& classes_of_type(int j) const { return type_classes_[j]; }
  const std::vector<int>& dedicated_of(int j) const { return type_dedicated_[j]; }
  const std::vector<int>& servers_of_type(int j) const { return type_servers_[j]; }

  // Dimension of the LP parameter vector b = (q_k, w_i).
  int b_dim() const { return dedicated_count() + shared_count(); }

  // Must be called once after the public fields are filled in.
  void finalize() {
    const int J = type_count();
    const int I = shared_count();
    if (static_cast<int>(arrival_scv.size()) != J ||
        static_cast<int>(arrival_family.size()) != J ||
        static_cast<int>(holding_cost.size()) != J ||
        static_cast<int>(shared_service.size()) != I) {
      throw std::invalid_argument("topology arrays have inconsistent sizes");
    }
    class_offset_.assign(I, 0);
    class_server_.clear();
    class_type_.clear();
    server_classes_.assign(I, {});
    type_classes_.assign(J, {});
    type_servers_.assign(J, {});
    type_dedicated_.assign(J, {});
    int c = 0;
    for (int i = 0; i < I; ++i) {
      if (shared_service[i].size() != server_types[i].size()) {
        throw std::invalid_argument("shared server service list misaligned");
      }
      if (!std::is_sorted(server_types[i].begin(), server_types[i].end())) {
        throw std::invalid_argument("server type lists must be ascending");
      }
      class_offset_[i] = c;
      for (int j : server_types[i]) {
        if (j < 0 || j >= J) throw std::invalid_argument("type index out of range");
        class_server_.push_back(i);
        class_type_.push_back(j);
        server_classes_[i].push_back(c);
        type_classes_[j].push_back(c);
        type_servers_[j].push_back(i);
        ++c;
      }
    }
    for (int k = 0; k < dedicated_count(); ++k) {
      const int j = dedicated[k].type;
      if (j < 0 || j >= J) throw std::invalid_argument("dedicated type out of range");
      type_dedicated_[j].push_back(k);
    }
  }

 private:
  std::vector<int> class_offset_;
  std::vector<int> class_server_;
  std::vector<int> class_type_;
  std::vector<std::vector<int>> server_classes_;
  std::vector<std::vector<int>> type_classes_;
  std::vector<std::vector<int>> type_servers_;
  std::vector<std::vector<int>> type_dedicated_;
};

enum class ValidationMode { strict, lenient };

// Violations are data, not failures; an empty list means the instance passes
// the chosen mode. Lenient mode checks only shape and positivity so that
// degenerate unit-test topologies (single-type shared servers, zero arrival
// rates) can run.
inline std::vector<std::string> validate(const NetworkTopology& topo,
                                         ValidationMode mode) {
  std::vector<std::string> out;
  const int J = topo.type_count();
  const int I = topo.shared_count();
  auto add = [&out](const std::string& msg) { out.push_back(msg); };

  if (J == 0) add("no job types defined");
  if (topo.discount <= 0.0) add("discount rate must be positive");
  double max_h = 0.0;
  for (int j = 0; j < J; ++j) {
    if (topo.holding_cost[j] < 0.0) add("holding cost of type " + std::to_string(j + 1) + " is negative");
    max_h = std::max(max_h, topo.holding_cost[j]);
    if (topo.arrival_rate[j] < 0.0) add("arrival rate of type " + std::to_string(j + 1) + " is negative");
    if (mode == ValidationMode::strict && topo.arrival_rate[j] <= 0.0)
      add("arrival rate of type " + std::to_string(j + 1) + " must be positive");
  }
  if (J > 0 && max_h <= 0.0) add("at least one holding cost must be positive");
  for (int k = 0; k < topo.dedicated_count(); ++k) {
    if (topo.dedicated[k].rate <= 0.0)
      add("service rate of dedicated server " + std::to_string(k + 1) + " must be positive");
  }
  for (int i = 0; i < I; ++i) {
    if (topo.server_types[i].empty())
      add("shared server " + std::to_string(i + 1) + " serves no types");
    for (const auto& svc : topo.shared_service[i]) {
      if (svc.rate <= 0.0)
        add("shared server " + std::to_string(i + 1) + " has a non-positive service rate");
    }
  }
  if (mode == ValidationMode::lenient) return out;

  for (int j = 0; j < J; ++j) {
    if (topo.servers_of_type(j).empty())
      add("type " + std::to_string(j + 1) + " is not processed by any shared server");
  }
  for (int i = 0; i < I; ++i) {
    if (topo.server_types[i].size() < 2)
      add("shared server " + std::to_string(i + 1) + " must process at least two job types");
    double load = 0.0;
    for (int c : topo.classes_of_server(i)) {
      const double mu = topo.class_service(c).rate;
      const double lam = topo.arrival_rate[topo.class_type(c)];
      load += lam / mu;
      if (mu <= lam)
        add("shared server " + std::to_string(i + 1) + " must have mu_ij > lambda_j for type " +
            std::to_string(topo.class_type(c) + 1));
    }
    if (std::abs(load - 1.0) > 1e-9)
      add("heavy-traffic condition violated at shared server " + std::to_string(i + 1) +
          ": sum lambda_j/mu_ij = " + std::to_string(load) + " (assumption 2 part 2 requires 1)");
  }
  return out;
}

// Heavy-traffic sequence: the r-th system runs at lambda_j^r = lambda_j + a_j/r,
// which makes the drift conditions finite-r identities rather than limits.
struct HeavyTrafficSequence {
  NetworkTopology base;
  std::vector<double> perturbation;  // a_j
  std::vector<int> r_values;

  std::vector<double> rates_at(int r) const {
    if (r <= 0) throw std::invalid_argument("system index r must be positive");
    std::vector<double> rates(base.type_count());
    for (int j = 0; j < base.type_count(); ++j) {
      rates[j] = base.arrival_rate[j] + perturbation[j] / r;
      if (rates[j] <= 0.0) {
        throw std::invalid_argument("lambda^r for type " + std::to_string(j + 1) +
                                    " is not positive at r = " + std::to_string(r));
      }
    }
    return rates;
  }

  // Shared-server drift theta_i = sum_j a_j / mu_ij.
  double shared_drift(int i) const {
    double theta = 0.0;
    for (int c : base.classes_of_server(i)) {
      theta += perturbation[base.class_type(c)] / base.class_service(c).rate;
    }
    return theta;
  }

  // A dedicated server is in heavy traffic when lambda_j = mu_k; its drift is
  // then theta_k = a_j. lambda_j < mu_k is light traffic, lambda_j > mu_k is
  // rejected.
  bool dedicated_heavy(int k) const {
    const auto& d = base.dedicated[k];
    const double lam = base.arrival_rate[d.type];
    if (lam > d.rate * (1.0 + 1e-9)) {
      throw std::invalid_argument("dedicated server " + std::to_string(k + 1) +
                                  " is overloaded (lambda_j > mu_k)");
    }
    return std::abs(lam - d.rate) <= 1e-9 * std::max(1.0, d.rate);
  }
};

// Parameters of the limiting reflected Brownian motion: one coordinate per
// heavy-traffic dedicated server (grouped by type, ascending) followed by one
// per shared server (ascending).
struct DiffusionData {
  struct Coordinate {
    bool is_shared = false;
    int index = 0;  // dedicated k or shared server i
  };
  std::vector<Coordinate> coords;
  Eigen::VectorXd drift;       // Theta
  Eigen::MatrixXd covariance;  // Sigma
  Eigen::VectorXd reflection;  // diagonal of R

  int dim() const { return static_cast<int>(coords.size()); }

  // Smallest eigenvalue of the (symmetrized) covariance.
  double min_covariance_eigenvalue() const {
    if (dim() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
    return es.eigenvalues().minCoeff();
  }
  bool covariance_positive_definite(double tol = 1e-10) const {
    return min_covariance_eigenvalue() > tol;
  }
};

inline DiffusionData diffusion_data(const HeavyTrafficSequence& seq) {
  const NetworkTopology& topo = seq.base;
  DiffusionData data;
  // Heavy dedicated servers grouped by type, ascending, then shared servers.
  for (int j = 0; j < topo.type_count(); ++j) {
    for (int k : topo.dedicated_of(j)) {
      if (seq.dedicated_heavy(k)) data.coords.push_back({false, k});
    }
  }
  for (int i = 0; i < topo.shared_count(); ++i) data.coords.push_back({true, i});

  const int n = data.dim();
  data.drift.resize(n);
  data.reflection.resize(n);
  data.covariance = Eigen::MatrixXd::Zero(n, n);

  for (int a = 0; a < n; ++a) {
    const auto& ca = data.coords[a];
    if (ca.is_shared) {
      data.drift(a) = seq.shared_drift(ca.index);
      data.reflection(a) = 1.0;
    } else {
      data.drift(a) = seq.perturbation[topo.dedicated[ca.index].type];
      data.reflection(a) = topo.dedicated[ca.index].rate;
    }
  }

  auto mu_shared = [&topo](int i, int j) {
    const int c = topo.class_index(i, j);
    return topo.class_service(c).rate;
  };
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const auto& ca = data.coords[a];
      const auto& cb = data.coords[b];
      double value = 0.0;
      if (!ca.is_shared && !cb.is_shared) {
        const int j = topo.dedicated[ca.index].type;
        if (topo.dedicated[cb.index].type == j) {
          value = topo.arrival_rate[j] *
                  (topo.arrival_scv[j] +
                   (ca.index == cb.index ? topo.dedicated[ca.index].scv : 0.0));
        }
      } else if (!ca.is_shared && cb.is_shared) {
        const int j = topo.dedicated[ca.index].type;
        const int i = cb.index;
        if (topo.class_index(i, j) >= 0) {
          value = topo.arrival_rate[j] * topo.arrival_scv[j] / mu_shared(i, j);
        }
      } else if (ca.is_shared && !cb.is_shared) {
        const int j = topo.dedicated[cb.index].type;
        const int i = ca.index;
        if (topo.class_index(i, j) >= 0) {
          value = topo.arrival_rate[j] * topo.arrival_scv[j] / mu_shared(i, j);
        }
      } else {
        const int i = ca.index;
        const int m = cb.index;
        for (int c : topo.classes_of_server(i)) {
          const int j = topo.class_type(c);
          const int cm = topo.class_index(m, j);
          if (cm < 0) continue;
          const double scv_term = topo.arrival_scv[j] + (i == m ? topo.class_service(c).scv : 0.0);
          value += topo.arrival_rate[j] * scv_term /
                   (topo.class_service(c).rate * topo.class_service(cm).rate);
        }
      }
      data.covariance(a, b) = value;
    }
  }
  return data;
}

}  // namespace fjlab
