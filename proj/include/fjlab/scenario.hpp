#pragma once

// Scenario files bind a network instance, the heavy-traffic sequence, the
// policy selection and the experiment plan. See the README for the schema.
// Every value the loader settles on, including defaults, lands in
// Scenario::resolved so the run manifest can echo the exact configuration.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjlab/experiment.hpp"
#include "fjlab/policies.hpp"
#include "fjlab/toml.hpp"
#include "fjlab/topology.hpp"

namespace fjlab {

struct Scenario {
  std::string title;
  HeavyTrafficSequence sequence;
  std::string policy_name = "proposed";
  TieRule tie_rule = TieRule::paper;
  ExperimentPlan plan;
  std::map<std::string, std::string> resolved;
};

namespace scenario_detail {

inline Family family_from(const std::string& name, const std::string& key) {
  if (name == "exponential") return Family::exponential;
  if (name == "erlang") return Family::erlang;
  if (name == "uniform") return Family::uniform;
  if (name == "deterministic") return Family::deterministic;
  if (name == "hyperexp2") return Family::hyperexp2;
  throw toml::ParseError("key '" + key + "': unknown distribution family '" + name + "'");
}

class Reader {
 public:
  Reader(const toml::Table& table, std::map<std::string, std::string>& resolved)
      : table_(table), resolved_(resolved) {}

  double number(const std::string& key) {
    const double v = table_.get(key).as_double(key);
    resolved_[key] = toml::Value{toml::Value::Kind::floating, false, 0, v, "", {}}.render();
    return v;
  }
  double number_or(const std::string& key, double fallback) {
    return table_.has(key) ? number(key) : record_default(key, fallback);
  }
  long long integer(const std::string& key) {
    const long long v = table_.get(key).as_int(key);
    resolved_[key] = std::to_string(v);
    return v;
  }
  long long integer_or(const std::string& key, long long fallback) {
    if (!table_.has(key)) {
      resolved_[key] = std::to_string(fallback);
      return fallback;
    }
    return integer(key);
  }
  std::string text(const std::string& key) {
    const std::string v = table_.get(key).as_string(key);
    resolved_[key] = "\"" + v + "\"";
    return v;
  }
  std::string text_or(const std::string& key, const std::string& fallback) {
    if (!table_.has(key)) {
      resolved_[key] = "\"" + fallback + "\"";
      return fallback;
    }
    return text(key);
  }
  std::vector<double> numbers(const std::string& key) {
    record_raw(key);
    return table_.get(key).as_double_list(key);
  }
  std::vector<double> numbers_or(const std::string& key, std::vector<double> fallback) {
    if (!table_.has(key)) {
      toml::Value v;
      v.kind = toml::Value::Kind::array;
      for (double x : fallback) v.items.push_back({toml::Value::Kind::floating, false, 0, x, "", {}});
      resolved_[key] = v.render();
      return fallback;
    }
    return numbers(key);
  }
  std::vector<long long> integers(const std::string& key) {
    record_raw(key);
    return table_.get(key).as_int_list(key);
  }
  std::vector<std::string> texts(const std::string& key) {
    record_raw(key);
    return table_.get(key).as_string_list(key);
  }
  std::vector<std::string> texts_or(const std::string& key, std::vector<std::string> fallback) {
    if (!table_.has(key)) {
      toml::Value v;
      v.kind = toml::Value::Kind::array;
      for (const auto& s : fallback) v.items.push_back({toml::Value::Kind::string, false, 0, 0.0, s, {}});
      resolved_[key] = v.render();
      return fallback;
    }
    return texts(key);
  }
  bool flag_or(const std::string& key, bool fallback) {
    if (!table_.has(key)) {
      resolved_[key] = fallback ? "true" : "false";
      return fallback;
    }
    const bool v = table_.get(key).as_bool(key);
    resolved_[key] = v ? "true" : "false";
    return v;
  }
  bool has(const std::string& key) const { return table_.has(key); }

 private:
  double record_default(const std::string& key, double v) {
    resolved_[key] = toml::Value{toml::Value::Kind::floating, false, 0, v, "", {}}.render();
    return v;
  }
  void record_raw(const std::string& key) { resolved_[key] = table_.get(key).render(); }

  const toml::Table& table_;
  std::map<std::string, std::string>& resolved_;
};

}  // namespace scenario_detail

inline Scenario scenario_from_table(const toml::Table& table) {
  using scenario_detail::family_from;
  Scenario sc;
  scenario_detail::Reader read(table, sc.resolved);

  sc.title = read.text_or("title", "");
  NetworkTopology topo;
  topo.discount = read.number_or("discount", 1.0);

  const std::vector<int> type_ids = table.section_indices("types.");
  if (type_ids.empty()) throw toml::ParseError("scenario defines no [types.N] sections");
  for (std::size_t expect = 0; expect < type_ids.size(); ++expect) {
    if (type_ids[expect] != static_cast<int>(expect) + 1) {
      throw toml::ParseError("[types.N] sections must be numbered 1..J consecutively");
    }
  }
  std::vector<double> perturbation;
  for (int id : type_ids) {
    const std::string at = "types." + std::to_string(id) + ".";
    topo.arrival_rate.push_back(read.number(at + "arrival_rate"));
    topo.arrival_scv.push_back(read.number_or(at + "arrival_scv", 1.0));
    topo.arrival_family.push_back(
        family_from(read.text_or(at + "arrival_family", "exponential"), at + "arrival_family"));
    topo.holding_cost.push_back(read.number(at + "holding_cost"));
    perturbation.push_back(read.number_or(at + "perturbation", 0.0));
  }
  const int J = static_cast<int>(type_ids.size());

  std::vector<long long> initial_dedicated;
  for (int id : table.section_indices("dedicated.")) {
    const std::string at = "dedicated." + std::to_string(id) + ".";
    DedicatedServer d;
    const long long j = read.integer(at + "type");
    if (j < 1 || j > J) throw toml::ParseError("key '" + at + "type' is out of range");
    d.type = static_cast<int>(j) - 1;
    d.rate = read.number(at + "rate");
    d.scv = read.number_or(at + "scv", 1.0);
    d.family = family_from(read.text_or(at + "family", "exponential"), at + "family");
    topo.dedicated.push_back(d);
    initial_dedicated.push_back(read.integer_or(at + "initial", 0));
  }

  std::vector<long long> initial_shared;
  const std::vector<int> shared_ids = table.section_indices("shared.");
  if (shared_ids.empty()) throw toml::ParseError("scenario defines no [shared.N] sections");
  for (int id : shared_ids) {
    const std::string at = "shared." + std::to_string(id) + ".";
    const auto types = read.integers(at + "types");
    const auto rates = read.numbers(at + "rates");
    std::vector<double> scvs(types.size(), 1.0);
    if (read.has(at + "scvs")) scvs = read.numbers(at + "scvs");
    std::vector<std::string> families(types.size(), "exponential");
    if (read.has(at + "families")) families = read.texts(at + "families");
    if (rates.size() != types.size() || scvs.size() != types.size() ||
        families.size() != types.size()) {
      throw toml::ParseError("section [shared." + std::to_string(id) +
                             "]: types/rates/scvs/families lengths differ");
    }
    std::vector<long long> initial(types.size(), 0);
    if (read.has(at + "initial")) initial = read.integers(at + "initial");
    if (initial.size() != types.size()) {
      throw toml::ParseError("section [shared." + std::to_string(id) +
                             "]: initial has the wrong length");
    }

    // Types must be ascending for the flat class order to be well defined.
    std::vector<std::size_t> order(types.size());
    for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
    std::sort(order.begin(), order.end(),
              [&types](std::size_t a, std::size_t b) { return types[a] < types[b]; });
    topo.server_types.emplace_back();
    topo.shared_service.emplace_back();
    for (std::size_t n : order) {
      if (types[n] < 1 || types[n] > J) {
        throw toml::ParseError("section [shared." + std::to_string(id) +
                               "]: type index out of range");
      }
      topo.server_types.back().push_back(static_cast<int>(types[n]) - 1);
      topo.shared_service.back().push_back(
          {rates[n], scvs[n], family_from(families[n], at + "families")});
      initial_shared.push_back(initial[n]);
    }
  }
  topo.finalize();

  // Distribution compatibility surfaces here rather than at sample time.
  for (int j = 0; j < J; ++j) {
    DistributionSpec::make(topo.arrival_family[j], 1.0, topo.arrival_scv[j]);
  }
  for (const auto& d : topo.dedicated) DistributionSpec::make(d.family, 1.0 / d.rate, d.scv);
  for (int c = 0; c < topo.class_count(); ++c) {
    const auto& svc = topo.class_service(c);
    DistributionSpec::make(svc.family, 1.0 / svc.rate, svc.scv);
  }

  sc.sequence.base = topo;
  sc.sequence.perturbation = perturbation;
  const auto r_list = table.has("sequence.r_values")
                          ? read.integers("sequence.r_values")
                          : std::vector<long long>{5, 20};
  if (!table.has("sequence.r_values")) sc.resolved["sequence.r_values"] = "[5, 20]";
  for (long long r : r_list) {
    if (r < 1) throw toml::ParseError("sequence.r_values entries must be positive");
    sc.sequence.r_values.push_back(static_cast<int>(r));
  }

  sc.policy_name = read.text_or("policy.name", "proposed");
  const std::string tie = read.text_or("policy.tie_rule", "paper");
  if (tie == "paper") {
    sc.tie_rule = TieRule::paper;
  } else if (tie == "rate_free") {
    sc.tie_rule = TieRule::rate_free;
  } else {
    throw toml::ParseError("policy.tie_rule must be \"paper\" or \"rate_free\"");
  }

  ExperimentPlan plan;
  plan.r_values = sc.sequence.r_values;
  plan.replications = static_cast<int>(read.integer_or("experiment.replications", 100));
  plan.horizon = read.number_or("experiment.horizon", 1.0);
  plan.checkpoints = read.numbers_or("experiment.checkpoints", {0.25, 0.5, 1.0});
  plan.tracking_dt = read.number_or("experiment.tracking_grid", 0.01);
  plan.policies = read.texts_or("experiment.policies",
                                {"proposed", "cmu_priority", "fifo_global",
                                 "longest_queue", "random_wc"});
  plan.seed = static_cast<std::uint64_t>(read.integer_or("experiment.seed", 1));
  plan.srbm_paths = read.integer_or("experiment.srbm_paths", 10000);
  plan.srbm_dt = read.number_or("experiment.srbm_dt", 1e-3);
  plan.epsilons = read.numbers_or("experiment.epsilons", {0.0, 0.5, 1.0, 2.0, 4.0});
  plan.tie_rule = sc.tie_rule;
  plan.initial_dedicated = initial_dedicated;
  plan.initial_shared = initial_shared;
  for (double c : plan.checkpoints) {
    if (c <= 0.0 || c > plan.horizon + 1e-12) {
      throw toml::ParseError("experiment.checkpoints must lie in (0, horizon]");
    }
  }
  sc.plan = plan;
  return sc;
}

inline Scenario parse_scenario(const std::string& text) {
  return scenario_from_table(toml::parse(text));
}

inline Scenario load_scenario(const std::string& path,
                              const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  toml::Table table = toml::parse(buffer.str());
  for (const std::string& o : overrides) toml::apply_override(table, o);
  return scenario_from_table(table);
}

}  // namespace fjlab
