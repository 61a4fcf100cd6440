// fjlab: scenario-driven fork-join scheduling laboratory.
//
// Subcommands: validate, simulate, experiment, lowerbound. Every run writes
// its outputs plus a manifest.json carrying the fully resolved configuration,
// the seed derivation rule and a hash of each artifact, so a run can be
// reproduced from the manifest alone.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "fjlab/csv.hpp"
#include "fjlab/experiment.hpp"
#include "fjlab/policies.hpp"
#include "fjlab/reflection.hpp"
#include "fjlab/scenario.hpp"
#include "fjlab/simulation.hpp"
#include "fjlab/topology.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ManifestWriter {
  std::string command;
  std::string scenario_path;
  std::vector<std::string> overrides;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> cli;
  std::map<std::string, std::string> outputs;  // file name -> fnv1a64 hash
  std::uint64_t root_seed = 0;

  void write(const fs::path& dir) const {
    json doc;
    doc["command"] = command;
    doc["scenario"] = scenario_path;
    doc["overrides"] = overrides;
    doc["config"] = config;
    doc["cli"] = cli;
    doc["root_seed"] = root_seed;
    doc["seed_rule"] =
        "child_seed(rep) = splitmix64(root ^ splitmix64(rep + golden)); "
        "streams keyed by (child_seed, kind, index)";
    doc["outputs"] = outputs;
    std::ofstream out(dir / "manifest.json");
    out << doc.dump(2) << "\n";
  }
};

void write_artifact(const fs::path& dir, const std::string& name, const std::string& text,
                    ManifestWriter& manifest) {
  std::ofstream out(dir / name, std::ios::binary);
  out << text;
  manifest.outputs[name] = fjlab::fnv1a64_hex(text);
}

std::uint64_t resolve_seed(const CLI::Option* seed_opt, std::uint64_t flag_value,
                           std::uint64_t scenario_value) {
  if (seed_opt->count() > 0) return flag_value;
  if (const char* env = std::getenv("FJLAB_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return scenario_value;
}

std::vector<std::string> topology_report(const fjlab::Scenario& sc) {
  std::vector<std::string> violations = validate(sc.sequence.base, fjlab::ValidationMode::strict);
  for (int r : sc.sequence.r_values) {
    try {
      sc.sequence.rates_at(r);
    } catch (const std::exception& e) {
      violations.emplace_back(e.what());
    }
  }
  try {
    for (int k = 0; k < sc.sequence.base.dedicated_count(); ++k) {
      (void)sc.sequence.dedicated_heavy(k);
    }
  } catch (const std::exception& e) {
    violations.emplace_back(e.what());
  }
  return violations;
}

std::string trajectory_csv(const fjlab::NetworkTopology& topo,
                           const std::vector<fjlab::TrajectoryRow>& rows) {
  std::vector<std::string> header = {"t"};
  for (int k = 0; k < topo.dedicated_count(); ++k) {
    header.push_back("q_ded_" + std::to_string(k + 1));
  }
  for (int c = 0; c < topo.class_count(); ++c) {
    header.push_back("q_shr_" + std::to_string(topo.class_server(c) + 1) + "_" +
                     std::to_string(topo.class_type(c) + 1));
  }
  for (int k = 0; k < topo.dedicated_count(); ++k) {
    header.push_back("qpost_ded_" + std::to_string(k + 1));
  }
  for (int c = 0; c < topo.class_count(); ++c) {
    header.push_back("qpost_shr_" + std::to_string(topo.class_server(c) + 1) + "_" +
                     std::to_string(topo.class_type(c) + 1));
  }
  for (int i = 0; i < topo.shared_count(); ++i) header.push_back("w_" + std::to_string(i + 1));
  for (int j = 0; j < topo.type_count(); ++j) header.push_back("n_" + std::to_string(j + 1));

  fjlab::CsvBuilder csv(header);
  for (const auto& row : rows) {
    std::vector<std::string> cells = {fjlab::format_double(row.t)};
    for (long long q : row.ded_pre) cells.push_back(std::to_string(q));
    for (long long q : row.shr_pre) cells.push_back(std::to_string(q));
    for (long long q : row.ded_post) cells.push_back(std::to_string(q));
    for (long long q : row.shr_post) cells.push_back(std::to_string(q));
    for (double w : row.workload) cells.push_back(fjlab::format_double(w));
    for (long long n : row.njobs) cells.push_back(std::to_string(n));
    csv.row(cells);
  }
  return csv.text();
}

std::string summary_csv(const std::vector<fjlab::MetricRow>& rows) {
  fjlab::CsvBuilder csv({"r", "policy", "metric", "key", "value", "se", "n"});
  for (const auto& row : rows) {
    csv.row({std::to_string(row.r), row.policy, row.metric, row.key,
             fjlab::format_double(row.value), fjlab::format_double(row.se),
             std::to_string(row.n)});
  }
  return csv.text();
}

// Diffusion-scaled trajectory of replication 0 for each (r, policy) pair.
std::string paths_csv(const fjlab::Scenario& sc) {
  const fjlab::NetworkTopology& topo = sc.sequence.base;
  std::vector<std::string> header = {"r", "policy", "t"};
  for (int k = 0; k < topo.dedicated_count(); ++k) {
    header.push_back("qhat_ded_" + std::to_string(k + 1));
  }
  for (int c = 0; c < topo.class_count(); ++c) {
    header.push_back("qhat_shr_" + std::to_string(topo.class_server(c) + 1) + "_" +
                     std::to_string(topo.class_type(c) + 1));
  }
  for (int i = 0; i < topo.shared_count(); ++i) header.push_back("what_" + std::to_string(i + 1));
  for (int j = 0; j < topo.type_count(); ++j) header.push_back("nhat_" + std::to_string(j + 1));
  fjlab::CsvBuilder csv(header);

  std::vector<double> grid;
  for (double t = sc.plan.tracking_dt; t < sc.plan.horizon + 1e-12; t += sc.plan.tracking_dt) {
    grid.push_back(t);
  }
  for (int r : sc.plan.r_values) {
    const double r2 = static_cast<double>(r) * r;
    for (const std::string& policy_name : sc.plan.policies) {
      const std::uint64_t rep_seed = fjlab::derive_seed(sc.plan.seed, 0);
      auto policy = fjlab::make_policy(policy_name, rep_seed, sc.plan.tie_rule);
      fjlab::SimConfig cfg;
      cfg.r = r;
      cfg.horizon = r2 * sc.plan.horizon;
      cfg.seed = rep_seed;
      cfg.discount = topo.discount / r2;
      cfg.initial_dedicated = sc.plan.initial_dedicated;
      cfg.initial_shared = sc.plan.initial_shared;
      for (double t : grid) cfg.sample_grid.push_back(r2 * t);
      fjlab::Simulator sim(sc.sequence, *policy, cfg);
      const fjlab::RunResult run = sim.run();
      const fjlab::ScaledPath path =
          scale_path(run.trajectory, topo, r, fjlab::Scaling::diffusion, grid);
      for (std::size_t s = 0; s < grid.size(); ++s) {
        std::vector<std::string> cells = {std::to_string(r), policy_name,
                                          fjlab::format_double(grid[s])};
        for (int k = 0; k < topo.dedicated_count(); ++k) {
          cells.push_back(fjlab::format_double(path.ded(k, s)));
        }
        for (int c = 0; c < topo.class_count(); ++c) {
          cells.push_back(fjlab::format_double(path.shr(c, s)));
        }
        for (int i = 0; i < topo.shared_count(); ++i) {
          cells.push_back(fjlab::format_double(path.workload(i, s)));
        }
        for (int j = 0; j < topo.type_count(); ++j) {
          cells.push_back(fjlab::format_double(path.njobs(j, s)));
        }
        csv.row(cells);
      }
    }
  }
  return csv.text();
}

std::string reps_csv(const std::vector<fjlab::ReplicationRow>& rows) {
  fjlab::CsvBuilder csv(
      {"seed", "policy", "r", "scaled_cost", "truncation_bound", "max_queue", "failed", "error"});
  for (const auto& row : rows) {
    csv.row({std::to_string(row.seed), row.policy, std::to_string(row.r),
             fjlab::format_double(row.scaled_cost), fjlab::format_double(row.truncation_bound),
             std::to_string(row.max_queue), row.failed ? "1" : "0", row.error});
  }
  return csv.text();
}

int run_validate(const std::string& path, const std::vector<std::string>& overrides) {
  const fjlab::Scenario sc = fjlab::load_scenario(path, overrides);
  const auto violations = topology_report(sc);
  if (violations.empty()) {
    std::cout << "OK\n";
    return 0;
  }
  for (const auto& v : violations) std::cout << "violation: " << v << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fork-join scheduling laboratory"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::uint64_t seed_flag = 0;
  int jobs = 1;

  auto add_common = [&](CLI::App* cmd, bool with_out) {
    cmd->add_option("scenario", scenario_path, "scenario TOML file")->required();
    cmd->add_option("--override", overrides, "key=value scenario override (repeatable)");
    if (with_out) cmd->add_option("--out", out_dir, "output directory");
  };

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a scenario against the model assumptions");
  add_common(validate_cmd, false);

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "run one replication and write the trajectory");
  add_common(simulate_cmd, true);
  int sim_r = 1;
  double sim_horizon = -1.0;
  int sim_grid = 200;
  std::string sim_policy;
  simulate_cmd->add_option("--r", sim_r, "system index r")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--horizon", sim_horizon, "raw-time horizon (default r^2 * experiment horizon)");
  simulate_cmd->add_option("--grid", sim_grid, "number of trajectory sample points")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--policy", sim_policy, "policy name (default from [policy])");
  const CLI::Option* sim_seed_opt = simulate_cmd->add_option("--seed", seed_flag, "root seed");
  bool review_log = false;
  simulate_cmd->add_flag("--review-log", review_log,
                         "write reviews.csv (proposed policy only)");

  CLI::App* experiment_cmd = app.add_subcommand("experiment", "run the scaling experiment plan");
  add_common(experiment_cmd, true);
  experiment_cmd->add_option("--jobs", jobs, "parallel replications")->check(CLI::PositiveNumber);
  const CLI::Option* exp_seed_opt = experiment_cmd->add_option("--seed", seed_flag, "root seed");
  bool want_paths = false;
  experiment_cmd->add_flag("--paths", want_paths,
                           "also write paths.csv (diffusion-scaled trajectory of replication 0)");

  CLI::App* bound_cmd = app.add_subcommand("lowerbound", "estimate the SRBM lower bound");
  add_common(bound_cmd, true);
  long long bound_paths = 0;
  double bound_dt = 0.0;
  std::vector<double> bound_times;
  bound_cmd->add_option("--paths", bound_paths, "number of SRBM paths (default from scenario)");
  bound_cmd->add_option("--dt", bound_dt, "Euler step in scaled time (default from scenario)");
  bound_cmd->add_option("--t", bound_times, "evaluation times (default experiment checkpoints)");
  const CLI::Option* bound_seed_opt = bound_cmd->add_option("--seed", seed_flag, "root seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (validate_cmd->parsed()) {
      return run_validate(scenario_path, overrides);
    }

    fjlab::Scenario sc = fjlab::load_scenario(scenario_path, overrides);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    ManifestWriter manifest;
    manifest.scenario_path = scenario_path;
    manifest.overrides = overrides;
    manifest.config = sc.resolved;

    if (simulate_cmd->parsed()) {
      const auto violations = topology_report(sc);
      if (!violations.empty()) {
        for (const auto& v : violations) std::cout << "violation: " << v << "\n";
        return 1;
      }
      manifest.command = "simulate";
      manifest.root_seed = resolve_seed(sim_seed_opt, seed_flag, sc.plan.seed);
      const std::string policy_name = sim_policy.empty() ? sc.policy_name : sim_policy;
      const double horizon =
          sim_horizon > 0.0 ? sim_horizon
                            : static_cast<double>(sim_r) * sim_r * sc.plan.horizon;

      fjlab::SimConfig cfg;
      cfg.r = sim_r;
      cfg.horizon = horizon;
      cfg.seed = fjlab::derive_seed(manifest.root_seed, 0);
      cfg.discount = sc.sequence.base.discount;
      cfg.initial_dedicated = sc.plan.initial_dedicated;
      cfg.initial_shared = sc.plan.initial_shared;
      for (int g = 1; g <= sim_grid; ++g) {
        cfg.sample_grid.push_back(horizon * g / sim_grid);
      }
      auto policy = fjlab::make_policy(policy_name, cfg.seed, sc.tie_rule, review_log);
      fjlab::Simulator sim(sc.sequence, *policy, cfg);
      const fjlab::RunResult run = sim.run();

      write_artifact(dir, "trajectory.csv", trajectory_csv(sc.sequence.base, run.trajectory),
                     manifest);
      if (review_log) {
        const auto* proposed = dynamic_cast<const fjlab::ProposedPolicy*>(policy.get());
        if (proposed == nullptr) {
          std::cerr << "error: --review-log requires the proposed policy\n";
          return 2;
        }
        fjlab::CsvBuilder reviews({"server", "start", "end", "kind", "targets", "m"});
        for (const auto& rec : proposed->records()) {
          std::string targets;
          for (std::size_t n = 0; n < rec.targets.size(); ++n) {
            if (n > 0) targets += ';';
            targets += std::to_string(rec.targets[n]);
          }
          const int m_type = rec.excluded_class >= 0
                                 ? sc.sequence.base.class_type(rec.excluded_class) + 1
                                 : 0;
          reviews.row({std::to_string(rec.server + 1), fjlab::format_double(rec.start),
                       fjlab::format_double(rec.end), std::to_string(rec.step), targets,
                       std::to_string(m_type)});
        }
        write_artifact(dir, "reviews.csv", reviews.text(), manifest);
      }
      manifest.cli = {{"r", std::to_string(sim_r)},
                      {"policy", policy_name},
                      {"horizon", fjlab::format_double(horizon)},
                      {"grid", std::to_string(sim_grid)}};
      manifest.write(dir);

      double cost = 0.0;
      for (int j = 0; j < sc.sequence.base.type_count(); ++j) {
        cost += sc.sequence.base.holding_cost[j] * run.discounted_integral[j];
      }
      std::cout << "events " << run.event_count << ", discounted cost "
                << fjlab::format_double(cost) << " (truncation bound "
                << fjlab::format_double(run.truncation_bound) << "), outputs in " << dir.string()
                << "\n";
      return 0;
    }

    if (experiment_cmd->parsed()) {
      const auto violations = topology_report(sc);
      if (!violations.empty()) {
        for (const auto& v : violations) std::cout << "violation: " << v << "\n";
        return 1;
      }
      manifest.command = "experiment";
      manifest.root_seed = resolve_seed(exp_seed_opt, seed_flag, sc.plan.seed);
      sc.plan.seed = manifest.root_seed;
      sc.plan.jobs = jobs;
      const fjlab::ExperimentResult result = run_experiment(sc.sequence, sc.plan);

      write_artifact(dir, "summary.csv", summary_csv(result.summary), manifest);
      write_artifact(dir, "reps.csv", reps_csv(result.replications), manifest);
      if (want_paths) write_artifact(dir, "paths.csv", paths_csv(sc), manifest);
      if (result.bound_available) {
        fjlab::CsvBuilder exceed({"epsilon", "probability"});
        for (const auto& [eps, prob] : result.bound.exceedance) {
          exceed.row({fjlab::format_double(eps), fjlab::format_double(prob)});
        }
        write_artifact(dir, "exceedance.csv", exceed.text(), manifest);
      }
      manifest.cli = {{"jobs", std::to_string(jobs)}};
      manifest.write(dir);
      std::cout << "experiment complete: " << result.replications.size()
                << " replications, outputs in " << dir.string() << "\n";
      return 0;
    }

    if (bound_cmd->parsed()) {
      const auto violations = topology_report(sc);
      if (!violations.empty()) {
        for (const auto& v : violations) std::cout << "violation: " << v << "\n";
        return 1;
      }
      manifest.command = "lowerbound";
      manifest.root_seed = resolve_seed(bound_seed_opt, seed_flag, sc.plan.seed);
      const long long paths = bound_paths > 0 ? bound_paths : sc.plan.srbm_paths;
      const double dt = bound_dt > 0.0 ? bound_dt : sc.plan.srbm_dt;
      std::vector<double> times = bound_times.empty() ? sc.plan.checkpoints : bound_times;
      std::sort(times.begin(), times.end());

      const fjlab::DiffusionData data = diffusion_data(sc.sequence);
      const auto est = estimate_lower_bound(data, sc.sequence.base, times, paths, dt,
                                            fjlab::derive_seed(manifest.root_seed, 0x5bbd),
                                            sc.plan.epsilons);

      fjlab::CsvBuilder csv({"t", "mean", "se", "paths", "failures"});
      for (std::size_t s = 0; s < est.times.size(); ++s) {
        csv.row({fjlab::format_double(est.times[s]), fjlab::format_double(est.mean[s]),
                 fjlab::format_double(est.se[s]), std::to_string(est.paths),
                 std::to_string(est.failures)});
      }
      write_artifact(dir, "lowerbound.csv", csv.text(), manifest);
      fjlab::CsvBuilder exceed({"epsilon", "probability"});
      for (const auto& [eps, prob] : est.exceedance) {
        exceed.row({fjlab::format_double(eps), fjlab::format_double(prob)});
      }
      write_artifact(dir, "exceedance.csv", exceed.text(), manifest);
      manifest.cli = {{"paths", std::to_string(paths)}, {"dt", fjlab::format_double(dt)}};
      manifest.write(dir);
      for (std::size_t s = 0; s < est.times.size(); ++s) {
        std::cout << "t=" << fjlab::format_double(est.times[s]) << ": "
                  << fjlab::format_double(est.mean[s]) << " +- "
                  << fjlab::format_double(est.se[s]) << "\n";
      }
      return 0;
    }
  } catch (const fjlab::toml::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
