#pragma once

// Fluid and diffusion scaling of raw trajectories: time compresses by r^2,
// space by r^2 (fluid) or r (diffusion).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fjlab/simulation.hpp"
#include "fjlab/topology.hpp"

namespace fjlab {

enum class Scaling { fluid, diffusion };

struct ScaledPath {
  Scaling scaling = Scaling::diffusion;
  int r = 1;
  std::vector<double> times;   // scaled time grid
  Eigen::MatrixXd ded;         // rows: dedicated legs
  Eigen::MatrixXd shr;         // rows: shared classes
  Eigen::MatrixXd ded_post;
  Eigen::MatrixXd shr_post;
  Eigen::MatrixXd workload;    // rows: shared servers
  Eigen::MatrixXd njobs;       // rows: types
};

// The raw trajectory must contain a sample at r^2 * t for every requested
// scaled time t.
inline ScaledPath scale_path(const std::vector<TrajectoryRow>& raw,
                             const NetworkTopology& topo, int r, Scaling scaling,
                             const std::vector<double>& scaled_times) {
  if (r <= 0) throw std::invalid_argument("scale_path: r must be positive");
  const double r2 = static_cast<double>(r) * r;
  const double space = scaling == Scaling::fluid ? r2 : static_cast<double>(r);

  ScaledPath out;
  out.scaling = scaling;
  out.r = r;
  out.times = scaled_times;
  const int n = static_cast<int>(scaled_times.size());
  out.ded.resize(topo.dedicated_count(), n);
  out.shr.resize(topo.class_count(), n);
  out.ded_post.resize(topo.dedicated_count(), n);
  out.shr_post.resize(topo.class_count(), n);
  out.workload.resize(topo.shared_count(), n);
  out.njobs.resize(topo.type_count(), n);

  std::size_t cursor = 0;
  for (int s = 0; s < n; ++s) {
    const double raw_t = r2 * scaled_times[s];
    while (cursor < raw.size() && raw[cursor].t < raw_t - 1e-9) ++cursor;
    if (cursor >= raw.size() || std::abs(raw[cursor].t - raw_t) > 1e-9) {
      throw std::invalid_argument("scale_path: raw trajectory has no sample at t=" +
                                  std::to_string(raw_t) + " (horizon too short?)");
    }
    const TrajectoryRow& row = raw[cursor];
    for (int k = 0; k < topo.dedicated_count(); ++k) {
      out.ded(k, s) = row.ded_pre[k] / space;
      out.ded_post(k, s) = row.ded_post[k] / space;
    }
    for (int c = 0; c < topo.class_count(); ++c) {
      out.shr(c, s) = row.shr_pre[c] / space;
      out.shr_post(c, s) = row.shr_post[c] / space;
    }
    for (int j = 0; j < topo.type_count(); ++j) out.njobs(j, s) = row.njobs[j] / space;
    for (int i = 0; i < topo.shared_count(); ++i) {
      out.workload(i, s) = row.workload[i] / space;
      double from_queues = 0.0;
      for (int c : topo.classes_of_server(i)) {
        from_queues += out.shr(c, s) / topo.class_service(c).rate;
      }
      if (std::abs(from_queues - out.workload(i, s)) > 1e-9) {
        throw std::logic_error("scale_path: workload identity violated");
      }
    }
  }
  return out;
}

}  // namespace fjlab
