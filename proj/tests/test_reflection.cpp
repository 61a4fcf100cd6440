#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fjlab/reflection.hpp"
#include "support/fixtures.hpp"
#include "support/rbm_oracle.hpp"

using namespace fjlab;

TEST_CASE("reflection map on the three canonical paths", "[reflection]") {
  SECTION("nonnegative path is untouched") {
    std::vector<double> x;
    for (int n = 0; n <= 20; ++n) x.push_back(0.1 * n);
    const auto r = reflect_1d(x);
    for (std::size_t n = 0; n < x.size(); ++n) {
      REQUIRE(r.psi[n] == 0.0);
      REQUIRE(r.phi[n] == x[n]);
    }
  }
  SECTION("negative drift is fully pushed") {
    std::vector<double> x;
    for (int n = 0; n <= 20; ++n) x.push_back(-0.1 * n);
    const auto r = reflect_1d(x);
    for (std::size_t n = 0; n < x.size(); ++n) {
      REQUIRE(r.psi[n] == Catch::Approx(-x[n]).margin(1e-15));
      REQUIRE(r.phi[n] == 0.0);
    }
  }
  SECTION("hand-evaluated running maximum") {
    const auto r = reflect_1d({0.0, -1.0, 1.0});
    REQUIRE(r.psi == std::vector<double>{0.0, 1.0, 1.0});
    REQUIRE(r.phi == std::vector<double>{0.0, 0.0, 2.0});
  }
}

TEST_CASE("discrete complementarity holds exactly", "[reflection]") {
  RandomStream rng(606, {StreamKind::noise, 20, 0});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x = {0.0};
    for (int n = 0; n < 200; ++n) {
      x.push_back(x.back() + 0.3 * (rng.next_unit() - 0.55));
    }
    const auto r = reflect_1d(x);
    double pairing = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double dpsi = r.psi[n] - (n == 0 ? 0.0 : r.psi[n - 1]);
      pairing += r.phi[n] * dpsi;
    }
    REQUIRE(pairing == 0.0);  // pushing happens only at zero
  }
}

namespace {

DiffusionData scalar_data(double drift, double var, double refl = 1.0) {
  DiffusionData d;
  d.coords = {{true, 0}};
  d.drift = Eigen::VectorXd::Constant(1, drift);
  d.covariance = Eigen::MatrixXd::Constant(1, 1, var);
  d.reflection = Eigen::VectorXd::Constant(1, refl);
  return d;
}

}  // namespace

TEST_CASE("degenerate SRBM paths", "[reflection]") {
  SECTION("zero data stays at the origin") {
    SrbmSimulator sim(scalar_data(0.0, 0.0));
    RandomStream rng(1, {StreamKind::noise, 0, 0});
    const auto path = sim.simulate(1.0, 0.01, rng);
    REQUIRE(path.w.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("deterministic negative drift is absorbed at zero") {
    SrbmSimulator sim(scalar_data(-1.0, 0.0));
    RandomStream rng(2, {StreamKind::noise, 0, 0});
    const auto path = sim.simulate(1.0, 0.01, rng);
    REQUIRE(path.w.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("indefinite covariance is rejected") {
    DiffusionData d = scalar_data(0.0, -1.0);
    REQUIRE_THROWS(SrbmSimulator(d));
  }
}

TEST_CASE("Euler RBM matches the transition-density oracle", "[reflection][slow]") {
  const double theta = -0.5, sigma2 = 1.0, t = 1.0, dt = 1e-4;
  const double exact = testing::rbm_mean(t, theta, sigma2);
  SrbmSimulator sim(scalar_data(theta, sigma2));
  const long long paths = 3000;
  double sum = 0.0, sum2 = 0.0;
  for (long long p = 0; p < paths; ++p) {
    RandomStream rng(9999, {StreamKind::noise, static_cast<std::uint32_t>(p), 0});
    const Eigen::MatrixXd x = sim.free_path(t, dt, rng);
    const Eigen::MatrixXd w = SrbmSimulator::reflect(x);
    const double value = w(0, w.cols() - 1);
    sum += value;
    sum2 += value * value;
  }
  const double mean = sum / paths;
  const double se = std::sqrt((sum2 / paths - mean * mean) / paths);
  INFO("exact " << exact << " mc " << mean << " se " << se);
  REQUIRE(std::abs(mean - exact) <= 3.0 * se + 0.6 * std::sqrt(sigma2 * dt));
}

TEST_CASE("lower-bound estimator on degenerate data is deterministic", "[reflection]") {
  const auto seq = testing::make_figure2();
  auto data = diffusion_data(seq);
  data.covariance.setZero();
  data.drift.setZero();
  const auto est = estimate_lower_bound(data, seq.base, {1.0}, 50, 0.01, 7, {0.0, 1.0});
  REQUIRE(est.mean[0] == 0.0);
  REQUIRE(est.se[0] == 0.0);
  REQUIRE(est.failures == 0);
  // epsilon = 0: P(z > 0) is a probability.
  REQUIRE(est.exceedance[0].second >= 0.0);
  REQUIRE(est.exceedance[0].second <= 1.0);
}

TEST_CASE("lower-bound estimator concentrates on the figure-2 instance",
          "[reflection][slow]") {
  const auto seq = testing::make_figure2();
  const auto data = diffusion_data(seq);
  const auto est = estimate_lower_bound(data, seq.base, {0.5, 1.0}, 2000, 1e-3, 11, {0.0});
  REQUIRE(est.failures == 0);
  REQUIRE(est.mean[1] > 0.0);
  REQUIRE(est.se[1] < 0.05 * est.mean[1]);
  REQUIRE(est.exceedance[0].second <= 1.0);
}

TEST_CASE("off-grid evaluation times are rejected", "[reflection]") {
  const auto seq = testing::make_figure2();
  const auto data = diffusion_data(seq);
  REQUIRE_THROWS(estimate_lower_bound(data, seq.base, {0.1234}, 10, 1e-2, 3));
}
