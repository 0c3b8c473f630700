#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "peakcr/distributions.hpp"
#include "peakcr/simharness.hpp"
#include "test_support.hpp"

#include <atomic>
#include <cmath>
#include <numeric>

using namespace peakcr;
using namespace peakcr::testing;

namespace {

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.signal = beta_interior_preset(true, 3, 1.0, 30.0);
  cfg.n_list = {20};
  cfg.nsim = 40;
  cfg.methods = {RegionMethod::Asymptotic};
  cfg.master_seed = 7;
  cfg.threads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("parallel_for visits every index and rethrows") {
  std::vector<std::atomic<int>> seen(1000);
  parallel_for(seen.size(), 4, [&](std::size_t i) { seen[i]++; });
  for (auto& s : seen) CHECK(s.load() == 1);
  CHECK_THROWS_AS(parallel_for(100, 3, [](std::size_t i) {
                    if (i == 37) throw NumericError("boom");
                  }),
                  NumericError);
  parallel_for(0, 4, [](std::size_t) { FAIL("called"); });
}

TEST_CASE("default balls sit on the maxima") {
  const Signal sig(beta_preset(true, 3, 1.0, 30.0));
  const auto balls = default_balls(sig);
  REQUIRE(balls.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(balls[j].center == sig.maxima()[j]);
    const double edge = std::min(sig.maxima()[j][0], 90.0 - sig.maxima()[j][0]);
    CHECK(balls[j].radius == doctest::Approx(0.95 * std::min(15.0, edge)));
  }
  const auto [cb, kinds] = critical_point_balls(Signal(beta_preset(true, 3, 1.0, 30.0, 6.0)));
  CHECK(cb.size() == 5);
  CHECK(std::count(kinds.begin(), kinds.end(), PeakKind::Min) == 2);
}

TEST_CASE("threshold override pins coverage") {
  ExperimentConfig cfg = small_experiment();
  cfg.threshold_override = std::numeric_limits<double>::infinity();
  auto rep = run_coverage(cfg);
  CHECK(rep.summary(20, RegionMethod::Asymptotic).average_coverage == 1.0);
  CHECK(rep.summary(20, RegionMethod::Asymptotic).joint_coverage == 1.0);
  cfg.threshold_override = 0.0;
  rep = run_coverage(cfg);
  CHECK(rep.summary(20, RegionMethod::Asymptotic).average_coverage == 0.0);
  CHECK(rep.cells.size() == 3);
  CHECK_THROWS_AS(rep.summary(40, RegionMethod::Asymptotic), ConfigError);
}

TEST_CASE("coverage runs do not depend on the thread count") {
  ExperimentConfig cfg = small_experiment();
  cfg.methods = {RegionMethod::Asymptotic, RegionMethod::MonteCarlo};
  cfg.mc.draws = 2000;
  cfg.nsim = 12;
  cfg.threads = 1;
  const auto a = run_coverage(cfg).to_json();
  cfg.threads = 5;
  const auto b = run_coverage(cfg).to_json();
  CHECK(a == b);
  cfg.master_seed = 8;
  CHECK(run_coverage(cfg).to_json() != a);
}

TEST_CASE("report serialization") {
  ExperimentConfig cfg = small_experiment();
  cfg.nsim = 5;
  const auto rep = run_coverage(cfg);
  const std::string csv = rep.to_csv();
  CHECK(csv.rfind("n,method,peak,hits,trials,coverage,band\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const std::string plot = rep.plot_data();
  CHECK(plot.find("asymptotic_joint,20,") != std::string::npos);
  CHECK(rep.to_json()["summaries"][0]["identifiability_rate"].is_null());
}

TEST_CASE("config validation") {
  ExperimentConfig cfg = small_experiment();
  cfg.nsim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_experiment();
  cfg.n_list = {1};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_experiment();
  cfg.target = RegionTarget::CohensD;
  cfg.methods = {RegionMethod::MonteCarlo};
  CHECK_THROWS_AS(cfg.validate(), Unsupported);
}

TEST_CASE("noiseless cohorts are always identified") {
  ExperimentConfig cfg = small_experiment();
  cfg.signal = beta_preset(true, 3, 1.0, 30.0, 6.0);
  cfg.noise.scale = 0.0;
  cfg.nsim = 4;
  const auto rep = run_identifiability(cfg);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].rate == 1.0);
  CHECK(rep.rows[0].outside == 0);
  CHECK(rep.signal_gradient_floor > 1e-6);
  CHECK_FALSE(rep.assumption_violated);
}

TEST_CASE("a flat stretch violates the identifiability assumption") {
  ExperimentConfig cfg = small_experiment();
  cfg.signal = beta_preset(true, 2, 1.0, 30.0, 0.0, 10.0);
  cfg.nsim = 4;
  const auto rep = run_identifiability(cfg);
  CHECK(rep.signal_gradient_floor < 1e-6);
  CHECK(rep.assumption_violated);
}

TEST_CASE("analytic noise lambda matches the continuum value") {
  // Smoothed white noise with a Gaussian kernel of sd k has Lambda = 1 / (2 k^2).
  for (double fwhm : {4.0, 6.0, 10.0}) {
    GaussianKernel kernel(fwhm, 8.0);
    const Box dom{make_vec({0.0}), make_vec({40.0})};
    const Lattice lat = lattice_for(dom, kernel);
    const double k = fwhm / std::sqrt(8.0 * std::log(2.0));
    for (double s : {20.0, 20.37}) {
      CHECK(analytic_noise_lambda(lat, kernel, make_vec({s}))(0, 0) ==
            doctest::Approx(1.0 / (2.0 * k * k)).epsilon(1e-3));
    }
  }
}

TEST_CASE("t gradient CLT on a small run") {
  NoiseSpec noise;
  for (CltCase c : {CltCase{0.0, false}, CltCase{1.0, true}}) {
    const auto rep = check_t_gradient_clt(noise, 100, 3000, c, 4);
    CHECK(rep.max_rel_dev < 0.1);
  }
  noise.marginal = NoiseMarginal::StudentT;
  CHECK_THROWS_AS(check_t_gradient_clt(noise, 100, 10, CltCase{}), ConfigError);
}

TEST_CASE("chi2 gradient with no cross covariance") {
  Chi2GradParams p;
  p.components = 5;
  p.sigma2 = 2.0;
  p.lambda = Mat::Constant(1, 1, 0.3);
  p.gamma = Vec::Zero(1);
  const auto rep = check_chi2_gradient(p, 40000);
  CHECK(std::abs(rep.mean[0]) < 0.01);
  CHECK(rep.max_rel_dev < 0.03);
  CHECK(std::abs(rep.corr_u[0]) < 0.02);
  CHECK(rep.ks < 0.01);
}

TEST_CASE("chi2 gradient with cross covariance in 2D") {
  Chi2GradParams p;
  p.components = 3;
  p.sigma2 = 1.5;
  p.lambda = (Mat(2, 2) << 1.0, 0.2, 0.2, 0.5).finished();
  p.gamma = make_vec({0.6, -0.3});
  p.seed = 3;
  const auto rep = check_chi2_gradient(p, 40000);
  CHECK(rep.max_rel_dev < 0.03);
  CHECK(rep.target_cov(0, 0) == doctest::Approx(1.0 - 0.36 / 1.5));
  // Gamma Gamma^T = sigma^2 Lambda makes the residual vanish.
  p.lambda = Mat::Constant(1, 1, 0.25);
  p.gamma = make_vec({0.5});
  p.sigma2 = 1.0;
  const auto deg = check_chi2_gradient(p, 2000);
  CHECK(deg.cov.norm() < 1e-10);
  p.lambda = Mat::Constant(1, 1, 0.1);
  CHECK_THROWS_AS(check_chi2_gradient(p, 10), ConfigError);
}

TEST_CASE("ratio dominance") {
  const std::vector<double> xs{0.0, 0.5, 1.0, 2.0};
  const ScalarDist a{ScalarDist::Kind::Normal, 0.0, 1.0};
  const auto same = check_ratio_dominance(a, ScalarDist{ScalarDist::Kind::Constant, 2.0, 0.0}, xs, 20000);
  for (const auto& r : same.rows) {
    CHECK(r.p_ratio == r.p_expected_b);
    CHECK(r.exact_ratio == doctest::Approx(1.0 - normal_cdf(2.0 * r.x)));
  }
  const auto uni = check_ratio_dominance(a, ScalarDist{ScalarDist::Kind::Uniform, 0.5, 1.5}, xs, 200000, 4);
  CHECK(uni.holds);
  CHECK(uni.rows[0].p_ratio == doctest::Approx(0.5).epsilon(0.01));
  for (const auto& r : uni.rows) CHECK(std::abs(r.p_ratio - r.exact_ratio) < 0.005);
  CHECK_THROWS_AS(check_ratio_dominance(a, ScalarDist{ScalarDist::Kind::Uniform, -1.0, 1.0}, xs, 10),
                  ConfigError);
  CHECK_THROWS_AS(check_ratio_dominance(a, a, xs, 10), ConfigError);
}
