#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "peakcr/noisegen.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace peakcr;
using namespace peakcr::testing;

namespace {

std::shared_ptr<const Signal> zero_signal() {
  return std::make_shared<Signal>(beta_preset(true, 3, 0.0, 30.0));
}

void check_derivatives(const Signal& sig, const Vec& s) {
  const Jet j = sig.jet(s, 2);
  const Vec g = fd_gradient([&](const Vec& x) { return sig.value(x); }, s);
  const Mat h = fd_hessian([&](const Vec& x) { return sig.grad(x); }, s);
  CHECK(rel_err_norm(j.grad, g, 1e-3) <= 1e-5);
  CHECK(rel_err_norm(j.hess, h, 1e-3) <= 1e-4);
}

}  // namespace

TEST_CASE("quadratic signal") {
  Quadratic q{make_vec({2.0, 3.0}), 0.7};
  const Signal sig(SignalSpec{q, Box{make_vec({0.0, 0.0}), make_vec({5.0, 6.0})}});
  const Jet j = sig.jet(make_vec({2.0, 3.0}));
  CHECK(j.grad.norm() == 0.0);
  CHECK((j.hess + 1.4 * Mat::Identity(2, 2)).norm() == 0.0);
  REQUIRE(sig.maxima().size() == 1);
  CHECK(sig.maxima()[0] == make_vec({2.0, 3.0}));
}

TEST_CASE("beta sections peak at the beta mode") {
  const Signal narrow(beta_preset(true, 3, 1.0, 30.0));
  REQUIRE(narrow.maxima().size() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(narrow.maxima()[k][0] == doctest::Approx(30.0 * (k + 0.2)).epsilon(1e-14));
    CHECK(narrow.value(narrow.maxima()[k]) == doctest::Approx(1.0).epsilon(1e-14));
  }
  const Signal wide(beta_preset(false, 2, 2.0, 20.0));
  // Beta(1.5, 2): mode (a-1)/(a+b-2) = 1/3
  CHECK(wide.maxima()[1][0] == doctest::Approx(20.0 * (1.0 + 1.0 / 3.0)).epsilon(1e-14));
  CHECK(wide.value(wide.maxima()[1]) == doctest::Approx(2.0).epsilon(1e-14));
  for (double s : {3.1, 17.0, 44.2}) check_derivatives(narrow, make_vec({s}));
}

TEST_CASE("smoothed beta sections") {
  const Signal sig(beta_preset(true, 3, 1.0, 30.0, 6.0, 0.0));
  REQUIRE(sig.maxima().size() == 3);
  REQUIRE(sig.minima().size() == 2);
  double top = 0;
  for (const Vec& m : sig.maxima()) {
    CHECK(sig.grad(m).norm() < 1e-10);
    CHECK(sig.hessian(m)(0, 0) < 0.0);
    top = std::max(top, sig.value(m));
  }
  CHECK(top == doctest::Approx(1.0).epsilon(1e-12));
  for (const Vec& m : sig.minima()) {
    CHECK(sig.grad(m).norm() < 1e-10);
    CHECK(sig.hessian(m)(0, 0) > 0.0);
  }
  for (double s : {1.3, 6.2, 29.5, 31.0, 77.7}) check_derivatives(sig, make_vec({s}));
}

TEST_CASE("single Gaussian bump peaks at its center") {
  GaussBumps2D g;
  g.centers = {make_vec({4.0, 7.0})};
  g.widths = {2.0};
  g.amplitudes = {1.5};
  const Signal sig(SignalSpec{g, Box{make_vec({0.0, 0.0}), make_vec({10.0, 12.0})}});
  REQUIRE(sig.maxima().size() == 1);
  CHECK((sig.maxima()[0] - make_vec({4.0, 7.0})).norm() == 0.0);
  CHECK(sig.value(make_vec({4.0, 7.0})) == 1.5);
  check_derivatives(sig, make_vec({5.1, 6.3}));
  const Signal two(bumps_preset(true));
  CHECK(two.maxima().size() == 2);
}

TEST_CASE("peaks outside the domain are dropped") {
  // A peak cut off by the domain is dropped; a domain with none left is an error.
  CHECK(Signal(beta_preset(true, 3, 1.0, 30.0, 0.0, -7.0)).maxima().size() == 2);
  CHECK_THROWS_AS(Signal(SignalSpec{Beta1D{}, Box{make_vec({10.0}), make_vec({30.0})}}), ConfigError);
  const Signal in(beta_interior_preset(true, 3, 1.0, 30.0));
  REQUIRE(in.maxima().size() == 3);
  CHECK(in.maxima()[0][0] - in.domain().lo[0] == doctest::Approx(15.0));
  CHECK(in.domain().hi[0] - in.maxima()[2][0] == doctest::Approx(15.0));
  Quadratic q{make_vec({5.0}), 1.0};
  CHECK_THROWS_AS(Signal(SignalSpec{q, Box{make_vec({0.0}), make_vec({5.0})}}), ConfigError);
  NoiseSpec bad;
  bad.marginal = NoiseMarginal::StudentT;
  bad.df = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("delta-kernel limit reproduces signal plus raw noise") {
  auto sig = std::make_shared<Signal>(beta_preset(true, 2, 1.0, 20.0));
  NoiseSpec noise;
  noise.fwhm = 0.2;  // radius 0.34 < spacing
  noise.seed = 99;
  const FieldCohort c = generate_cohort(sig, noise, 3, 5);
  const Lattice lat = lattice_for(sig->domain(), GaussianKernel(noise.fwhm));
  std::vector<Jet> jets;
  for (std::uint64_t n = 0; n < 3; ++n) {
    const auto raw = white_noise(noise, lat.size(), 5, n);
    for (double s : {1.0, 6.0, 17.0, 33.0}) {
      c.subject_jets(make_vec({s}), 0, jets);
      const std::size_t idx = static_cast<std::size_t>(s - lat.origin[0]);
      CHECK(jets[n].value == doctest::Approx(sig->value(make_vec({s})) + raw[idx]).epsilon(1e-12));
    }
  }
}

TEST_CASE("standardized noise has unit variance and the kernel autocorrelation") {
  NoiseSpec noise;
  noise.fwhm = 6.0;
  noise.seed = 1234;
  const double sigma = GaussianKernel::fwhm_to_sigma(noise.fwhm);
  auto sig = zero_signal();
  std::vector<Jet> jets;
  double ss = 0;
  std::size_t count = 0;
  const int max_lag = 6;
  std::vector<double> lag_sum(max_lag + 1, 0.0);
  std::size_t lag_count = 0;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    const FieldCohort c = generate_cohort(sig, noise, 5, r);
    std::vector<std::vector<double>> rows(5);
    for (int s = 0; s <= 90; ++s) {
      c.subject_jets(make_vec({static_cast<double>(s)}), 0, jets);
      for (int n = 0; n < 5; ++n) rows[n].push_back(jets[n].value);
    }
    for (const auto& row : rows) {
      for (double v : row) ss += v * v;
      count += row.size();
      // Lags measured from points spaced far enough apart to be near-independent.
      for (std::size_t i = 0; i + max_lag < row.size(); i += 15) {
        for (int l = 0; l <= max_lag; ++l) lag_sum[l] += row[i] * row[i + l];
        ++lag_count;
      }
    }
  }
  const double var = ss / static_cast<double>(count);
  CHECK(var >= 0.98);
  CHECK(var <= 1.02);
  MESSAGE("pooled variance " << var << ", lag samples " << lag_count);
  REQUIRE(lag_count * 1 >= 30000);
  for (int l = 1; l <= max_lag; ++l) {
    const double rho = lag_sum[l] / lag_sum[0];
    const double want = std::exp(-l * l / (4.0 * sigma * sigma));
    CHECK(std::abs(rho - want) <= 0.02);
  }
}

TEST_CASE("pointwise variance is flat across the domain") {
  NoiseSpec noise;
  noise.seed = 5;
  auto sig = zero_signal();
  std::vector<Jet> jets;
  const std::vector<double> pts{0.0, 0.37, 45.5, 89.9, 90.0};
  std::vector<double> ss(pts.size(), 0.0);
  std::size_t count = 0;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    const FieldCohort c = generate_cohort(sig, noise, 100, r);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      c.subject_jets(make_vec({pts[i]}), 0, jets);
      for (const Jet& j : jets) ss[i] += j.value * j.value;
    }
    count += 100;
  }
  for (double v : ss) CHECK(std::abs(v / count - 1.0) <= 0.01);
}

TEST_CASE("cohorts are reproducible") {
  auto sig = std::make_shared<Signal>(bumps_preset(false));
  NoiseSpec noise;
  noise.seed = 77;
  noise.marginal = NoiseMarginal::StudentT;
  const FieldCohort a = generate_cohort(sig, noise, 4, 2);
  const FieldCohort b = generate_cohort(sig, noise, 4, 2);
  const FieldCohort c = generate_cohort(sig, noise, 4, 3);
  std::vector<Jet> ja, jb, jc;
  const Vec s = make_vec({12.3, 40.1});
  a.subject_jets(s, 2, ja);
  b.subject_jets(s, 2, jb);
  c.subject_jets(s, 2, jc);
  for (int n = 0; n < 4; ++n) {
    CHECK(ja[n].value == jb[n].value);
    CHECK(ja[n].grad == jb[n].grad);
    CHECK(ja[n].hess == jb[n].hess);
    CHECK(ja[n].value != jc[n].value);
  }
}

TEST_CASE("marginal shapes of the white noise") {
  NoiseSpec g;
  g.seed = 8;
  NoiseSpec t = g;
  t.marginal = NoiseMarginal::StudentT;
  auto moments = [](const std::vector<double>& x) {
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
      m2 += v * v;
      m3 += v * v * v;
      m4 += v * v * v * v;
    }
    const double n = static_cast<double>(x.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    return std::array<double, 3>{m2, m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
  };
  const auto gm = moments(white_noise(g, 400000, 0, 0));
  CHECK(std::abs(gm[0] - 1.0) < 0.01);
  CHECK(std::abs(gm[1]) < 5.0 * std::sqrt(6.0 / 400000));
  CHECK(std::abs(gm[2]) < 5.0 * std::sqrt(24.0 / 400000));
  const auto tm = moments(white_noise(t, 400000, 0, 0));
  CHECK(std::abs(tm[0] - 1.0) < 0.1);
  CHECK(tm[2] > 1.0);
}
