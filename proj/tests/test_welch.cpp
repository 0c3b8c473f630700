#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "peakcr/distributions.hpp"
#include "peakcr/welch.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>

using namespace peakcr;
using namespace peakcr::testing;

namespace {

WelchSpec small_spec(int a = 32, double rate = 16.0) {
  WelchSpec w;
  w.segment_length = a;
  w.sample_rate = rate;
  return w;
}

// Power of the windowed segment's DFT at lattice index k, straight from the definition.
double direct_power(const std::vector<cplx>& seg, const std::vector<double>& w, int k, bool demean) {
  const int a = static_cast<int>(seg.size());
  cplx m = 0;
  if (demean) {
    for (const cplx& v : seg) m += v;
    m /= static_cast<double>(a);
  }
  cplx s = 0;
  for (int t = 0; t < a; ++t) s += w[t] * (seg[t] - m) * std::polar(1.0, -2.0 * std::numbers::pi * t * k / a);
  return std::norm(s);
}

std::vector<double> noisy_series(std::size_t len, std::uint64_t seed) {
  PhiloxStream rng(seed, 0);
  std::vector<double> x(len);
  for (std::size_t t = 0; t < len; ++t) x[t] = std::sin(0.7 * t) + rng.normal();
  return x;
}

}  // namespace

TEST_CASE("segment counts") {
  const WelchSpec w = small_spec(32);
  CHECK(segment(std::vector<double>(48, 1.0), w).size() == 2);
  CHECK(segment(std::vector<double>(32, 1.0), w).size() == 1);
  CHECK(segment(std::vector<double>(100, 1.0), w).size() == 5);
  CHECK_THROWS_AS(segment(std::vector<double>(31, 1.0), w), DataError);
  std::vector<double> x(64);
  for (int i = 0; i < 64; ++i) x[i] = i;
  const auto segs = segment(x, w);
  CHECK(segs[1][0] == 16.0);
  CHECK(segs[2][31] == 63.0);
  WelchSpec bad = w;
  bad.segment_length = 31;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("gaussian window") {
  for (int a : {8, 9, 240, 241}) {
    const auto w = gaussian_window(a, 0.05);
    CHECK(std::abs(w.front() - 0.05) <= 1e-12);
    CHECK(std::abs(w.back() - 0.05) <= 1e-12);
    for (int i = 0; i < a; ++i) CHECK(w[i] == w[a - 1 - i]);
    if (a % 2) CHECK(w[(a - 1) / 2] == 1.0);
    // The ends come from the formula, not only from the pin.
    const double c = 0.5 * (a - 1);
    const double tau2 = c * c / (2.0 * -std::log(0.05));
    CHECK(std::abs(std::exp(-c * c / (2.0 * tau2)) - 0.05) <= 1e-12);
  }
}

TEST_CASE("lattice evaluation reproduces the windowed DFT power") {
  for (bool demean : {true, false}) {
    WelchSpec w = small_spec(32, 16.0);
    w.demean = demean;
    const auto x = noisy_series(200, 3);
    const SpectrumField f(x, w);
    const auto segs = segment(x, w);
    const auto win = gaussian_window(32, 0.05);
    for (int k = 0; k <= 16; ++k) {
      double want = 0;
      for (const auto& s : segs) {
        const std::vector<cplx> c(s.begin(), s.end());
        want += std::log10(direct_power(c, win, k, demean));
      }
      want *= 10.0 / static_cast<double>(segs.size());
      const double got = f.value(make_vec({k * w.frequency_step()}));
      CHECK(std::abs(got - want) <= 1e-9 * std::abs(want));
    }
    // Off-lattice, the field is the DTFT of the windowed segment.
    const double s = 3.37;
    const double nu = s * 32 / 16.0;
    double want = 0;
    for (const auto& seg : segs) {
      double m = 0;
      if (demean) {
        for (double v : seg) m += v;
        m /= 32;
      }
      cplx acc = 0;
      for (int t = 0; t < 32; ++t) acc += win[t] * (seg[t] - m) * std::polar(1.0, -2.0 * std::numbers::pi * t * nu / 32);
      want += std::log10(std::norm(acc));
    }
    want *= 10.0 / static_cast<double>(segs.size());
    CHECK(f.value(make_vec({s})) == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("derivatives match finite differences") {
  const auto x = noisy_series(300, 5);
  const SpectrumField f(x, small_spec(32, 16.0));
  PhiloxStream rng(1, 1);
  for (int i = 0; i < 20; ++i) {
    const Vec s = make_vec({0.2 + 7.6 * rng.uniform()});
    const Jet j = f.jet(s);
    const Vec g = fd_gradient([&](const Vec& p) { return f.value(p); }, s, 1e-6);
    const Mat h = fd_hessian([&](const Vec& p) { return f.grad(p); }, s, 1e-6);
    CHECK(rel_err_norm(j.grad, g, 1.0) <= 1e-5);
    CHECK(rel_err_norm(j.hess, h, 1.0) <= 1e-4);
  }
}

TEST_CASE("constant series concentrates power at 0 Hz") {
  WelchSpec w = small_spec(32, 16.0);
  w.demean = false;  // demeaning would remove the whole signal
  const SpectrumField f(std::vector<double>(128, 2.5), w);
  CHECK(f.value(make_vec({0.0})) - f.value(make_vec({4.0})) >= 40.0);
  CHECK(f.cohort().floored() == 0);
}

TEST_CASE("sinusoid peak is located within half a grid step") {
  const WelchSpec w = small_spec(64, 32.0);
  for (int k : {5, 9, 14}) {
    const double f0 = w.sample_rate * k / w.segment_length;
    std::vector<double> x(640);
    for (std::size_t t = 0; t < x.size(); ++t) x[t] = std::cos(2.0 * std::numbers::pi * f0 * t / w.sample_rate + 0.3);
    const SpectrumField f(x, w);
    SearchSpec spec;
    spec.voxel = w.frequency_step();
    const Ball ball{make_vec({0.5 * w.sample_rate / 2}), 0.5 * w.sample_rate / 2 - 0.01};
    const PeakEstimate p = argmax_in_ball(f, ball, spec);
    CHECK(std::abs(p.location[0] - f0) <= 0.5 * w.frequency_step());
    // Dense DTFT oracle over the same interval.
    double best = -INFINITY, arg = 0;
    for (int i = 0; i <= 16000; ++i) {
      const double s = 0.01 + i * (15.98 / 16000);
      const double v = f.value(make_vec({s}));
      if (v > best) {
        best = v;
        arg = s;
      }
    }
    CHECK(std::abs(p.location[0] - arg) <= 0.002);
  }
}

TEST_CASE("240 samples at 240 Hz give a 1 Hz grid") {
  WelchSpec w;
  CHECK(w.segment_length == 240);
  CHECK(w.sample_rate == 240.0);
  CHECK(w.frequency_step() == 1.0);
}

TEST_CASE("modulation shifts the power field") {
  WelchSpec w = small_spec(32, 16.0);
  w.demean = false;
  PhiloxStream rng(4, 4);
  std::vector<cplx> x(160), y(160);
  const int shift = 5;
  for (std::size_t t = 0; t < x.size(); ++t) {
    x[t] = cplx(rng.normal(), rng.normal());
    y[t] = x[t] * std::polar(1.0, 2.0 * std::numbers::pi * shift * static_cast<double>(t) / 32);
  }
  const SpectrumField fx(x, w), fy(y, w);
  for (int k = -16; k < 16; ++k) {
    const double vx = fx.value(make_vec({k * 0.5}));
    int ks = k + shift;
    if (ks >= 16) ks -= 32;
    const double vy = fy.value(make_vec({ks * 0.5}));
    CHECK(std::abs(vx - vy) <= 1e-9 * std::max(1.0, std::abs(vx)));
  }
}

TEST_CASE("real series give a field symmetric about 0 Hz") {
  const SpectrumField f(noisy_series(200, 8), small_spec(32, 16.0));
  for (int k = 1; k < 16; ++k) {
    CHECK(f.value(make_vec({k * 0.5})) == doctest::Approx(f.value(make_vec({-k * 0.5}))).epsilon(1e-12));
  }
}

TEST_CASE("zero power is floored") {
  WelchSpec w = small_spec(32, 16.0);
  const SpectrumField f(std::vector<double>(64, 1.0), w);  // demeaned to zero
  CHECK(f.value(make_vec({2.0})) == doctest::Approx(10.0 * std::log10(1e-300)));
  CHECK(f.cohort().floored() > 0);
}

TEST_CASE("duplicated subject makes the Cohen's d regions degenerate") {
  const auto x = noisy_series(400, 9);
  auto cohort = std::make_shared<SpectrumCohort>(std::vector<std::vector<double>>(5, x), small_spec(32, 16.0));
  CHECK_THROWS_AS(spectrum_peak_regions(cohort, {Ball{make_vec({1.8}), 1.0}}, 0.05, RegionTarget::CohensD),
                  DegenerateVariance);
}

TEST_CASE("two-peak mean intervals use the Bonferroni quantile") {
  const WelchSpec w = small_spec(48, 24.0);
  std::vector<std::vector<double>> subjects;
  for (std::uint64_t n = 0; n < 20; ++n) {
    PhiloxStream rng(12, n);
    std::vector<double> x(1440);
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double tt = t / w.sample_rate;
      x[t] = std::sin(2 * std::numbers::pi * 0.9 * tt) + std::sin(2 * std::numbers::pi * 2.3 * tt) + rng.normal();
    }
    subjects.push_back(std::move(x));
  }
  auto cohort = std::make_shared<SpectrumCohort>(subjects, w);
  const PeakRegions pr = spectrum_peak_regions(cohort, {Ball{make_vec({0.9}), 0.5}, Ball{make_vec({2.3}), 0.5}},
                                               0.05, RegionTarget::Mean);
  REQUIRE(pr.joint.size() == 2);
  for (const auto& r : pr.joint) CHECK(r.threshold == doctest::Approx(chi2_quantile(0.975, 1)).epsilon(1e-12));
  CHECK(std::abs(pr.peaks[0].location[0] - 0.9) < 0.1);
  CHECK(std::abs(pr.peaks[1].location[0] - 2.3) < 0.1);
}
