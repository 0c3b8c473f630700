#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "peakcr/sample_fields.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace peakcr;
using namespace peakcr::testing;

namespace {

const Box kLine{make_vec({0.0}), make_vec({10.0})};

FieldCohort constants_cohort(std::vector<double> values) {
  std::vector<std::shared_ptr<const Field>> fs;
  for (double v : values) fs.push_back(constant_field(kLine, v));
  return FieldCohort(std::make_shared<FieldList>(std::move(fs)));
}

std::shared_ptr<LatticeCohort> random_lattice_cohort(int dim, std::size_t n, std::uint64_t seed,
                                                     bool standardize, double fwhm = 4.0) {
  const Lattice lat = dim == 1 ? Lattice::line(60) : Lattice::grid(36, 34);
  auto kernel = std::make_shared<GaussianKernel>(fwhm);
  std::vector<double> values(n * lat.size());
  PhiloxStream rng(seed, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t p = i % lat.size();
    values[i] = 0.8 * std::sin(0.3 * static_cast<double>(p)) + rng.normal();
  }
  return std::make_shared<LatticeCohort>(lat, std::move(values), n, kernel,
                                         inset_domain(lat, kernel->radius()), standardize);
}

}  // namespace

TEST_CASE("two-subject arithmetic") {
  const FieldCohort c = constants_cohort({1.0, 3.0});
  const Vec s = make_vec({4.0});
  CHECK(c.mean_eval(s) == 2.0);
  CHECK(c.var_eval(s) == 2.0);
  // mu = 2, sd = sqrt(2), T = sqrt(2) * 2 / sqrt(2) = 2
  CHECK(c.t_eval(s) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(c.d_eval(s) == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("zero mean gives zero t, equal values are degenerate") {
  CHECK(constants_cohort({-1.5, 1.5, 0.0}).t_eval(make_vec({1.0})) == 0.0);
  const FieldCohort flat = constants_cohort({2.0, 2.0, 2.0});
  CHECK_THROWS_AS(flat.t_eval(make_vec({1.0})), DegenerateVariance);
  CHECK_THROWS_AS(flat.d_jet(make_vec({1.0})), DegenerateVariance);
  CHECK_THROWS_AS(constants_cohort({1.0}), ConfigError);
}

TEST_CASE("identical subjects: mean equals the subject, variance vanishes") {
  auto base = random_lattice_cohort(2, 1, 3, false);
  auto lat = base->lattice();
  auto one = base->subject_values(0);
  std::vector<double> values;
  for (int k = 0; k < 4; ++k) values.insert(values.end(), one.begin(), one.end());
  auto comps = std::make_shared<LatticeCohort>(lat, values, 4, base->kernel_ptr(), base->domain(), false);
  const FieldCohort c(comps);
  const SmoothField f = comps->subject_field(0);
  const Vec s = make_vec({14.2, 17.9});
  // Averaging 4 identical doubles is exact (power-of-two count).
  CHECK(c.mean_grad(s) == f.grad(s));
  CHECK(c.var_eval(s) == 0.0);
  CHECK(c.var_grad(s).norm() == 0.0);
}

TEST_CASE("mean of the cohort equals the field of the averaged lattice") {
  for (int dim : {1, 2}) {
    auto comps = random_lattice_cohort(dim, 10, 40 + dim, false);
    const FieldCohort c(comps);
    std::vector<double> avg(comps->lattice().size(), 0.0);
    for (std::size_t n = 0; n < 10; ++n) {
      auto v = comps->subject_values(n);
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += v[i] / 10.0;
    }
    SmoothField fa(LatticeSample{comps->lattice(), avg}, comps->kernel_ptr(), comps->domain());
    PhiloxStream rng(8, dim);
    for (int t = 0; t < 30; ++t) {
      const Vec s = random_point(rng, c.domain());
      const Jet a = c.mean_jet(s), b = fa.jet(s);
      CHECK(rel_err(a.value, b.value, 1e-6) <= 1e-12);
      CHECK(rel_err_norm(a.grad, b.grad, 1e-6) <= 1e-12);
      CHECK(rel_err_norm(a.hess, b.hess, 1e-6) <= 1e-12);
    }
  }
}

TEST_CASE("variance and Cohen's d derivatives match finite differences") {
  for (int dim : {1, 2}) {
    for (bool standardize : {false, true}) {
      CAPTURE(dim);
      CAPTURE(standardize);
      const FieldCohort c(random_lattice_cohort(dim, 12, 70 + dim, standardize));
      PhiloxStream rng(31, dim);
      double wv = 0, wd = 0, wdh = 0;
      for (int t = 0; t < 50; ++t) {
        const Vec s = random_point(rng, c.domain());
        const Vec vg_fd = fd_gradient([&](const Vec& x) { return c.var_eval(x); }, s);
        const Vec dg_fd = fd_gradient([&](const Vec& x) { return c.d_eval(x); }, s);
        const Mat dh_fd = fd_hessian([&](const Vec& x) { return c.d_grad(x); }, s);
        const Jet d = c.d_jet(s);
        wv = std::max(wv, rel_err_norm(c.var_grad(s), vg_fd, 1e-3));
        wd = std::max(wd, rel_err_norm(d.grad, dg_fd, 1e-3));
        wdh = std::max(wdh, rel_err_norm(d.hess, dh_fd, 1e-3));
        CHECK(d.hess == d.hess.transpose());
      }
      CHECK(wv <= 1e-5);
      CHECK(wd <= 1e-5);
      CHECK(wdh <= 1e-4);
    }
  }
}

TEST_CASE("d equals t / sqrt(N)") {
  const FieldCohort c(random_lattice_cohort(1, 9, 5, true));
  PhiloxStream rng(1, 1);
  for (int t = 0; t < 100; ++t) {
    const Vec s = random_point(rng, c.domain());
    CHECK(c.d_eval(s) == doctest::Approx(c.t_eval(s) / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("constant spread: d gradient is the mean gradient over the sd") {
  // Y_n = g + a_n, so sd is the (constant) sd of the offsets.
  const std::vector<double> offsets{-1.0, 0.5, 2.0, -0.25, 0.75};
  auto g = [](const Vec& s, int) {
    Jet j = Jet::zero(1);
    j.value = std::sin(s[0]);
    j.grad[0] = std::cos(s[0]);
    j.hess(0, 0) = -std::sin(s[0]);
    return j;
  };
  std::vector<std::shared_ptr<const Field>> fs;
  for (double a : offsets) {
    fs.push_back(std::make_shared<FunctionField>(kLine, [g, a](const Vec& s, int o) {
      Jet j = g(s, o);
      j.value += a;
      return j;
    }));
  }
  const FieldCohort c(std::make_shared<FieldList>(fs));
  double m = 0, v = 0;
  for (double a : offsets) m += a / 5.0;
  for (double a : offsets) v += (a - m) * (a - m) / 4.0;
  const Vec s = make_vec({3.3});
  CHECK(rel_err_norm(c.d_grad(s), c.mean_grad(s) / std::sqrt(v), 1e-9) <= 1e-12);
}

TEST_CASE("t is invariant to positive rescaling of every subject") {
  auto comps = random_lattice_cohort(2, 8, 17, false);
  std::vector<double> scaled;
  for (std::size_t n = 0; n < 8; ++n) {
    for (double x : comps->subject_values(n)) scaled.push_back(3.7 * x);
  }
  const FieldCohort a(comps);
  const FieldCohort b(std::make_shared<LatticeCohort>(comps->lattice(), scaled, 8, comps->kernel_ptr(),
                                                      comps->domain(), false));
  PhiloxStream rng(2, 2);
  for (int t = 0; t < 20; ++t) {
    const Vec s = random_point(rng, a.domain());
    CHECK(rel_err(b.t_eval(s), a.t_eval(s), 1e-9) <= 1e-12);
  }
}

TEST_CASE("derived field adaptor dispatches by kind") {
  const FieldCohort c = constants_cohort({1.0, 3.0});
  const Vec s = make_vec({2.0});
  CHECK(DerivedField(c, DerivedFieldKind::Mean).value(s) == 2.0);
  CHECK(DerivedField(c, DerivedFieldKind::Variance).value(s) == 2.0);
  CHECK(DerivedField(c, DerivedFieldKind::TStat).value(s) == doctest::Approx(2.0));
}
