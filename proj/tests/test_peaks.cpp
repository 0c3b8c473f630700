#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "peakcr/grid_field.hpp"
#include "peakcr/noisegen.hpp"
#include "peakcr/peaks.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace peakcr;
using namespace peakcr::testing;

namespace {

std::shared_ptr<FunctionField> paraboloid(const Box& box, const Vec& theta) {
  return std::make_shared<FunctionField>(box, [theta](const Vec& s, int) {
    const int D = static_cast<int>(s.size());
    Jet j = Jet::zero(D);
    const Vec d = s - theta;
    j.value = -d.squaredNorm();
    j.grad = -2.0 * d;
    j.hess = -2.0 * Mat::Identity(D, D);
    return j;
  });
}

// Grid argmax on [lo, hi] followed by the vertex of the parabola through the
// three best neighbours.
double dense_argmax_1d(const Field& f, double lo, double hi, int per_voxel) {
  const int n = static_cast<int>(std::round((hi - lo) * per_voxel));
  const double h = (hi - lo) / n;
  int best = 0;
  double bv = -INFINITY;
  for (int i = 0; i <= n; ++i) {
    const double v = f.value(make_vec({lo + i * h}));
    if (v > bv) {
      bv = v;
      best = i;
    }
  }
  if (best == 0 || best == n) return lo + best * h;
  const double x = lo + best * h;
  const double fm = f.value(make_vec({x - h})), f0 = bv, fp = f.value(make_vec({x + h}));
  return x + 0.5 * h * (fm - fp) / (fm - 2.0 * f0 + fp);
}

int count_kind(const CriticalPoints& cp, PeakKind k) {
  int c = 0;
  for (const auto& p : cp.points) c += p.kind == k;
  return c;
}

std::shared_ptr<SmoothField> random_smooth_1d(std::uint64_t seed, std::size_t n = 80) {
  const Lattice lat = Lattice::line(n);
  std::vector<double> vals(lat.size());
  PhiloxStream rng(seed, 1);
  for (double& v : vals) v = rng.normal();
  // Wide truncation so the stencil edge does not put visible jumps in the field.
  return std::make_shared<SmoothField>(LatticeSample{lat, vals}, std::make_shared<GaussianKernel>(5.0, 8.0));
}

}  // namespace

TEST_CASE("quadratic field has one maximum at theta") {
  for (int D = 1; D <= 2; ++D) {
    const Box box = D == 1 ? Box{make_vec({0.0}), make_vec({10.0})}
                           : Box{make_vec({0.0, 0.0}), make_vec({10.0, 8.0})};
    const Vec theta = D == 1 ? make_vec({3.3}) : make_vec({6.1, 2.7});
    auto f = paraboloid(box, theta);
    const CriticalPoints cp = find_critical_points(*f, SearchSpec{});
    REQUIRE(cp.points.size() == 1);
    const PeakEstimate& p = cp.points[0];
    CHECK(p.kind == PeakKind::Max);
    CHECK((p.location - theta).norm() <= 1e-8);
    CHECK((p.hessian + 2.0 * Mat::Identity(D, D)).norm() == 0.0);
  }
}

TEST_CASE("repeated beta sections have three maxima at the dense-grid argmax") {
  auto sig = std::make_shared<Signal>(beta_preset(true, 3, 1.0, 30.0));
  const CriticalPoints cp = find_critical_points(*sig, SearchSpec{});
  REQUIRE(count_kind(cp, PeakKind::Max) == 3);
  int k = 0;
  for (const auto& p : cp.points) {
    if (p.kind != PeakKind::Max) continue;
    const double mode = (k + 0.2) * 30.0;
    const double oracle = dense_argmax_1d(*sig, mode - 1.0, mode + 1.0, 10000);
    CHECK(std::abs(p.location[0] - oracle) <= 1e-6);
    CHECK(p.value == doctest::Approx(1.0).epsilon(1e-12));
    ++k;
  }
}

TEST_CASE("smoothed beta sections keep three maxima") {
  auto sig = std::make_shared<Signal>(beta_preset(true, 3, 1.0, 30.0, 6.0));
  const CriticalPoints cp = find_critical_points(*sig, SearchSpec{});
  REQUIRE(count_kind(cp, PeakKind::Max) == 3);
  int k = 0;
  for (const auto& p : cp.points) {
    if (p.kind != PeakKind::Max) continue;
    const double g = sig->maxima()[k][0];
    const double oracle = dense_argmax_1d(*sig, g - 1.0, g + 1.0, 10000);
    CHECK(std::abs(p.location[0] - oracle) <= 1e-6);
    ++k;
  }
}

TEST_CASE("constant field has no non-degenerate extrema") {
  for (int D = 1; D <= 2; ++D) {
    const Box box = D == 1 ? Box{make_vec({0.0}), make_vec({5.0})}
                           : Box{make_vec({0.0, 0.0}), make_vec({4.0, 4.0})};
    auto f = constant_field(box, 2.5);
    const CriticalPoints cp = find_critical_points(*f, SearchSpec{});
    for (const auto& p : cp.points) CHECK(p.kind == PeakKind::Degenerate);
    CHECK(count_kind(cp, PeakKind::Max) == 0);
    CHECK(count_kind(cp, PeakKind::Min) == 0);
  }
}

TEST_CASE("hessian classification") {
  Mat h(2, 2);
  h << -2, 0, 0, -1;
  CHECK(classify_hessian(h) == PeakKind::Max);
  h << 2, 0, 0, 1;
  CHECK(classify_hessian(h) == PeakKind::Min);
  h << 2, 0, 0, -1;
  CHECK(classify_hessian(h) == PeakKind::Saddle);
  h << -2, 0, 0, 0;
  CHECK(classify_hessian(h) == PeakKind::Degenerate);
  CHECK(classify_hessian(Mat::Zero(1, 1)) == PeakKind::Degenerate);
}

TEST_CASE("concave field in a ball matches find_critical_points") {
  const Box box{make_vec({0.0, 0.0}), make_vec({10.0, 10.0})};
  const Vec theta = make_vec({4.2, 5.9});
  auto f = paraboloid(box, theta);
  const PeakEstimate p = argmax_in_ball(*f, Ball{make_vec({5.0, 5.0}), 2.0}, SearchSpec{});
  const CriticalPoints cp = find_critical_points(*f, SearchSpec{});
  CHECK(p.kind == PeakKind::Max);
  CHECK((p.location - cp.points.at(0).location).norm() <= 1e-10);
}

TEST_CASE("field increasing toward the ball boundary is flagged") {
  const Box box{make_vec({0.0}), make_vec({10.0})};
  auto f = std::make_shared<FunctionField>(box, [](const Vec& s, int) {
    Jet j = Jet::zero(1);
    j.value = s[0] + 0.01 * s[0] * s[0];
    j.grad[0] = 1.0 + 0.02 * s[0];
    j.hess(0, 0) = 0.02;
    return j;
  });
  const PeakEstimate p = argmax_in_ball(*f, Ball{make_vec({5.0}), 2.0}, SearchSpec{});
  CHECK(p.kind == PeakKind::Degenerate);
  CHECK(p.location[0] == doctest::Approx(7.0).epsilon(1e-9));
  const PeakEstimate q = argmin_in_ball(*f, Ball{make_vec({5.0}), 2.0}, SearchSpec{});
  CHECK(q.kind == PeakKind::Degenerate);
  CHECK(q.location[0] == doctest::Approx(3.0).epsilon(1e-9));

  const Box box2{make_vec({0.0, 0.0}), make_vec({10.0, 10.0})};
  auto g = std::make_shared<FunctionField>(box2, [](const Vec& s, int) {
    Jet j = Jet::zero(2);
    j.value = s[0] + 2.0 * s[1];
    j.grad = make_vec({1.0, 2.0});
    return j;
  });
  const PeakEstimate r = argmax_in_ball(*g, Ball{make_vec({5.0, 5.0}), 1.0}, SearchSpec{});
  CHECK(r.kind == PeakKind::Degenerate);
  const Vec want = make_vec({5.0, 5.0}) + make_vec({1.0, 2.0}) / std::sqrt(5.0);
  CHECK((r.location - want).norm() <= 1e-6);
}

TEST_CASE("argmax in ball agrees with a dense grid on random smooth fields") {
  for (std::uint64_t t = 0; t < 20; ++t) {
    auto f = random_smooth_1d(100 + t);
    const Ball ball{make_vec({40.0}), 6.0};
    const PeakEstimate p = argmax_in_ball(*f, ball, SearchSpec{});
    const int per_voxel = 1000;
    double best = -INFINITY, best_x = 0;
    for (int i = 0; i <= 12 * per_voxel; ++i) {
      const double x = 34.0 + static_cast<double>(i) / per_voxel;
      const double v = f->value(make_vec({x}));
      if (v > best) {
        best = v;
        best_x = x;
      }
    }
    CHECK(p.value >= best - 1e-12);
    CHECK(std::abs(p.location[0] - best_x) <= 1.0 / per_voxel);
  }
}

TEST_CASE("argmax in ball on 2D random fields") {
  const Lattice lat = Lattice::grid(40, 40);
  for (std::uint64_t t = 0; t < 5; ++t) {
    std::vector<double> vals(lat.size());
    PhiloxStream rng(7, t);
    for (double& v : vals) v = rng.normal();
    SmoothField f(LatticeSample{lat, vals}, std::make_shared<GaussianKernel>(4.0, 8.0));
    const Ball ball{make_vec({19.5, 19.5}), 4.0};
    const PeakEstimate p = argmax_in_ball(f, ball, SearchSpec{});
    double best = -INFINITY;
    const int m = 200;
    for (int i = 0; i <= m; ++i) {
      for (int j = 0; j <= m; ++j) {
        const Vec s = make_vec({15.5 + 8.0 * i / m, 15.5 + 8.0 * j / m});
        if (ball.contains(s)) best = std::max(best, f.value(s));
      }
    }
    CHECK(p.value >= best - 1e-12);
    CHECK(ball.contains(p.location));
  }
}

TEST_CASE("integer shifts of the lattice shift the critical points") {
  auto f = random_smooth_1d(42, 60);
  Lattice shifted = f->sample().lattice;
  shifted.origin[0] += 3.0;
  SmoothField g(LatticeSample{shifted, f->sample().values}, std::make_shared<GaussianKernel>(5.0, 8.0));
  const CriticalPoints a = find_critical_points(*f, SearchSpec{});
  const CriticalPoints b = find_critical_points(g, SearchSpec{});
  REQUIRE(a.points.size() == b.points.size());
  REQUIRE(!a.points.empty());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(b.points[i].location[0] - a.points[i].location[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(b.points[i].kind == a.points[i].kind);
  }
}

TEST_CASE("returned maxima satisfy the non-degeneracy conditions") {
  const Lattice lat = Lattice::grid(30, 30);
  std::vector<double> vals(lat.size());
  PhiloxStream rng(3, 3);
  for (double& v : vals) v = rng.normal();
  SmoothField f(LatticeSample{lat, vals}, std::make_shared<GaussianKernel>(5.0));
  const CriticalPoints cp = find_critical_points(f, SearchSpec{});
  double scale = 0;
  for (const auto& p : cp.points) scale = std::max(scale, std::abs(p.value));
  CHECK(count_kind(cp, PeakKind::Max) > 0);
  CHECK(count_kind(cp, PeakKind::Saddle) > 0);
  for (const auto& p : cp.points) {
    CHECK(p.gradient_norm <= 1e-6 * std::max(scale, 1.0));
    if (p.kind == PeakKind::Max) {
      Eigen::SelfAdjointEigenSolver<Mat> es(p.hessian);
      CHECK(es.eigenvalues().maxCoeff() < -1e-10 * p.hessian.norm());
    }
  }
  for (std::size_t i = 1; i < cp.points.size(); ++i) {
    CHECK((cp.points[i].location - cp.points[i - 1].location).norm() > 1e-4);
  }
}

TEST_CASE("balls assign indices and are validated") {
  const Box box{make_vec({0.0}), make_vec({90.0})};
  auto sig = std::make_shared<Signal>(beta_preset(true, 3, 1.0, 30.0, 6.0));
  SearchSpec spec;
  for (const Vec& m : sig->maxima()) spec.balls.push_back(Ball{m, 5.0});
  const CriticalPoints cp = find_critical_points(*sig, spec);
  int j = 0;
  for (const auto& p : cp.points) {
    if (p.kind != PeakKind::Max) continue;
    REQUIRE(p.ball_index.has_value());
    CHECK(*p.ball_index == j++);
  }
  SearchSpec bad;
  bad.balls = {Ball{make_vec({10.0}), 5.0}, Ball{make_vec({14.0}), 5.0}};
  CHECK_THROWS_AS(bad.validate(box), ConfigError);
  bad.balls = {Ball{make_vec({1.0}), 5.0}};
  CHECK_THROWS_AS(bad.validate(box), ConfigError);
  CHECK(half_min_separation({make_vec({0.0}), make_vec({10.0}), make_vec({4.0})}) == doctest::Approx(2.0));
}
