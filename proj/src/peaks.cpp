#include "peakcr/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace peakcr {

void SearchSpec::validate(const Box& domain) const {
  if (grid_refinement < 1) throw ConfigError("search: grid_refinement must be >= 1");
  if (!(newton_tol > 0.0)) throw ConfigError("search: newton_tol must be positive");
  if (max_iters < 1) throw ConfigError("search: max_iters must be >= 1");
  if (!(voxel > 0.0)) throw ConfigError("search: voxel size must be positive");
  for (std::size_t i = 0; i < balls.size(); ++i) {
    const Ball& b = balls[i];
    if (b.center.size() != domain.dim() || !(b.radius > 0.0)) {
      throw ConfigError("search: ball " + std::to_string(i) + " is malformed");
    }
    for (int a = 0; a < domain.dim(); ++a) {
      if (b.center[a] - b.radius < domain.lo[a] || b.center[a] + b.radius > domain.hi[a]) {
        throw ConfigError("search: ball " + std::to_string(i) + " is not inside the domain");
      }
    }
    for (std::size_t k = 0; k < i; ++k) {
      if ((b.center - balls[k].center).norm() <= b.radius + balls[k].radius) {
        throw ConfigError("search: balls " + std::to_string(k) + " and " + std::to_string(i) +
                          " overlap");
      }
    }
  }
}

const char* to_string(PeakKind k) {
  switch (k) {
    case PeakKind::Max: return "max";
    case PeakKind::Min: return "min";
    case PeakKind::Saddle: return "saddle";
    case PeakKind::Degenerate: return "degenerate";
  }
  return "?";
}

PeakKind classify_hessian(const Mat& h) {
  const double eps = 1e-10 * h.norm();
  Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (h.norm() == 0.0) return PeakKind::Degenerate;
  if (hi < -eps) return PeakKind::Max;
  if (lo > eps) return PeakKind::Min;
  if (lo < -eps && hi > eps) return PeakKind::Saddle;
  return PeakKind::Degenerate;
}

namespace {

// Regular grid with spacing `step` covering a box, endpoints included.
struct SeedGrid {
  Vec lo;
  double step;
  std::array<int, kMaxDim> n{1, 1};
  int dim;

  SeedGrid(const Box& box, double step_) : lo(box.lo), step(step_), dim(box.dim()) {
    for (int a = 0; a < dim; ++a) {
      n[a] = static_cast<int>(std::floor((box.hi[a] - box.lo[a]) / step + 1e-9)) + 1;
    }
  }
  int size() const { return dim == 1 ? n[0] : n[0] * n[1]; }
  Vec point(int flat) const {
    Vec p(dim);
    if (dim == 1) {
      p[0] = lo[0] + flat * step;
    } else {
      p[0] = lo[0] + (flat / n[1]) * step;
      p[1] = lo[1] + (flat % n[1]) * step;
    }
    return p;
  }
  // Indices of the (up to 8) neighbours of a grid point.
  template <typename F>
  void for_neighbours(int flat, F&& fn) const {
    if (dim == 1) {
      if (flat > 0) fn(flat - 1);
      if (flat + 1 < n[0]) fn(flat + 1);
      return;
    }
    const int i = flat / n[1], k = flat % n[1];
    for (int di = -1; di <= 1; ++di) {
      for (int dk = -1; dk <= 1; ++dk) {
        if (!di && !dk) continue;
        const int a = i + di, b = k + dk;
        if (a < 0 || b < 0 || a >= n[0] || b >= n[1]) continue;
        fn(a * n[1] + b);
      }
    }
  }
};

enum class Goal { Maximize, Minimize, Root };

struct Region {
  const Box* box = nullptr;
  const Ball* ball = nullptr;
  bool contains(const Vec& s) const {
    if (box && !box->contains(s)) return false;
    if (ball && !ball->contains(s)) return false;
    return true;
  }
};

struct Refined {
  bool converged = false;
  bool left_region = false;
  Vec x;
  Jet jet;
};

// Safeguarded Newton iteration. For Maximize/Minimize a non-definite Hessian
// falls back to a (backtracked) gradient step; Root uses |grad|^2 as merit.
Refined refine(const Field& f, Vec x, Goal goal, const Region& region, double tol, int max_iters,
               double max_step) {
  const double sign = goal == Goal::Minimize ? -1.0 : 1.0;
  auto eval = [&](const Vec& s, int order) {
    Jet j = f.jet(s, order);
    if (sign < 0) {
      j.value = -j.value;
      if (order >= 1) j.grad = -j.grad;
      if (order >= 2) j.hess = -j.hess;
    }
    return j;
  };
  Refined r;
  Jet j = eval(x, 2);
  // Kernel truncation makes the gradient jump slightly where lattice points
  // enter or leave the stencil, so |grad| may never reach tol. A stalled
  // Newton iteration with a sub-1e-3-voxel step counts as converged.
  double last_newton = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    const double gnorm = j.grad.norm();
    if (gnorm <= tol) {
      r.converged = true;
      break;
    }
    Vec p;
    bool newton = false;
    if (goal == Goal::Root) {
      Eigen::FullPivLU<Mat> lu(j.hess);
      if (!lu.isInvertible()) break;
      p = -lu.solve(j.grad);
      newton = true;
    } else {
      Eigen::SelfAdjointEigenSolver<Mat> es(j.hess);
      const double hmax = es.eigenvalues().maxCoeff();
      const double hscale = es.eigenvalues().cwiseAbs().maxCoeff();
      if (hmax < -1e-12 * std::max(hscale, 1e-300)) {
        p = -es.eigenvectors() *
            (es.eigenvectors().transpose() * j.grad).cwiseQuotient(es.eigenvalues());
        newton = true;
      } else {
        const double curv = std::max(hscale, gnorm / max_step);
        p = j.grad / curv;
      }
    }
    const double pn = p.norm();
    if (pn > max_step) p *= max_step / pn;
    last_newton = newton ? pn : std::numeric_limits<double>::infinity();

    double t = 1.0;
    Vec xn = x + p;
    if (newton && p.norm() < 1e-6 * max_step) {
      // Close enough that the line search would only see rounding noise.
    } else if (goal == Goal::Root) {
      while (t > 1e-8) {
        xn = x + t * p;
        if (region.contains(xn) && eval(xn, 1).grad.norm() < gnorm) break;
        t *= 0.5;
      }
    } else {
      const double slope = j.grad.dot(p);
      while (t > 1e-8) {
        xn = x + t * p;
        if (region.contains(xn) && eval(xn, 0).value >= j.value + 1e-4 * t * slope) break;
        t *= 0.5;
      }
      // Truncation jumps in the value can defeat the sufficient-increase test
      // right next to the critical point; then settle for a smaller gradient.
      if (t <= 1e-8 && newton && region.contains(x + p) && eval(x + p, 1).grad.norm() < gnorm) {
        t = 1.0;
        xn = x + p;
      }
    }
    if (!region.contains(xn)) {
      r.left_region = true;
      r.x = xn;
      return r;
    }
    if (t <= 1e-8) break;
    x = xn;
    j = eval(x, 2);
  }
  if (!r.converged && (j.grad.norm() <= tol || last_newton <= 1e-3 * max_step)) r.converged = true;
  r.x = x;
  // Report the jet of the original field.
  r.jet = f.jet(x, 2);
  return r;
}

PeakEstimate make_estimate(const Vec& x, const Jet& j) {
  PeakEstimate e;
  e.location = x;
  e.value = j.value;
  e.gradient_norm = j.grad.norm();
  e.hessian = j.hess;
  e.kind = classify_hessian(j.hess);
  return e;
}

bool lex_less(const Vec& a, const Vec& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

double tolerance_from(const std::vector<double>& values, double rel_tol, double voxel) {
  double vmax = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    vmax = std::max(vmax, std::abs(v));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double scale = std::max({vmax, hi - lo, 1e-300}) / voxel;
  return rel_tol * scale;
}

void assign_balls(PeakEstimate& e, const std::vector<Ball>& balls) {
  for (std::size_t b = 0; b < balls.size(); ++b) {
    if (balls[b].contains(e.location)) {
      e.ball_index = static_cast<int>(b);
      return;
    }
  }
}

}  // namespace

CriticalPoints find_critical_points(const Field& field, const SearchSpec& spec) {
  const Box& domain = field.domain();
  spec.validate(domain);
  const SeedGrid grid(domain, spec.voxel / spec.grid_refinement);
  const int M = grid.size();
  const int D = field.dim();
  std::vector<double> values(M);
  std::vector<double> gnorm2(D == 2 ? M : 0);
  for (int i = 0; i < M; ++i) {
    const Jet j = field.jet(grid.point(i), D == 2 ? 1 : 0);
    values[i] = j.value;
    if (D == 2) gnorm2[i] = j.grad.squaredNorm();
  }
  const double tol = tolerance_from(values, spec.newton_tol, spec.voxel);

  std::vector<std::pair<int, Goal>> seeds;
  for (int i = 0; i < M; ++i) {
    bool is_max = true, is_min = true, is_gmin = D == 2;
    grid.for_neighbours(i, [&](int k) {
      if (values[k] > values[i]) is_max = false;
      if (values[k] < values[i]) is_min = false;
      if (D == 2 && gnorm2[k] < gnorm2[i]) is_gmin = false;
    });
    if (is_max) seeds.emplace_back(i, Goal::Maximize);
    if (is_min) seeds.emplace_back(i, Goal::Minimize);
    if (is_gmin && !is_max && !is_min) seeds.emplace_back(i, Goal::Root);
  }

  CriticalPoints out;
  out.seeds = static_cast<int>(seeds.size());
  const Region region{&domain, nullptr};
  std::vector<PeakEstimate> found;
  for (const auto& [idx, goal] : seeds) {
    const Refined r = refine(field, grid.point(idx), goal, region, tol, spec.max_iters, spec.voxel);
    if (!r.converged || r.left_region) {
      ++out.dropped;
      continue;
    }
    found.push_back(make_estimate(r.x, r.jet));
  }

  // Deduplicate: prefer larger value, then lexicographic location.
  std::sort(found.begin(), found.end(), [](const PeakEstimate& a, const PeakEstimate& b) {
    if (a.value != b.value) return a.value > b.value;
    return lex_less(a.location, b.location);
  });
  for (auto& e : found) {
    const bool dup = std::any_of(out.points.begin(), out.points.end(), [&](const PeakEstimate& k) {
      return (k.location - e.location).norm() < spec.dedup_radius;
    });
    if (dup) continue;
    assign_balls(e, spec.balls);
    out.points.push_back(std::move(e));
  }
  std::sort(out.points.begin(), out.points.end(),
            [](const PeakEstimate& a, const PeakEstimate& b) { return lex_less(a.location, b.location); });
  return out;
}

namespace {

// Best point on the sphere of the ball (two endpoints in 1D, a circle in 2D).
std::pair<Vec, double> boundary_max(const Field& f, const Ball& ball, double sign, double step) {
  if (ball.center.size() == 1) {
    const Vec a = ball.center - make_vec({ball.radius});
    const Vec b = ball.center + make_vec({ball.radius});
    const double fa = sign * f.value(a), fb = sign * f.value(b);
    return fa >= fb ? std::pair{a, fa} : std::pair{b, fb};
  }
  auto at = [&](double th) {
    Vec p = ball.center;
    p[0] += ball.radius * std::cos(th);
    p[1] += ball.radius * std::sin(th);
    return p;
  };
  const int m = std::max(64, static_cast<int>(std::ceil(2.0 * std::numbers::pi * ball.radius / step)));
  const double dth = 2.0 * std::numbers::pi / m;
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    const double v = sign * f.value(at(i * dth));
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  // Golden-section refinement of the angle around the best sample.
  double a = (best - 1) * dth, b = (best + 1) * dth;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = sign * f.value(at(c)), fd = sign * f.value(at(d));
  for (int it = 0; it < 60 && (b - a) > 1e-12; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = sign * f.value(at(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = sign * f.value(at(d));
    }
  }
  const double th = 0.5 * (a + b);
  const double v = sign * f.value(at(th));
  if (v >= best_v) return {at(th), v};
  return {at(best * dth), best_v};
}

PeakEstimate extremum_in_ball(const Field& field, const Ball& ball, const SearchSpec& spec, Goal goal) {
  const Box& domain = field.domain();
  for (int a = 0; a < domain.dim(); ++a) {
    if (ball.center[a] - ball.radius < domain.lo[a] - 1e-12 ||
        ball.center[a] + ball.radius > domain.hi[a] + 1e-12) {
      throw DomainError("search ball is not inside the field domain");
    }
  }
  const double sign = goal == Goal::Minimize ? -1.0 : 1.0;
  const double step = spec.voxel / spec.grid_refinement;
  Box bbox{ball.center, ball.center};
  bbox.lo.array() -= ball.radius;
  bbox.hi.array() += ball.radius;
  const SeedGrid grid(bbox, step);
  const int M = grid.size();
  std::vector<double> values(M, -std::numeric_limits<double>::infinity());
  std::vector<char> inside(M, 0);
  std::vector<double> in_values;
  for (int i = 0; i < M; ++i) {
    const Vec p = grid.point(i);
    if (!ball.contains(p)) continue;
    inside[i] = 1;
    values[i] = sign * field.value(p);
    in_values.push_back(values[i]);
  }
  const double tol = tolerance_from(in_values, spec.newton_tol, spec.voxel);
  const Region region{&domain, &ball};

  std::optional<PeakEstimate> best;
  for (int i = 0; i < M; ++i) {
    if (!inside[i]) continue;
    bool is_max = true;
    grid.for_neighbours(i, [&](int k) {
      if (inside[k] && values[k] > values[i]) is_max = false;
    });
    if (!is_max) continue;
    const Refined r = refine(field, grid.point(i), goal, region, tol, spec.max_iters, spec.voxel);
    if (!r.converged || r.left_region) continue;
    PeakEstimate e = make_estimate(r.x, r.jet);
    if (!best || sign * e.value > sign * best->value) best = std::move(e);
  }

  const auto [bpt, bval] = boundary_max(field, ball, sign, step);
  const PeakKind want = goal == Goal::Minimize ? PeakKind::Min : PeakKind::Max;
  if (best && best->kind == want && sign * best->value >= bval) return *best;
  if (best && sign * best->value >= bval) {
    best->kind = PeakKind::Degenerate;
    return *best;
  }
  PeakEstimate e = make_estimate(bpt, field.jet(bpt, 2));
  e.kind = PeakKind::Degenerate;
  return e;
}

}  // namespace

PeakEstimate argmax_in_ball(const Field& field, const Ball& ball, const SearchSpec& spec) {
  return extremum_in_ball(field, ball, spec, Goal::Maximize);
}

PeakEstimate argmin_in_ball(const Field& field, const Ball& ball, const SearchSpec& spec) {
  return extremum_in_ball(field, ball, spec, Goal::Minimize);
}

double half_min_separation(const std::vector<Vec>& peaks) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) best = std::min(best, (peaks[i] - peaks[k]).norm());
  }
  return 0.5 * best;
}

}  // namespace peakcr
