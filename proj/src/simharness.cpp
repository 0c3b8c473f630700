#include "peakcr/simharness.hpp"

#include "peakcr/distributions.hpp"
#include "peakcr/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace peakcr {

int default_threads() {
  if (const char* e = std::getenv("PEAKCR_THREADS")) {
    try {
      const int t = std::stoi(e);
      if (t >= 1) return t;
    } catch (const std::exception&) {
    }
    throw ConfigError("PEAKCR_THREADS must be a positive integer");
  }
  return 0;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& f) {
  int t = threads > 0 ? threads : default_threads();
  if (t <= 0) t = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  t = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(t), std::max<std::size_t>(count, 1)));
  if (t == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr err;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!err) err = std::current_exception();
        stop = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < t; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

void ExperimentConfig::validate() const {
  if (nsim < 1) throw ConfigError("experiment: nsim must be >= 1");
  if (n_list.empty()) throw ConfigError("experiment: empty N list");
  for (std::size_t n : n_list) {
    if (n < 2) throw ConfigError("experiment: every N must be >= 2");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("experiment: alpha must be in (0,1)");
  if (methods.empty()) throw ConfigError("experiment: no region methods");
  const bool mc = std::find(methods.begin(), methods.end(), RegionMethod::MonteCarlo) != methods.end();
  if (mc && target == RegionTarget::CohensD) throw Unsupported("unsupported: Monte Carlo for Cohen's d");
  if (mc) this->mc.validate();
  noise.validate();
  if (!(max_failure_rate >= 0.0 && max_failure_rate <= 1.0)) throw ConfigError("experiment: max_failure_rate must be in [0,1]");
  if (!ball_kinds.empty() && ball_kinds.size() != search.balls.size()) {
    throw ConfigError("experiment: ball_kinds must match the balls");
  }
}

namespace {

double edge_distance(const Box& box, const Vec& p) {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < box.dim(); ++a) d = std::min({d, p[a] - box.lo[a], box.hi[a] - p[a]});
  return d;
}

double band(double p, std::size_t n) {
  return n ? 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

// The identifiability event on one set of critical points.
bool identified(const CriticalPoints& cp, const std::vector<Ball>& balls, const std::vector<PeakKind>& kinds,
                bool& outside) {
  std::vector<int> count(balls.size(), 0);
  std::vector<char> kind_ok(balls.size(), 0);
  outside = false;
  for (const auto& p : cp.points) {
    if (!p.ball_index) {
      outside = true;
      continue;
    }
    const auto j = static_cast<std::size_t>(*p.ball_index);
    ++count[j];
    const PeakKind want = kinds.empty() ? PeakKind::Max : kinds[j];
    kind_ok[j] = p.kind == want;
  }
  if (outside) return false;
  for (std::size_t j = 0; j < balls.size(); ++j) {
    if (count[j] != 1 || !kind_ok[j]) return false;
  }
  return true;
}

NoiseSpec seeded_noise(const ExperimentConfig& cfg) {
  NoiseSpec nz = cfg.noise;
  nz.seed = stream_id(cfg.master_seed, cfg.noise.seed, 0x6e6f6973ull);
  return nz;
}

}  // namespace

std::vector<Ball> default_balls(const Signal& signal) {
  const auto& m = signal.maxima();
  if (m.empty()) throw ConfigError("default balls: the signal has no maxima");
  const double sep = m.size() > 1 ? half_min_separation(m) : std::numeric_limits<double>::infinity();
  std::vector<Ball> out;
  for (const Vec& c : m) {
    const double r = std::min(0.95 * sep, 0.95 * edge_distance(signal.domain(), c));
    out.push_back(Ball{c, r});
  }
  return out;
}

std::pair<std::vector<Ball>, std::vector<PeakKind>> critical_point_balls(const Signal& signal, double fraction) {
  std::vector<std::pair<Vec, PeakKind>> pts;
  for (const Vec& v : signal.maxima()) pts.emplace_back(v, PeakKind::Max);
  for (const Vec& v : signal.minima()) pts.emplace_back(v, PeakKind::Min);
  std::vector<Ball> balls;
  std::vector<PeakKind> kinds;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double nn = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k != i) nn = std::min(nn, (pts[i].first - pts[k].first).norm());
    }
    const double r = std::min(fraction * nn, 0.95 * edge_distance(signal.domain(), pts[i].first));
    balls.push_back(Ball{pts[i].first, r});
    kinds.push_back(pts[i].second);
  }
  return {balls, kinds};
}

const CoverageSummary& CoverageReport::summary(std::size_t n, RegionMethod m) const {
  for (const auto& s : summaries) {
    if (s.n == n && s.method == m) return s;
  }
  throw ConfigError("coverage report: no summary for that N and method");
}

std::string CoverageReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "n,method,peak,hits,trials,coverage,band\n";
  for (const auto& c : cells) {
    os << c.n << ',' << to_string(c.method) << ',' << c.peak << ',' << c.hits << ',' << c.trials << ','
       << c.coverage << ',' << c.band << '\n';
  }
  return os.str();
}

nlohmann::json CoverageReport::to_json() const {
  nlohmann::json j;
  j["nsim"] = nsim;
  j["alpha"] = alpha;
  j["target"] = to_string(target);
  j["seed"] = seed;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"n", c.n}, {"method", to_string(c.method)}, {"peak", c.peak}, {"hits", c.hits},
                          {"trials", c.trials}, {"coverage", c.coverage}, {"band", c.band}});
  }
  j["summaries"] = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json r{{"n", s.n},
                     {"method", to_string(s.method)},
                     {"average_coverage", s.average_coverage},
                     {"joint_hits", s.joint_hits},
                     {"trials", s.trials},
                     {"joint_coverage", s.joint_coverage},
                     {"band", s.band},
                     {"joint_band", s.joint_band},
                     {"failures", s.failures}};
    if (std::isnan(s.identifiability_rate)) r["identifiability_rate"] = nullptr;
    else r["identifiability_rate"] = s.identifiability_rate;
    j["summaries"].push_back(r);
  }
  return j;
}

std::string CoverageReport::plot_data() const {
  std::ostringstream os;
  os.precision(10);
  os << "series,n,coverage,lower,upper\n";
  for (const auto& s : summaries) {
    const std::string m = to_string(s.method);
    os << m << "_average," << s.n << ',' << s.average_coverage << ',' << s.average_coverage - s.band << ','
       << s.average_coverage + s.band << '\n';
    os << m << "_joint," << s.n << ',' << s.joint_coverage << ',' << s.joint_coverage - s.joint_band << ','
       << s.joint_coverage + s.joint_band << '\n';
  }
  return os.str();
}

CoverageReport run_coverage(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto signal = std::make_shared<Signal>(cfg.signal);
  SearchSpec search = cfg.search;
  if (search.balls.empty()) search.balls = default_balls(*signal);
  search.validate(signal->domain());
  const std::size_t J = search.balls.size();
  std::vector<Vec> truth;
  for (const Ball& b : search.balls) {
    std::vector<Vec> in;
    for (const Vec& m : signal->maxima()) {
      if (b.contains(m)) in.push_back(m);
    }
    if (in.size() != 1) throw ConfigError("coverage: every ball must contain exactly one true maximum");
    truth.push_back(in.front());
  }
  SearchSpec id_search = search;
  std::vector<PeakKind> id_kinds;
  if (cfg.track_identifiability) std::tie(id_search.balls, id_kinds) = critical_point_balls(*signal);

  RegionRequest req;
  req.target = cfg.target;
  req.alpha = cfg.alpha;
  req.search = search;
  req.cov = cfg.cov;
  req.mc = cfg.mc;
  const NoiseSpec noise = seeded_noise(cfg);
  const std::size_t M = cfg.methods.size();

  struct Rep {
    bool failed = false;
    std::vector<std::vector<char>> hit;  // method, peak
    std::vector<char> joint;             // method
    int ident = -1;
  };

  CoverageReport rep;
  rep.nsim = cfg.nsim;
  rep.alpha = cfg.alpha;
  rep.target = cfg.target;
  rep.seed = cfg.master_seed;
  for (std::size_t n : cfg.n_list) {
    std::vector<Rep> reps(cfg.nsim);
    parallel_for(cfg.nsim, cfg.threads, [&](std::size_t r) {
      Rep& out = reps[r];
      const std::uint64_t rid = stream_id(n, r);
      const FieldCohort cohort = generate_cohort(signal, noise, n, rid);
      RegionRequest rq = req;
      rq.mc.seed = stream_id(cfg.master_seed, cfg.mc.seed, rid);
      std::vector<PeakRegions> prs;
      try {
        prs = peak_regions(cohort, rq, cfg.methods);
      } catch (const NumericError&) {
        out.failed = true;
        return;
      }
      out.hit.assign(M, std::vector<char>(J, 0));
      out.joint.assign(M, 0);
      for (std::size_t m = 0; m < M; ++m) {
        bool all = true;
        for (std::size_t j = 0; j < J; ++j) {
          ConfidenceEllipsoid a = prs[m].marginal[j];
          ConfidenceEllipsoid b = prs[m].joint[j];
          if (cfg.threshold_override) a.threshold = b.threshold = *cfg.threshold_override;
          out.hit[m][j] = contains(a, truth[j]);
          all = all && contains(b, truth[j]);
        }
        out.joint[m] = all;
      }
      if (cfg.track_identifiability) {
        const DerivedField mean(cohort, DerivedFieldKind::Mean);
        bool outside = false;
        out.ident = identified(find_critical_points(mean, id_search), id_search.balls, id_kinds, outside);
      }
    });

    std::size_t failures = 0, ok = 0, ident = 0;
    for (const Rep& r : reps) {
      if (r.failed) ++failures;
      else ++ok;
      if (r.ident == 1) ++ident;
    }
    if (static_cast<double>(failures) > cfg.max_failure_rate * static_cast<double>(cfg.nsim)) {
      throw NumericError("coverage: " + std::to_string(failures) + " of " + std::to_string(cfg.nsim) +
                         " replicates failed at N=" + std::to_string(n));
    }
    for (std::size_t m = 0; m < M; ++m) {
      CoverageSummary s;
      s.n = n;
      s.method = cfg.methods[m];
      s.trials = ok;
      s.failures = failures;
      double avg = 0;
      for (std::size_t j = 0; j < J; ++j) {
        CoverageCell c;
        c.n = n;
        c.method = cfg.methods[m];
        c.peak = static_cast<int>(j);
        c.trials = ok;
        for (const Rep& r : reps) {
          if (!r.failed) c.hits += r.hit[m][j];
        }
        c.coverage = ok ? static_cast<double>(c.hits) / static_cast<double>(ok) : 0.0;
        c.band = band(c.coverage, cfg.nsim);
        avg += c.coverage;
        rep.cells.push_back(c);
      }
      s.average_coverage = avg / static_cast<double>(J);
      for (const Rep& r : reps) {
        if (!r.failed) s.joint_hits += r.joint[m];
      }
      s.joint_coverage = ok ? static_cast<double>(s.joint_hits) / static_cast<double>(ok) : 0.0;
      s.band = band(s.average_coverage, cfg.nsim);
      s.joint_band = band(s.joint_coverage, cfg.nsim);
      s.identifiability_rate = cfg.track_identifiability && ok
                                   ? static_cast<double>(ident) / static_cast<double>(cfg.nsim)
                                   : std::numeric_limits<double>::quiet_NaN();
      rep.summaries.push_back(s);
    }
  }
  return rep;
}

nlohmann::json IdentifiabilityReport::to_json() const {
  nlohmann::json j;
  j["signal_gradient_floor"] = signal_gradient_floor;
  j["assumption_violated"] = assumption_violated;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"n", r.n}, {"trials", r.trials}, {"identified", r.identified}, {"outside", r.outside},
                         {"rate", r.rate}, {"outside_rate", r.outside_rate}, {"band", r.band}});
  }
  return j;
}

IdentifiabilityReport run_identifiability(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto signal = std::make_shared<Signal>(cfg.signal);
  SearchSpec search = cfg.search;
  std::vector<PeakKind> kinds = cfg.ball_kinds;
  if (search.balls.empty()) std::tie(search.balls, kinds) = critical_point_balls(*signal);
  search.validate(signal->domain());
  const NoiseSpec noise = seeded_noise(cfg);

  IdentifiabilityReport out;
  // Gradient floor of the signal outside the balls, on the seeding grid.
  {
    const Box& dom = signal->domain();
    const double step = search.voxel / search.grid_refinement;
    const auto pts = pooling_grid(dom, step);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const Vec& p : pts) {
      const double g = signal->grad(p).norm();
      hi = std::max(hi, g);
      const bool in = std::any_of(search.balls.begin(), search.balls.end(), [&](const Ball& b) { return b.contains(p); });
      if (!in) lo = std::min(lo, g);
    }
    out.signal_gradient_floor = std::isfinite(lo) ? (hi > 0 ? lo / hi : 0.0) : 1.0;
  }

  for (std::size_t n : cfg.n_list) {
    std::vector<signed char> ident(cfg.nsim, 0), outside(cfg.nsim, 0);
    parallel_for(cfg.nsim, cfg.threads, [&](std::size_t r) {
      const FieldCohort cohort = generate_cohort(signal, noise, n, stream_id(n, r));
      const DerivedField mean(cohort, DerivedFieldKind::Mean);
      bool o = false;
      ident[r] = identified(find_critical_points(mean, search), search.balls, kinds, o);
      outside[r] = o;
    });
    IdentifiabilityRow row;
    row.n = n;
    row.trials = cfg.nsim;
    for (std::size_t r = 0; r < cfg.nsim; ++r) {
      row.identified += ident[r];
      row.outside += outside[r];
    }
    row.rate = static_cast<double>(row.identified) / static_cast<double>(cfg.nsim);
    row.outside_rate = static_cast<double>(row.outside) / static_cast<double>(cfg.nsim);
    row.band = band(row.rate, cfg.nsim);
    out.rows.push_back(row);
  }
  out.assumption_violated = out.signal_gradient_floor < 1e-6 || out.rows.back().outside_rate > 0.1;
  return out;
}

Mat analytic_noise_lambda(const Lattice& lattice, const Kernel& kernel, const Vec& s) {
  std::vector<StencilEntry> st;
  kernel_stencil(lattice, kernel, s, 1, st);
  const int D = static_cast<int>(s.size());
  double s2 = 0;
  Vec kdk = Vec::Zero(D);
  for (const auto& e : st) {
    s2 += e.k * e.k;
    kdk += e.k * e.dk;
  }
  const double S = std::sqrt(s2);
  Mat lam = Mat::Zero(D, D);
  for (const auto& e : st) {
    const Vec da = e.dk / S - e.k * kdk / (S * S * S);
    lam += outer_sq(da);
  }
  return lam;
}

nlohmann::json CltReport::to_json() const {
  return {{"d", setting.d},           {"varying_sigma", setting.varying_sigma},
          {"n", n},                   {"reps", reps},
          {"point", point[0]},        {"empirical", empirical(0, 0)},
          {"target", target(0, 0)},   {"max_rel_dev", max_rel_dev}};
}

CltReport check_t_gradient_clt(const NoiseSpec& noise, std::size_t n, std::size_t reps, const CltCase& c,
                               int threads) {
  noise.validate();
  if (noise.marginal != NoiseMarginal::Gaussian) throw ConfigError("clt check: needs Gaussian noise");
  if (n < 2 || reps < 2) throw ConfigError("clt check: need n >= 2 and reps >= 2");
  const Box dom{make_vec({0.0}), make_vec({40.0})};
  auto kernel = std::make_shared<GaussianKernel>(noise.fwhm, noise.truncation_sigmas);
  const Lattice lat = lattice_for(dom, *kernel);
  const Vec s0 = make_vec({20.0});
  // sigma(s) = 1 + 0.5 sin(2 pi s / 20): at s0 sigma = 1 and sigma' = pi / 20.
  const double w = 2.0 * std::numbers::pi / 20.0;
  auto sigma = [&](double s, double& d1, double& d2) {
    if (!c.varying_sigma) {
      d1 = d2 = 0.0;
      return 1.0;
    }
    d1 = 0.5 * w * std::cos(w * s);
    d2 = -0.5 * w * w * std::sin(w * s);
    return 1.0 + 0.5 * std::sin(w * s);
  };

  std::vector<double> g(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    std::vector<double> values;
    values.reserve(n * lat.size());
    for (std::size_t k = 0; k < n; ++k) {
      const auto v = white_noise(noise, lat.size(), stream_id(0x636c74ull, r), k);
      values.insert(values.end(), v.begin(), v.end());
    }
    const LatticeCohort eps(lat, std::move(values), n, kernel, dom, true);
    std::vector<Jet> jets;
    eps.jets(s0, 1, jets);
    double d1, d2;
    const double sg = sigma(s0[0], d1, d2);
    for (Jet& j : jets) {
      // Y = sigma (d + eps)
      const double e = j.value, de = j.grad[0];
      j.value = sg * (c.d + e);
      j.grad[0] = d1 * (c.d + e) + sg * de;
    }
    const CohortMoments mom = moments_from_jets(jets, 1, 1);
    const Jet dj = cohens_d_from_moments(mom.mean, mom.var, 1);
    g[r] = std::sqrt(static_cast<double>(n)) * dj.grad[0];
  });

  CltReport rep;
  rep.setting = c;
  rep.n = n;
  rep.reps = reps;
  rep.point = s0;
  double m2 = 0;
  for (double v : g) m2 += v * v;
  rep.empirical = Mat::Constant(1, 1, m2 / static_cast<double>(reps));
  const Mat lam_eps = analytic_noise_lambda(lat, *kernel, s0);
  double d1, d2;
  const double sg = sigma(s0[0], d1, d2);
  GradCov gc;
  gc.sigma2 = sg * sg;
  gc.lambda = Mat::Constant(1, 1, d1 * d1 + sg * sg * lam_eps(0, 0));
  gc.gamma = make_vec({sg * d1});
  rep.target = (1.0 + c.d * c.d) * lambda_prime(gc, make_vec({2.0 * sg * d1}));
  rep.max_rel_dev = std::abs(rep.empirical(0, 0) - rep.target(0, 0)) / rep.target(0, 0);
  return rep;
}

nlohmann::json Chi2GradReport::to_json() const {
  nlohmann::json j;
  j["reps"] = reps;
  j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
  j["cov"] = std::vector<double>(cov.data(), cov.data() + cov.size());
  j["target_cov"] = std::vector<double>(target_cov.data(), target_cov.data() + target_cov.size());
  j["corr_u"] = std::vector<double>(corr_u.data(), corr_u.data() + corr_u.size());
  j["max_rel_dev"] = max_rel_dev;
  j["ks"] = ks;
  return j;
}

Chi2GradReport check_chi2_gradient(const Chi2GradParams& p, std::size_t reps) {
  const int D = static_cast<int>(p.lambda.rows());
  if (D < 1 || D > kMaxDim || p.gamma.size() != D || p.components < 1 || !(p.sigma2 > 0.0) || reps < 2) {
    throw ConfigError("chi2 gradient check: malformed parameters");
  }
  // Joint covariance of (Y, grad Y) and a square root of it.
  Eigen::MatrixXd C(D + 1, D + 1);
  C(0, 0) = p.sigma2;
  C.block(1, 0, D, 1) = p.gamma;
  C.block(0, 1, 1, D) = p.gamma.transpose();
  C.block(1, 1, D, D) = p.lambda;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.eigenvalues().minCoeff() < -1e-10 * C.trace()) throw ConfigError("chi2 gradient check: covariance is not PSD");
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();

  Chi2GradReport rep;
  rep.reps = reps;
  std::vector<Vec> z(reps);
  std::vector<double> u(reps);
  Eigen::VectorXd w(D + 1);
  for (std::size_t r = 0; r < reps; ++r) {
    PhiloxStream rng(p.seed, stream_id(0x636869ull, r));
    double U = 0;
    Vec gU = Vec::Zero(D);
    for (int k = 0; k < p.components; ++k) {
      for (int i = 0; i <= D; ++i) w[i] = rng.normal();
      const Eigen::VectorXd x = root * w;
      U += x[0] * x[0];
      gU += 2.0 * x[0] * x.tail(D);
    }
    const Vec R = gU - 2.0 * p.gamma * U / p.sigma2;
    z[r] = R / std::sqrt(4.0 * U);
    u[r] = U;
  }
  const double nr = static_cast<double>(reps);
  rep.mean = Vec::Zero(D);
  double um = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    rep.mean += z[r];
    um += u[r];
  }
  rep.mean /= nr;
  um /= nr;
  rep.cov = Mat::Zero(D, D);
  Vec czu = Vec::Zero(D);
  double uvar = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    const Vec dz = z[r] - rep.mean;
    rep.cov += outer_sq(dz);
    czu += dz * (u[r] - um);
    uvar += (u[r] - um) * (u[r] - um);
  }
  rep.cov /= nr - 1;
  czu /= nr - 1;
  uvar /= nr - 1;
  rep.corr_u = Vec(D);
  for (int i = 0; i < D; ++i) {
    rep.corr_u[i] = rep.cov(i, i) > 0 ? czu[i] / std::sqrt(rep.cov(i, i) * uvar) : 0.0;
  }
  rep.target_cov = p.lambda - outer_sq(p.gamma) / p.sigma2;
  const double tn = rep.target_cov.norm();
  rep.max_rel_dev = tn > 1e-12 ? (rep.cov - rep.target_cov).norm() / tn : (rep.cov - rep.target_cov).norm();
  // KS distance of the standardized first coordinate.
  if (rep.target_cov(0, 0) > 1e-12) {
    std::vector<double> x(reps);
    const double sd = std::sqrt(rep.target_cov(0, 0));
    for (std::size_t r = 0; r < reps; ++r) x[r] = z[r][0] / sd;
    std::sort(x.begin(), x.end());
    double ks = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double F = normal_cdf(x[r]);
      ks = std::max({ks, std::abs(F - static_cast<double>(r) / nr), std::abs(static_cast<double>(r + 1) / nr - F)});
    }
    rep.ks = ks;
  }
  return rep;
}

double ScalarDist::mean() const {
  switch (kind) {
    case Kind::Normal: return a;
    case Kind::Uniform: return 0.5 * (a + b);
    case Kind::Constant: return a;
  }
  return a;
}

double ScalarDist::draw(PhiloxStream& rng) const {
  switch (kind) {
    case Kind::Normal: return a + b * rng.normal();
    case Kind::Uniform: return a + (b - a) * rng.uniform();
    case Kind::Constant: return a;
  }
  return a;
}

nlohmann::json DominanceReport::to_json() const {
  nlohmann::json j;
  j["reps"] = reps;
  j["holds"] = holds;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"x", r.x}, {"p_expected_b", r.p_expected_b}, {"p_ratio", r.p_ratio},
                       {"band", r.band}, {"holds", r.holds}};
    if (std::isnan(r.exact_ratio)) row["exact_ratio"] = nullptr;
    else row["exact_ratio"] = r.exact_ratio;
    j["rows"].push_back(row);
  }
  return j;
}

DominanceReport check_ratio_dominance(const ScalarDist& a, const ScalarDist& b, const std::vector<double>& x_grid,
                                      std::size_t reps, std::uint64_t seed) {
  using K = ScalarDist::Kind;
  if (b.kind == K::Normal || (b.kind == K::Uniform && !(b.a > 0.0 && b.b > b.a)) ||
      (b.kind == K::Constant && !(b.a > 0.0))) {
    throw ConfigError("ratio dominance: B must have positive support");
  }
  if ((a.kind == K::Normal && !(a.b > 0.0)) || (a.kind == K::Uniform && !(a.b > a.a))) {
    throw ConfigError("ratio dominance: malformed A");
  }
  if (reps < 2) throw ConfigError("ratio dominance: need reps >= 2");
  const double eb = b.mean();
  std::vector<std::size_t> c1(x_grid.size(), 0), c2(x_grid.size(), 0);
  PhiloxStream rng(seed, stream_id(0x726174ull));
  for (std::size_t r = 0; r < reps; ++r) {
    const double av = a.draw(rng);
    const double bv = b.draw(rng);
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
      c1[i] += av / eb > x_grid[i];
      c2[i] += av / bv > x_grid[i];
    }
  }
  DominanceReport rep;
  rep.reps = reps;
  rep.holds = true;
  const double nr = static_cast<double>(reps);
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    DominanceRow row;
    row.x = x_grid[i];
    row.p_expected_b = static_cast<double>(c1[i]) / nr;
    row.p_ratio = static_cast<double>(c2[i]) / nr;
    row.band = 2.0 * std::sqrt((row.p_expected_b * (1 - row.p_expected_b) + row.p_ratio * (1 - row.p_ratio)) / nr);
    row.holds = row.p_expected_b <= row.p_ratio + row.band;
    row.exact_ratio = std::numeric_limits<double>::quiet_NaN();
    if (a.kind == K::Normal) {
      auto tail = [&](double bv) { return 1.0 - normal_cdf((row.x * bv - a.a) / a.b); };
      if (b.kind == K::Constant) {
        row.exact_ratio = tail(b.a);
      } else {
        // Simpson's rule over the uniform support.
        const int m = 2000;
        const double h = (b.b - b.a) / m;
        double s = tail(b.a) + tail(b.b);
        for (int k = 1; k < m; ++k) s += (k % 2 ? 4.0 : 2.0) * tail(b.a + k * h);
        row.exact_ratio = s * h / 3.0 / (b.b - b.a);
      }
    }
    rep.holds = rep.holds && row.holds;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace peakcr
