#include "config.hpp"

#include <fstream>

namespace peakcr::cli {

namespace {

std::string escape(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

const char* type_name(const json& j) { return j.type_name(); }

}  // namespace

void Node::fail(const std::string& what) const {
  throw ConfigError("config " + (ptr_.empty() ? std::string("/") : ptr_) + ": " + what);
}

bool Node::has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

Node Node::at(const std::string& key) const {
  if (!j_->is_object()) fail(std::string("expected an object, got ") + type_name(*j_));
  auto it = j_->find(key);
  if (it == j_->end()) Node(*j_, ptr_ + "/" + escape(key)).fail("missing");
  return Node(*it, ptr_ + "/" + escape(key));
}

Node Node::at(std::size_t i) const {
  if (!j_->is_array()) fail(std::string("expected an array, got ") + type_name(*j_));
  if (i >= j_->size()) fail("index out of range");
  return Node((*j_)[i], ptr_ + "/" + std::to_string(i));
}

std::size_t Node::size() const {
  if (!j_->is_array()) fail(std::string("expected an array, got ") + type_name(*j_));
  return j_->size();
}

void Node::allow(std::initializer_list<const char*> known) const {
  if (!j_->is_object()) fail(std::string("expected an object, got ") + type_name(*j_));
  for (auto it = j_->begin(); it != j_->end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) Node(it.value(), ptr_ + "/" + escape(it.key())).fail("unknown key");
  }
}

double Node::number() const {
  if (!j_->is_number()) fail(std::string("expected a number, got ") + type_name(*j_));
  return j_->get<double>();
}

long long Node::integer() const {
  if (!j_->is_number_integer()) fail(std::string("expected an integer, got ") + type_name(*j_));
  return j_->get<long long>();
}

bool Node::boolean() const {
  if (!j_->is_boolean()) fail(std::string("expected a boolean, got ") + type_name(*j_));
  return j_->get<bool>();
}

std::string Node::string() const {
  if (!j_->is_string()) fail(std::string("expected a string, got ") + type_name(*j_));
  return j_->get<std::string>();
}

Vec Node::vec() const {
  const std::size_t n = size();
  if (n < 1 || n > static_cast<std::size_t>(kMaxDim)) fail("expected 1 or 2 coordinates");
  Vec v(static_cast<int>(n));
  for (std::size_t i = 0; i < n; ++i) v[static_cast<int>(i)] = at(i).number();
  return v;
}

double Node::number(const std::string& key, double fallback) const { return has(key) ? at(key).number() : fallback; }
long long Node::integer(const std::string& key, long long fallback) const {
  return has(key) ? at(key).integer() : fallback;
}
bool Node::boolean(const std::string& key, bool fallback) const { return has(key) ? at(key).boolean() : fallback; }
std::string Node::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key).string() : fallback;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

Node root(const json& doc) {
  Node r(doc, "");
  r.allow({"schema_version", "seed", "signal", "noise", "n", "search", "covariance", "monte_carlo", "experiment",
           "welch", "regions"});
  if (!r.has("schema_version")) r.at("schema_version");  // reports it missing
  if (r.at("schema_version").integer() != kSchemaVersion) {
    r.at("schema_version").fail("unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  return r;
}

SignalSpec parse_signal(const Node& n) {
  const std::string kind = n.at("kind").string();
  if (kind == "beta") {
    n.allow({"kind", "shape", "peaks", "amplitude", "width", "smoothing_fwhm", "layout", "margin"});
    const std::string shape = n.string("shape", "narrow");
    if (shape != "narrow" && shape != "wide") n.at("shape").fail("expected \"narrow\" or \"wide\"");
    const long long peaks = n.integer("peaks", 3);
    if (peaks < 1) n.at("peaks").fail("must be >= 1");
    const double amp = n.number("amplitude", 1.0);
    const double width = n.number("width", 15.0);
    if (!(width > 0.0)) n.at("width").fail("must be positive");
    const double smooth = n.number("smoothing_fwhm", 4.0);
    if (smooth < 0.0) n.at("smoothing_fwhm").fail("must be >= 0");
    const std::string layout = n.string("layout", "interior");
    if (layout == "interior") {
      if (n.has("margin")) n.at("margin").fail("only used with layout \"sections\"");
      return beta_interior_preset(shape == "narrow", static_cast<int>(peaks), amp, width, smooth);
    }
    if (layout != "sections") n.at("layout").fail("expected \"interior\" or \"sections\"");
    return beta_preset(shape == "narrow", static_cast<int>(peaks), amp, width, smooth, n.number("margin", 0.0));
  }
  if (kind == "bumps") {
    n.allow({"kind", "preset", "amplitude", "centers", "widths", "amplitudes", "domain"});
    if (n.has("preset")) {
      const std::string p = n.at("preset").string();
      if (p != "narrow" && p != "wide") n.at("preset").fail("expected \"narrow\" or \"wide\"");
      return bumps_preset(p == "narrow", n.number("amplitude", 1.0));
    }
    GaussBumps2D g;
    const Node c = n.at("centers");
    for (std::size_t i = 0; i < c.size(); ++i) g.centers.push_back(c.at(i).vec());
    const Node w = n.at("widths");
    for (std::size_t i = 0; i < w.size(); ++i) g.widths.push_back(w.at(i).number());
    const Node a = n.at("amplitudes");
    for (std::size_t i = 0; i < a.size(); ++i) g.amplitudes.push_back(a.at(i).number());
    const Node d = n.at("domain");
    d.allow({"lo", "hi"});
    return SignalSpec{g, Box{d.at("lo").vec(), d.at("hi").vec()}};
  }
  if (kind == "quadratic") {
    n.allow({"kind", "theta", "curvature", "domain"});
    Quadratic q{n.at("theta").vec(), n.at("curvature").number()};
    const Node d = n.at("domain");
    d.allow({"lo", "hi"});
    return SignalSpec{q, Box{d.at("lo").vec(), d.at("hi").vec()}};
  }
  n.at("kind").fail("expected \"beta\", \"bumps\" or \"quadratic\"");
}

NoiseSpec parse_noise(const Node& n) {
  n.allow({"marginal", "df", "fwhm", "standardize", "truncation_sigmas", "scale"});
  NoiseSpec s;
  const std::string m = n.string("marginal", "gaussian");
  if (m == "gaussian") s.marginal = NoiseMarginal::Gaussian;
  else if (m == "t") s.marginal = NoiseMarginal::StudentT;
  else n.at("marginal").fail("expected \"gaussian\" or \"t\"");
  s.df = static_cast<int>(n.integer("df", 3));
  s.fwhm = n.number("fwhm", 6.0);
  s.standardize = n.boolean("standardize", true);
  s.truncation_sigmas = n.number("truncation_sigmas", 4.0);
  s.scale = n.number("scale", 1.0);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
  return s;
}

SearchSpec parse_search(const Node& n) {
  n.allow({"balls", "grid_refinement", "newton_tol", "max_iters", "dedup_radius", "voxel"});
  SearchSpec s;
  s.grid_refinement = static_cast<int>(n.integer("grid_refinement", s.grid_refinement));
  s.newton_tol = n.number("newton_tol", s.newton_tol);
  s.max_iters = static_cast<int>(n.integer("max_iters", s.max_iters));
  s.dedup_radius = n.number("dedup_radius", s.dedup_radius);
  s.voxel = n.number("voxel", s.voxel);
  if (n.has("balls")) {
    const Node b = n.at("balls");
    for (std::size_t i = 0; i < b.size(); ++i) {
      const Node e = b.at(i);
      e.allow({"center", "radius"});
      s.balls.push_back(Ball{e.at("center").vec(), e.at("radius").number()});
    }
  }
  return s;
}

CovOptions parse_covariance(const Node& n) {
  n.allow({"mode", "pool_step", "check_conditioning"});
  CovOptions c{CovMode::StationaryPooled, 1.0, true};
  const std::string m = n.string("mode", "pooled");
  if (m == "pooled") c.mode = CovMode::StationaryPooled;
  else if (m == "pointwise") c.mode = CovMode::Pointwise;
  else n.at("mode").fail("expected \"pooled\" or \"pointwise\"");
  c.pool_step = n.number("pool_step", 1.0);
  if (!(c.pool_step > 0.0)) n.at("pool_step").fail("must be positive");
  c.check_conditioning = n.boolean("check_conditioning", true);
  return c;
}

McConfig parse_mc(const Node& n) {
  n.allow({"draws", "eigen_floor"});
  McConfig m;
  const long long draws = n.integer("draws", static_cast<long long>(m.draws));
  if (draws < 1) n.at("draws").fail("must be >= 1");
  m.draws = static_cast<std::size_t>(draws);
  m.eigen_floor = n.number("eigen_floor", m.eigen_floor);
  try {
    m.validate();
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
  return m;
}

WelchSpec parse_welch(const Node& n) {
  n.allow({"segment_length", "sample_rate", "window_edge", "demean"});
  WelchSpec w;
  w.segment_length = static_cast<int>(n.integer("segment_length", w.segment_length));
  w.sample_rate = n.number("sample_rate", w.sample_rate);
  w.window_edge = n.number("window_edge", w.window_edge);
  w.demean = n.boolean("demean", w.demean);
  try {
    w.validate();
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
  return w;
}

RegionMethod parse_method(const std::string& s) {
  if (s == "asym" || s == "asymptotic") return RegionMethod::Asymptotic;
  if (s == "mc" || s == "monte_carlo") return RegionMethod::MonteCarlo;
  throw ConfigError("unknown method \"" + s + "\" (expected asym or mc)");
}

RegionTarget parse_target(const std::string& s) {
  if (s == "mean") return RegionTarget::Mean;
  if (s == "cohensd") return RegionTarget::CohensD;
  throw ConfigError("unknown target \"" + s + "\" (expected mean or cohensd)");
}

ExperimentConfig parse_experiment(const Node& top) {
  ExperimentConfig cfg;
  cfg.signal = top.has("signal") ? parse_signal(top.at("signal")) : beta_interior_preset(true, 3, 1.0, 15.0, 4.0);
  if (top.has("noise")) cfg.noise = parse_noise(top.at("noise"));
  if (top.has("search")) cfg.search = parse_search(top.at("search"));
  if (top.has("covariance")) cfg.cov = parse_covariance(top.at("covariance"));
  if (top.has("monte_carlo")) cfg.mc = parse_mc(top.at("monte_carlo"));
  if (top.has("experiment")) {
    const Node e = top.at("experiment");
    e.allow({"n", "nsim", "alpha", "methods", "target", "max_failure_rate", "track_identifiability"});
    if (e.has("n")) {
      const Node ns = e.at("n");
      cfg.n_list.clear();
      for (std::size_t i = 0; i < ns.size(); ++i) {
        const long long v = ns.at(i).integer();
        if (v < 2) ns.at(i).fail("every N must be >= 2");
        cfg.n_list.push_back(static_cast<std::size_t>(v));
      }
    }
    const long long nsim = e.integer("nsim", static_cast<long long>(cfg.nsim));
    if (nsim < 1) e.at("nsim").fail("must be >= 1");
    cfg.nsim = static_cast<std::size_t>(nsim);
    cfg.alpha = e.number("alpha", cfg.alpha);
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) e.at("alpha").fail("must be in (0,1)");
    if (e.has("methods")) {
      const Node m = e.at("methods");
      cfg.methods.clear();
      for (std::size_t i = 0; i < m.size(); ++i) {
        try {
          cfg.methods.push_back(parse_method(m.at(i).string()));
        } catch (const ConfigError& err) {
          m.at(i).fail(err.what());
        }
      }
    }
    if (e.has("target")) {
      try {
        cfg.target = parse_target(e.at("target").string());
      } catch (const ConfigError& err) {
        e.at("target").fail(err.what());
      }
    }
    cfg.max_failure_rate = e.number("max_failure_rate", cfg.max_failure_rate);
    cfg.track_identifiability = e.boolean("track_identifiability", false);
  }
  return cfg;
}

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> r;
    for (int k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

json to_json(const PeakEstimate& p) {
  json j{{"location", to_json(p.location)},
         {"value", p.value},
         {"gradient_norm", p.gradient_norm},
         {"hessian", to_json(p.hessian)},
         {"kind", to_string(p.kind)}};
  j["ball"] = p.ball_index ? json(*p.ball_index) : json(nullptr);
  return j;
}

json to_json(const ConfidenceEllipsoid& r) {
  return {{"center", to_json(r.center)},     {"shape", to_json(r.shape)},
          {"threshold", r.threshold},        {"n", r.n},
          {"alpha", r.alpha},                {"method", to_string(r.method)},
          {"target", to_string(r.target)},   {"half_axes", to_json(half_axes(r))},
          {"draws_discarded", r.draws_discarded}};
}

}  // namespace peakcr::cli
