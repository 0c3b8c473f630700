#include "config.hpp"

#include "peakcr/grid_field.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace peakcr;
using namespace peakcr::cli;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  std::optional<double> alpha;
  std::optional<std::string> method;
  std::optional<std::string> target;
  std::optional<std::size_t> nsim;
  std::optional<double> fwhm;
  std::vector<std::size_t> n;
};

struct Loaded {
  json doc = json::object({{"schema_version", kSchemaVersion}});
  std::optional<Node> top;
};

Loaded load(const Common& c) {
  Loaded l;
  if (!c.config.empty()) l.doc = load_json(c.config);
  l.top.emplace(root(l.doc));
  return l;
}

std::uint64_t resolve_seed(const Common& c, const Node& top) {
  if (c.seed) return *c.seed;
  if (top.has("seed")) {
    const long long s = top.at("seed").integer();
    if (s < 0) top.at("seed").fail("must be >= 0");
    return static_cast<std::uint64_t>(s);
  }
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  std::cerr << "peakcr: no seed given, using seed " << s << "\n";
  return s;
}

int resolve_threads(const Common& c) { return c.threads ? *c.threads : default_threads(); }

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os << text;
  if (!text.empty() && text.back() != '\n') os << '\n';
}

std::size_t single_n(const Common& c, const Node& top, std::size_t fallback) {
  if (c.n.size() > 1) throw ConfigError("--n: this subcommand takes one sample size");
  if (!c.n.empty()) return c.n.front();
  if (top.has("n")) {
    const long long v = top.at("n").integer();
    if (v < 2) top.at("n").fail("must be >= 2");
    return static_cast<std::size_t>(v);
  }
  return fallback;
}

NoiseSpec noise_from(const Common& c, const Node& top) {
  NoiseSpec nz = top.has("noise") ? parse_noise(top.at("noise")) : NoiseSpec{};
  if (c.fwhm) nz.fwhm = *c.fwhm;
  nz.validate();
  return nz;
}

// A cohort either read from a lattice container or simulated from the config.
struct CohortSource {
  std::optional<FieldCohort> cohort;
  std::shared_ptr<const Signal> signal;
};

CohortSource make_cohort(const Common& c, const Node& top, const std::string& container) {
  const NoiseSpec nz = noise_from(c, top);
  CohortSource src;
  if (!container.empty()) {
    const auto samples = read_container(container);
    if (samples.size() < 2) throw DataError(container + ": need at least two subjects");
    const Lattice lat = samples.front().lattice;
    std::vector<double> values;
    for (const auto& s : samples) values.insert(values.end(), s.values.begin(), s.values.end());
    auto kernel = std::make_shared<GaussianKernel>(nz.fwhm, nz.truncation_sigmas);
    auto comps = std::make_shared<LatticeCohort>(lat, std::move(values), samples.size(), kernel,
                                                 inset_domain(lat, kernel->radius()), nz.standardize);
    src.cohort.emplace(std::move(comps));
    return src;
  }
  src.signal = std::make_shared<Signal>(top.has("signal") ? parse_signal(top.at("signal"))
                                                          : beta_interior_preset(true, 3, 1.0, 15.0, 4.0));
  NoiseSpec seeded = nz;
  seeded.seed = resolve_seed(c, top);
  src.cohort.emplace(generate_cohort(src.signal, seeded, single_n(c, top, 20)));
  return src;
}

int cmd_simulate(const Common& c) {
  const Loaded l = load(c);
  const Node& top = *l.top;
  if (c.out.empty()) throw ConfigError("simulate: --out is required (lattice container path)");
  const auto signal = std::make_shared<Signal>(top.has("signal") ? parse_signal(top.at("signal"))
                                                                 : beta_interior_preset(true, 3, 1.0, 15.0, 4.0));
  NoiseSpec nz = noise_from(c, top);
  nz.seed = resolve_seed(c, top);
  const std::size_t n = single_n(c, top, 20);
  const GaussianKernel kernel(nz.fwhm, nz.truncation_sigmas);
  const Lattice lat = lattice_for(signal->domain(), kernel);
  // Raw lattice observations: white noise plus the signal at the lattice points.
  std::vector<std::vector<double>> subjects;
  for (std::size_t s = 0; s < n; ++s) {
    auto w = white_noise(nz, lat.size(), 0, s);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = nz.scale * w[i] + signal->value(lat.point(i));
    subjects.push_back(std::move(w));
  }
  write_container(c.out, lat, subjects);
  json j{{"seed", nz.seed}, {"n", n}, {"container", c.out}};
  j["lattice"] = {{"dim", lat.dim},
                  {"shape", std::vector<std::size_t>(lat.shape.begin(), lat.shape.begin() + lat.dim)},
                  {"spacing", std::vector<double>(lat.spacing.begin(), lat.spacing.begin() + lat.dim)},
                  {"origin", std::vector<double>(lat.origin.begin(), lat.origin.begin() + lat.dim)}};
  j["domain"] = {{"lo", to_json(signal->domain().lo)}, {"hi", to_json(signal->domain().hi)}};
  j["maxima"] = json::array();
  for (const Vec& m : signal->maxima()) j["maxima"].push_back(to_json(m));
  j["minima"] = json::array();
  for (const Vec& m : signal->minima()) j["minima"].push_back(to_json(m));
  std::cout << j.dump(2) << "\n";
  return 0;
}

DerivedFieldKind field_kind(const std::string& t) {
  if (t == "mean") return DerivedFieldKind::Mean;
  if (t == "cohensd") return DerivedFieldKind::CohensD;
  if (t == "t") return DerivedFieldKind::TStat;
  throw ConfigError("unknown target \"" + t + "\" (expected mean, cohensd or t)");
}

int cmd_peaks(const Common& c, const std::string& container) {
  const Loaded l = load(c);
  const Node& top = *l.top;
  const CohortSource src = make_cohort(c, top, container);
  SearchSpec search = top.has("search") ? parse_search(top.at("search")) : SearchSpec{};
  const std::string t = c.target.value_or("mean");
  const DerivedField field(*src.cohort, field_kind(t));
  const CriticalPoints cp = find_critical_points(field, search);
  json j{{"target", t}, {"n", src.cohort->n()}, {"seeds", cp.seeds}, {"dropped", cp.dropped}};
  j["points"] = json::array();
  for (const auto& p : cp.points) j["points"].push_back(to_json(p));
  emit(c.out, j.dump(2));
  return 0;
}

json regions_json(const PeakRegions& pr) {
  json list = json::array();
  for (std::size_t k = 0; k < pr.peaks.size(); ++k) {
    list.push_back({{"ball", k},
                    {"peak", to_json(pr.peaks[k])},
                    {"marginal", to_json(pr.marginal[k])},
                    {"joint", to_json(pr.joint[k])}});
  }
  return list;
}

RegionRequest request_from(const Common& c, const Node& top) {
  RegionRequest req;
  if (top.has("regions")) {
    const Node r = top.at("regions");
    r.allow({"alpha", "method", "target"});
    req.alpha = r.number("alpha", req.alpha);
    if (r.has("method")) req.method = parse_method(r.at("method").string());
    if (r.has("target")) req.target = parse_target(r.at("target").string());
  }
  if (c.alpha) req.alpha = *c.alpha;
  if (c.method) req.method = parse_method(*c.method);
  if (c.target) req.target = parse_target(*c.target);
  if (!(req.alpha > 0.0 && req.alpha < 1.0)) throw ConfigError("--alpha must be in (0,1)");
  if (req.method == RegionMethod::MonteCarlo && req.target == RegionTarget::CohensD) monte_carlo_region_cohensd();
  req.search = top.has("search") ? parse_search(top.at("search")) : SearchSpec{};
  req.cov = top.has("covariance") ? parse_covariance(top.at("covariance"))
                                  : CovOptions{CovMode::StationaryPooled, 1.0, true};
  if (top.has("monte_carlo")) req.mc = parse_mc(top.at("monte_carlo"));
  return req;
}

int cmd_regions(const Common& c, const std::string& container) {
  const Loaded l = load(c);
  const Node& top = *l.top;
  RegionRequest req = request_from(c, top);
  const CohortSource src = make_cohort(c, top, container);
  if (req.search.balls.empty()) {
    if (!src.signal) throw ConfigError("regions: a container input needs search balls in the config (/search/balls)");
    req.search.balls = default_balls(*src.signal);
  }
  if (req.method == RegionMethod::MonteCarlo) {
    req.mc.seed = c.seed ? *c.seed : (top.has("seed") ? static_cast<std::uint64_t>(top.at("seed").integer()) : 0);
  }
  const PeakRegions pr = peak_regions(*src.cohort, req);
  json j{{"target", to_string(req.target)}, {"method", to_string(req.method)}, {"alpha", req.alpha},
         {"n", src.cohort->n()}};
  j["regions"] = regions_json(pr);
  emit(c.out, j.dump(2));
  return 0;
}

int cmd_cover(const Common& c, const std::string& csv, const std::string& plot) {
  const Loaded l = load(c);
  const Node& top = *l.top;
  ExperimentConfig cfg = parse_experiment(top);
  if (c.fwhm) cfg.noise.fwhm = *c.fwhm;
  if (c.alpha) cfg.alpha = *c.alpha;
  if (c.method) cfg.methods = {parse_method(*c.method)};
  if (c.target) cfg.target = parse_target(*c.target);
  if (c.nsim) cfg.nsim = *c.nsim;
  if (!c.n.empty()) cfg.n_list = c.n;
  cfg.master_seed = resolve_seed(c, top);
  cfg.mc.seed = cfg.master_seed;
  cfg.threads = resolve_threads(c);
  const CoverageReport rep = run_coverage(cfg);
  emit(c.out, rep.to_json().dump(2));
  if (!csv.empty()) emit(csv, rep.to_csv());
  if (!plot.empty()) emit(plot, rep.plot_data());
  for (const auto& s : rep.summaries) {
    std::cerr << "N=" << s.n << " " << to_string(s.method) << ": average " << s.average_coverage << ", joint "
              << s.joint_coverage << ", failures " << s.failures << "\n";
  }
  return 0;
}

std::vector<std::vector<double>> read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(lineno) + ": not a number: " + cell);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no series");
  return rows;
}

int cmd_spectrum(const Common& c, const std::string& input) {
  const Loaded l = load(c);
  const Node& top = *l.top;
  if (input.empty()) throw ConfigError("spectrum: --input is required (CSV, one subject per line)");
  const WelchSpec w = top.has("welch") ? parse_welch(top.at("welch")) : WelchSpec{};
  RegionRequest req = request_from(c, top);
  if (req.search.balls.empty()) throw ConfigError("spectrum: search balls (Hz) are required at /search/balls");
  req.mc.seed = c.seed.value_or(0);
  auto cohort = std::make_shared<SpectrumCohort>(read_series_csv(input), w);
  const PeakRegions pr = spectrum_peak_regions(cohort, req.search.balls, req.alpha, req.target, req.method, req.mc);
  json j{{"target", to_string(req.target)},
         {"method", to_string(req.method)},
         {"alpha", req.alpha},
         {"n", cohort->size()},
         {"frequency_step", w.frequency_step()},
         {"floored", cohort->floored()}};
  j["regions"] = regions_json(pr);
  emit(c.out, j.dump(2));
  return 0;
}

void add_common(CLI::App* app, Common& c, bool experiment) {
  app->add_option("--config", c.config, "JSON config file");
  app->add_option("--seed", c.seed, "master seed (default: drawn and printed)");
  app->add_option("--threads", c.threads, "worker threads (default: PEAKCR_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--out", c.out, "output path (default: stdout)");
  app->add_option("--alpha", c.alpha, "1 - confidence level");
  app->add_option("--method", c.method, "region method: asym or mc");
  app->add_option("--target", c.target, "mean or cohensd");
  app->add_option("--fwhm", c.fwhm, "smoothing kernel FWHM in voxels");
  auto* n = app->add_option("--n", c.n, "sample size(s)");
  n->delimiter(',');
  if (experiment) app->add_option("--nsim", c.nsim, "replicates per sample size");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peakcr: confidence regions for peak locations of smooth random fields"};
  app.require_subcommand(1);
  Common common;
  std::string container, csv, plot, input;

  auto* sim = app.add_subcommand("simulate", "generate a cohort and write it as a lattice container");
  add_common(sim, common, false);
  auto* peaks = app.add_subcommand("peaks", "critical points of the mean, Cohen's d or t field");
  add_common(peaks, common, false);
  peaks->add_option("--cohort", container, "lattice container (default: simulate from the config)");
  auto* regions = app.add_subcommand("regions", "peak location confidence regions");
  add_common(regions, common, false);
  regions->add_option("--cohort", container, "lattice container (default: simulate from the config)");
  auto* cover = app.add_subcommand("cover", "coverage experiment");
  add_common(cover, common, true);
  cover->add_option("--csv", csv, "also write one CSV row per (N, method, peak)");
  cover->add_option("--plot-data", plot, "write coverage-vs-N series as CSV");
  auto* spectrum = app.add_subcommand("spectrum", "Welch spectrum peak regions");
  add_common(spectrum, common, false);
  spectrum->add_option("--input", input, "CSV time series, one subject per line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "peakcr: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*peaks) return cmd_peaks(common, container);
    if (*regions) return cmd_regions(common, container);
    if (*cover) return cmd_cover(common, csv, plot);
    if (*spectrum) return cmd_spectrum(common, input);
  } catch (const ConfigError& e) {
    std::cerr << "peakcr: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "peakcr: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "peakcr: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "peakcr: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
