#include "msle/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "msle/commutation.hpp"
#include "msle/coupling.hpp"
#include "msle/loewner.hpp"
#include "msle/partition.hpp"
#include "msle/sampler.hpp"

#ifndef MSLE_VERSION
#define MSLE_VERSION "unknown"
#endif

namespace msle {

using json = nlohmann::ordered_json;

namespace {

struct CheckName {
  CheckKind kind;
  const char* name;
};

constexpr CheckName kChecks[] = {
    {CheckKind::zip, "zip"},
    {CheckKind::hcap, "hcap"},
    {CheckKind::bpz, "bpz"},
    {CheckKind::kz, "kz"},
    {CheckKind::commutator, "commutator"},
    {CheckKind::schemes, "schemes"},
    {CheckKind::martingale, "martingale"},
    {CheckKind::girsanov, "girsanov"},
    {CheckKind::inverse, "inverse"},
    {CheckKind::coupling_pde, "coupling_pde"},
    {CheckKind::coupling_mc, "coupling_mc"},
    {CheckKind::crossvar, "crossvar"},
};

const std::set<std::string> kKnownFields = {
    "check", "mode",    "kappa",    "gamma",      "chi",         "points",  "i_index",
    "j_index", "t_final", "dt",     "n_paths",    "seed",        "eps_tilde", "c",
    "fd_step", "bulk_points", "bound_n", "out_path", "epsilon_signs", "workers"};

double read_number(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) throw ConfigError(key, "must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(key, "must be finite");
  return x;
}

std::optional<double> opt_number(const json& doc, const char* key) {
  if (!doc.contains(key)) return std::nullopt;
  return read_number(doc, key);
}

std::optional<std::size_t> opt_count(const json& doc, const char* key) {
  if (!doc.contains(key)) return std::nullopt;
  const auto& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1)
    throw ConfigError(key, "must be a positive integer");
  return static_cast<std::size_t>(v.get<long long>());
}

template <typename T>
const T& need(const std::optional<T>& v, const char* key) {
  if (!v) throw ConfigError(key, "required for this check");
  return *v;
}

bool uses(CheckKind k, std::initializer_list<CheckKind> set) {
  return std::find(set.begin(), set.end(), k) != set.end();
}

}  // namespace

const char* to_string(CheckKind kind) {
  for (const auto& c : kChecks)
    if (c.kind == kind) return c.name;
  return "?";
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  for (const auto& [key, value] : doc.items())
    if (!kKnownFields.count(key)) throw ConfigError(key, "unknown field");

  ExperimentConfig cfg;
  cfg.raw = doc;
  if (!doc.contains("check")) throw ConfigError("check", "missing");
  if (!doc["check"].is_string()) throw ConfigError("check", "must be a string");
  const std::string check = doc["check"].get<std::string>();
  bool found = false;
  for (const auto& c : kChecks)
    if (check == c.name) {
      cfg.check = c.kind;
      found = true;
    }
  if (!found) throw ConfigError("check", "unknown check '" + check + "'");
  const CheckKind k = cfg.check;
  using enum CheckKind;

  if (!doc.contains("mode")) throw ConfigError("mode", "missing");
  if (!doc["mode"].is_string()) throw ConfigError("mode", "must be a string");
  try {
    cfg.mode = mode_from_string(doc["mode"].get<std::string>());
  } catch (const InputError& e) {
    throw ConfigError("mode", e.what());
  }

  cfg.kappa = opt_number(doc, "kappa");
  cfg.gamma = opt_number(doc, "gamma");
  cfg.chi = opt_number(doc, "chi");
  cfg.t_final = opt_number(doc, "t_final");
  cfg.dt = opt_number(doc, "dt");
  cfg.eps_tilde = opt_number(doc, "eps_tilde");
  cfg.c = opt_number(doc, "c");
  cfg.fd_step = opt_number(doc, "fd_step");
  cfg.bound_n = opt_number(doc, "bound_n");
  cfg.n_paths = opt_count(doc, "n_paths");
  cfg.i_index = opt_count(doc, "i_index");
  cfg.j_index = opt_count(doc, "j_index");
  cfg.workers = opt_count(doc, "workers");

  if (doc.contains("seed")) {
    const auto& v = doc["seed"];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
      throw ConfigError("seed", "must be a nonnegative integer");
    cfg.seed = v.get<std::uint64_t>();
  }
  if (doc.contains("out_path")) {
    if (!doc["out_path"].is_string()) throw ConfigError("out_path", "must be a string");
    cfg.out_path = doc["out_path"].get<std::string>();
  }
  if (doc.contains("points")) {
    const auto& v = doc["points"];
    if (!v.is_array() || v.empty()) throw ConfigError("points", "must be a nonempty array of numbers");
    for (const auto& x : v) {
      if (!x.is_number() || !std::isfinite(x.get<double>()))
        throw ConfigError("points", "entries must be finite numbers");
      cfg.points.push_back(x.get<double>());
    }
  }
  if (doc.contains("bulk_points")) {
    const auto& v = doc["bulk_points"];
    if (!v.is_array()) throw ConfigError("bulk_points", "must be an array of [re, im] pairs");
    for (const auto& z : v) {
      if (!z.is_array() || z.size() != 2 || !z[0].is_number() || !z[1].is_number())
        throw ConfigError("bulk_points", "entries must be [re, im] pairs");
      const double re = z[0].get<double>(), im = z[1].get<double>();
      if (!std::isfinite(re) || !std::isfinite(im))
        throw ConfigError("bulk_points", "entries must be finite");
      if (!(im > 0.0)) throw ConfigError("bulk_points", "points must lie in the upper half-plane");
      cfg.bulk_points.emplace_back(re, im);
    }
  }
  if (doc.contains("epsilon_signs")) {
    const auto& v = doc["epsilon_signs"];
    if (!v.is_array()) throw ConfigError("epsilon_signs", "must be an array of +1/-1");
    std::vector<int> signs;
    for (const auto& s : v) {
      if (!s.is_number_integer() || (s.get<int>() != 1 && s.get<int>() != -1))
        throw ConfigError("epsilon_signs", "entries must be +1 or -1");
      signs.push_back(s.get<int>());
    }
    cfg.epsilon_signs = signs;
  }

  // Required fields per check.
  if (k != zip) need(cfg.kappa, "kappa");
  if (cfg.kappa && !(*cfg.kappa > 0.0)) throw ConfigError("kappa", "must be positive");
  const bool needs_points = uses(k, {bpz, kz, commutator, schemes, martingale, girsanov,
                                     coupling_pde, coupling_mc, crossvar});
  if (needs_points && cfg.points.empty()) throw ConfigError("points", "required for this check");
  if (!cfg.points.empty()) {
    try {
      validate_config(cfg.points);
    } catch (const InputError& e) {
      throw ConfigError("points", e.what());
    }
  }
  if (uses(k, {bpz, kz, commutator, schemes}) && cfg.points.size() < 2)
    throw ConfigError("points", "at least two points required");
  if (uses(k, {commutator, schemes, martingale, girsanov, coupling_mc, crossvar}))
    need(cfg.i_index, "i_index");
  if (uses(k, {commutator, schemes})) need(cfg.j_index, "j_index");
  if (cfg.i_index && !cfg.points.empty() && *cfg.i_index > cfg.points.size())
    throw ConfigError("i_index", "out of range");
  if (cfg.j_index && !cfg.points.empty() && *cfg.j_index > cfg.points.size())
    throw ConfigError("j_index", "out of range");
  if (cfg.i_index && cfg.j_index && *cfg.i_index == *cfg.j_index)
    throw ConfigError("j_index", "must differ from i_index");
  if (uses(k, {zip, hcap, martingale, girsanov, inverse, coupling_mc, crossvar})) {
    need(cfg.t_final, "t_final");
    need(cfg.dt, "dt");
  }
  if (k == schemes) need(cfg.dt, "dt");
  if (uses(k, {schemes, martingale, girsanov, inverse, coupling_mc, crossvar}))
    need(cfg.n_paths, "n_paths");
  if (uses(k, {hcap, schemes, martingale, girsanov, inverse, coupling_mc, crossvar}) &&
      !doc.contains("seed"))
    throw ConfigError("seed", "required for this check");
  if (k == schemes) need(cfg.eps_tilde, "eps_tilde");
  if (uses(k, {coupling_pde, coupling_mc, crossvar}) && cfg.bulk_points.empty())
    throw ConfigError("bulk_points", "required for this check");
  if (k == crossvar && cfg.bulk_points.size() < 2)
    throw ConfigError("bulk_points", "at least two points required");
  if (uses(k, {coupling_pde, coupling_mc, crossvar}) && cfg.mode == Mode::backward)
    need(cfg.gamma, "gamma");
  if (uses(k, {schemes, inverse}) && cfg.mode != Mode::backward)
    throw ConfigError("mode", "this check is defined for backward chains");

  if (cfg.t_final && !(*cfg.t_final >= 0.0)) throw ConfigError("t_final", "must be >= 0");
  if (cfg.dt && !(*cfg.dt > 0.0)) throw ConfigError("dt", "must be positive");
  if (cfg.t_final && cfg.dt && *cfg.t_final > 0.0 && !(*cfg.dt < *cfg.t_final))
    throw ConfigError("dt", "must be smaller than t_final");
  if (cfg.fd_step && !(*cfg.fd_step > 0.0)) throw ConfigError("fd_step", "must be positive");
  if (cfg.eps_tilde && !(*cfg.eps_tilde >= 0.0)) throw ConfigError("eps_tilde", "must be >= 0");
  if (cfg.c && !(*cfg.c > 0.0)) throw ConfigError("c", "must be positive");
  if (cfg.bound_n && !(*cfg.bound_n > 0.0)) throw ConfigError("bound_n", "must be positive");
  if (cfg.gamma && !(*cfg.gamma > 0.0)) throw ConfigError("gamma", "must be positive");
  if (cfg.chi && !(*cfg.chi > 0.0)) throw ConfigError("chi", "must be positive");
  if (cfg.epsilon_signs && !cfg.points.empty() && cfg.epsilon_signs->size() != cfg.points.size())
    throw ConfigError("epsilon_signs", "must have one entry per point");
  return cfg;
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string z_name(std::complex<double> z) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "z=%.6g%+.6gi", z.real(), z.imag());
  return buf;
}

Params make_params(const ExperimentConfig& c) {
  const std::size_t n = c.points.empty() ? 1 : c.points.size();
  return Params::make(c.mode, *c.kappa, n, c.gamma, c.chi,
                      c.epsilon_signs ? *c.epsilon_signs : std::vector<int>{});
}

std::size_t idx(const std::optional<std::size_t>& one_based) { return *one_based - 1; }

SleSetup make_setup(const ExperimentConfig& c) {
  SleSetup s;
  s.params = make_params(c);
  s.spec = PartitionSpec::make(c.mode, *c.kappa, c.points.size());
  s.cfg = validate_config(c.points);
  s.index_i = idx(c.i_index);
  s.t_final = *c.t_final;
  s.dt = *c.dt;
  s.bound_n = c.bound_n;
  return s;
}

CheckReport check_zip(const ExperimentConfig& c) {
  CheckReport r;
  const double t = *c.t_final;
  const std::size_t n = steps_for(t, *c.dt);
  const auto path = DrivingPath::constant(0.0, n == 0 ? *c.dt : t / static_cast<double>(n), n);
  std::vector<cplx> zs = c.bulk_points;
  if (zs.empty()) {
    // Forward chains swallow the imaginary axis, so their default grid avoids it.
    const std::vector<double> re = c.mode == Mode::backward
                                       ? std::vector<double>{-2, -1, 0, 1, 2}
                                       : std::vector<double>{-2, -1, -0.5, 0.5, 1.5};
    for (double a : re)
      for (double b : {0.5, 1.0, 1.5, 2.0, 2.5}) zs.emplace_back(a, b);
  }
  const ChainState st = evolve(ChainState::make(c.mode, {}, zs), path);
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const cplx ref = reference_map_zero_driving(zs[k], path.dt * static_cast<double>(n), c.mode);
    r.rows.push_back(make_report(z_name(zs[k]), std::abs(st.bulk[k].value - ref), 0.0, 0.0, 1e-10, 1));
  }
  return r;
}

CheckReport check_hcap(const ExperimentConfig& c) {
  CheckReport r;
  const double t = *c.t_final;
  const std::size_t n = steps_for(t, *c.dt);
  const double delta = n == 0 ? *c.dt : t / static_cast<double>(n);
  const std::size_t paths = c.n_paths.value_or(1);
  std::vector<HcapEstimate> est(paths);
  parallel_for(paths, [&](std::size_t p) {
    auto incs = sample_increments(RngSpec{c.seed, p, 0}, delta, n);
    const auto path = DrivingPath::from_increments(0.0, *c.kappa, delta, std::move(incs));
    est[p] = extract_hcap(c.mode, path, 1e4);
  });
  for (std::size_t p = 0; p < paths; ++p)
    r.rows.push_back(make_report("path " + std::to_string(p), est[p].hcap, 0.0,
                                 2.0 * delta * static_cast<double>(n), 1e-4, 1));
  return r;
}

CheckReport check_bpz(const ExperimentConfig& c) {
  CheckReport r;
  const auto cfg = validate_config(c.points);
  const auto spec = PartitionSpec::make(c.mode, *c.kappa, cfg.size());
  const double h = c.fd_step.value_or(1e-4 * cfg.min_gap());
  for (std::size_t i = 0; i < cfg.size(); ++i)
    r.rows.push_back(make_report("i=" + std::to_string(i + 1), bpz_residual(spec, cfg, i, h), 0.0,
                                 0.0, 1e-5, 1));
  return r;
}

CheckReport check_kz(const ExperimentConfig& c) {
  CheckReport r;
  const auto cfg = validate_config(c.points);
  const auto spec = PartitionSpec::make(c.mode, *c.kappa, cfg.size());
  const double h = c.fd_step.value_or(1e-5 * std::min(1.0, cfg.min_gap()));
  for (std::size_t i = 0; i < cfg.size(); ++i)
    r.rows.push_back(make_report("i=" + std::to_string(i + 1), kz_residual(spec, cfg, i, h), 0.0,
                                 0.0, 1e-7, 1));
  return r;
}

CheckReport check_commutator(const ExperimentConfig& c) {
  CheckReport r;
  const auto cfg = validate_config(c.points);
  const auto spec = PartitionSpec::make(c.mode, *c.kappa, cfg.size());
  const std::size_t i = idx(c.i_index), j = idx(c.j_index);
  // Nested differences lose roughly eps / h^4, so keep the step coarse.
  const double h = c.fd_step.value_or(1e-2 * cfg.min_gap());
  const ScalarField prod = [i, j](std::span<const ext> x) { return x[i] * x[j]; };
  const ScalarField arct = [](std::span<const ext> x) {
    ext s = 0;
    for (ext v : x) s += std::atan(v);
    return s;
  };
  r.rows.push_back(make_report("phi=x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1),
                               commutator_residual(spec, prod, cfg, i, j, h), 0.0, 0.0, 1e-4, 1));
  r.rows.push_back(make_report("phi=sum arctan", commutator_residual(spec, arct, cfg, i, j, h), 0.0,
                               0.0, 1e-4, 1));
  return r;
}

CheckReport check_schemes(const ExperimentConfig& c) {
  CheckReport r;
  const auto cfg = validate_config(c.points);
  const auto params = make_params(c);
  const auto spec = PartitionSpec::make(c.mode, *c.kappa, cfg.size());
  const std::size_t i = idx(c.i_index), j = idx(c.j_index);
  const double cc = c.c.value_or(1.0);
  const SchemePlan plan = plan_schemes(cfg, i, j, *c.eps_tilde, cc);
  const auto res = commutation_experiment(params, spec, cfg, i, j, *c.eps_tilde, cc, *c.dt, c.seed,
                                          *c.n_paths);
  r.rows = res.reports;
  r.extra["eps"] = plan.eps;
  r.extra["eps_prime"] = plan.eps_prime;
  r.extra["discarded_scheme1"] = res.discarded_scheme1;
  r.extra["discarded_scheme2"] = res.discarded_scheme2;
  return r;
}

CheckReport check_martingale(const ExperimentConfig& c) {
  CheckReport r;
  r.rows = martingale_check(make_setup(c), c.seed, *c.n_paths, 4);
  return r;
}

CheckReport check_girsanov(const ExperimentConfig& c) {
  CheckReport r;
  const SleSetup s = make_setup(c);
  std::size_t j = 0;
  if (c.j_index) {
    j = idx(c.j_index);
  } else {
    while (j == s.index_i) ++j;
  }
  if (j >= s.cfg.size() || j == s.index_i)
    throw ConfigError("j_index", "observable needs a companion point");
  const auto res = girsanov_check(
      s, [j](std::span<const double> x) { return x[j]; }, c.seed, *c.n_paths,
      "terminal x" + std::to_string(j + 1));
  r.rows.push_back(res.report);
  r.extra["effective_sample_size"] = res.effective_sample_size;
  r.extra["bound_hits"] = res.bound_hits;
  return r;
}

CheckReport check_inverse(const ExperimentConfig& c) {
  CheckReport r;
  const cplx z0 = c.bulk_points.empty() ? cplx{0.0, 2.0} : c.bulk_points.front();
  r.rows = inverse_law_check(*c.kappa, z0, *c.t_final, *c.dt, c.seed, *c.n_paths);
  return r;
}

CouplingSpec coupling_spec(const ExperimentConfig& c) {
  const auto cs = CouplingSpec::make(make_params(c));
  require_coupling(cs);
  return cs;
}

CheckReport check_coupling_pde(const ExperimentConfig& c) {
  CheckReport r;
  const auto cs = coupling_spec(c);
  const auto cfg = validate_config(c.points);
  std::vector<std::size_t> indices;
  if (c.i_index) {
    indices.push_back(idx(c.i_index));
  } else {
    for (std::size_t i = 0; i < cfg.size(); ++i) indices.push_back(i);
  }
  for (const cplx z : c.bulk_points) {
    double scale = cfg.size() > 1 ? cfg.min_gap() : std::abs(z - cfg[0]);
    for (double xk : cfg.points()) scale = std::min(scale, std::abs(z - xk));
    const double h = c.fd_step.value_or(1e-4 * scale);
    for (std::size_t i : indices)
      r.rows.push_back(make_report(z_name(z) + " i=" + std::to_string(i + 1),
                                   coupling_pde_residual(cs, z, cfg, i, h), 0.0, 0.0, 1e-4, 1));
  }
  return r;
}

CheckReport check_coupling_mc(const ExperimentConfig& c) {
  CheckReport r;
  const auto cs = coupling_spec(c);
  HProcessOptions opts;
  opts.bound_n = c.bound_n;
  r.rows = coupling_martingale_check(cs, validate_config(c.points), idx(c.i_index), c.bulk_points,
                                     *c.t_final, *c.dt, c.seed, *c.n_paths, opts);
  return r;
}

CheckReport check_crossvar(const ExperimentConfig& c) {
  CheckReport r;
  const auto cs = coupling_spec(c);
  HProcessOptions opts;
  opts.bound_n = c.bound_n;
  const auto samples = simulate_h_processes(cs, validate_config(c.points), idx(c.i_index),
                                            c.bulk_points, *c.t_final, *c.dt, c.seed, *c.n_paths,
                                            opts);
  r.rows = cross_variation_check(samples);
  return r;
}

}  // namespace

CheckReport run_check(const ExperimentConfig& c) {
  CheckReport r;
  switch (c.check) {
    case CheckKind::zip: r = check_zip(c); break;
    case CheckKind::hcap: r = check_hcap(c); break;
    case CheckKind::bpz: r = check_bpz(c); break;
    case CheckKind::kz: r = check_kz(c); break;
    case CheckKind::commutator: r = check_commutator(c); break;
    case CheckKind::schemes: r = check_schemes(c); break;
    case CheckKind::martingale: r = check_martingale(c); break;
    case CheckKind::girsanov: r = check_girsanov(c); break;
    case CheckKind::inverse: r = check_inverse(c); break;
    case CheckKind::coupling_pde: r = check_coupling_pde(c); break;
    case CheckKind::coupling_mc: r = check_coupling_mc(c); break;
    case CheckKind::crossvar: r = check_crossvar(c); break;
  }
  r.check = to_string(c.check);
  return r;
}

bool all_pass(const CheckReport& report) {
  return std::all_of(report.rows.begin(), report.rows.end(), [](const McReport& m) { return m.pass; });
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

std::string report_csv(const CheckReport& report) {
  std::ostringstream os;
  os << "check,name,estimate,std_error,reference,tolerance,n_samples,pass\n";
  for (const auto& m : report.rows) {
    os << csv_field(report.check) << ',' << csv_field(m.name) << ',' << fmt(m.estimate) << ','
       << fmt(m.std_error) << ',' << fmt(m.reference) << ',' << fmt(m.tolerance) << ','
       << m.n_samples << ',' << (m.pass ? "true" : "false") << '\n';
  }
  return os.str();
}

json report_json(const CheckReport& report, const ExperimentConfig& cfg) {
  json doc;
  doc["header"]["version"] = MSLE_VERSION;
  doc["header"]["seed"] = cfg.seed;
  doc["header"]["config"] = cfg.raw;
  if (!report.extra.empty()) doc["header"]["diagnostics"] = report.extra;
  doc["rows"] = json::array();
  for (const auto& m : report.rows) {
    json row;
    row["check"] = report.check;
    row["name"] = m.name;
    row["estimate"] = number_or_null(m.estimate);
    row["std_error"] = number_or_null(m.std_error);
    row["reference"] = number_or_null(m.reference);
    row["tolerance"] = number_or_null(m.tolerance);
    row["n_samples"] = m.n_samples;
    row["pass"] = m.pass;
    doc["rows"].push_back(row);
  }
  return doc;
}

namespace {

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
}

void apply_workers(const ExperimentConfig& c) {
  // The environment variable wins over the config field.
  if (std::getenv("MSLE_WORKERS") != nullptr) return;
  if (c.workers) set_worker_count(*c.workers);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

struct CellResult {
  int code = exit_pass;
  std::size_t rows = 0;
  std::size_t passed = 0;
  double max_abs_diff = 0.0;
};

CellResult run_one(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                   const std::string& stem, std::ostream& err) {
  CellResult res;
  CheckReport report;
  try {
    apply_workers(cfg);
    report = run_check(cfg);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    res.code = exit_config;
    return res;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    res.code = exit_numerical;
    return res;
  } catch (const Swallowed& e) {
    err << "numerical failure: " << e.what() << '\n';
    res.code = exit_numerical;
    return res;
  }
  std::filesystem::create_directories(dir);
  write_file(dir / (stem + ".csv"), report_csv(report));
  write_file(dir / (stem + ".json"), report_json(report, cfg).dump(2) + "\n");
  res.rows = report.rows.size();
  for (const auto& m : report.rows) {
    if (m.pass) ++res.passed;
    res.max_abs_diff = std::max(res.max_abs_diff, std::abs(m.estimate - m.reference));
  }
  res.code = res.passed == res.rows ? exit_pass : exit_failed_row;
  return res;
}

}  // namespace

int run_config_file(const std::filesystem::path& config_path,
                    const std::optional<std::filesystem::path>& out_dir, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config(load_json(config_path));
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }
  const std::filesystem::path dir = out_dir ? *out_dir : std::filesystem::path(cfg.out_path);
  return run_one(cfg, dir, to_string(cfg.check), err).code;
}

int run_sweep_file(const std::filesystem::path& config_path,
                   const std::optional<std::filesystem::path>& out_dir, std::ostream& err) {
  json doc;
  try {
    doc = load_json(config_path);
    if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }

  // Axes: each swept field contributes its array of values; scalars stay put.
  std::vector<json> kappas{json()}, pointsets{json()}, eps{json()};
  bool swept = false;
  try {
    if (doc.contains("kappa") && doc["kappa"].is_array()) {
      if (doc["kappa"].empty()) throw ConfigError("kappa", "sweep array is empty");
      kappas.assign(doc["kappa"].begin(), doc["kappa"].end());
      swept = true;
    }
    if (doc.contains("points") && doc["points"].is_array() && !doc["points"].empty() &&
        doc["points"][0].is_array()) {
      pointsets.assign(doc["points"].begin(), doc["points"].end());
      swept = true;
    } else if (doc.contains("points") && doc["points"].is_array() && doc["points"].empty()) {
      throw ConfigError("points", "sweep array is empty");
    }
    if (doc.contains("eps_tilde") && doc["eps_tilde"].is_array()) {
      if (doc["eps_tilde"].empty()) throw ConfigError("eps_tilde", "sweep array is empty");
      eps.assign(doc["eps_tilde"].begin(), doc["eps_tilde"].end());
      swept = true;
    }
    if (!swept)
      throw ConfigError("<sweep>", "needs an array-valued kappa, points or eps_tilde");
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }

  struct Cell {
    ExperimentConfig cfg;
    json kappa, points, eps_tilde;
  };
  std::vector<Cell> cells;
  try {
    for (const auto& k : kappas)
      for (const auto& p : pointsets)
        for (const auto& e : eps) {
          json cell = doc;
          if (!k.is_null()) cell["kappa"] = k;
          if (!p.is_null()) cell["points"] = p;
          if (!e.is_null()) cell["eps_tilde"] = e;
          cells.push_back({parse_config(cell), cell.value("kappa", json()),
                           cell.value("points", json()), cell.value("eps_tilde", json())});
        }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }

  const std::filesystem::path dir =
      out_dir ? *out_dir : std::filesystem::path(cells.front().cfg.out_path);
  std::ostringstream summary;
  summary << "cell,check,kappa,points,eps_tilde,rows,passed,max_abs_diff,exit_code\n";
  int worst = exit_pass;
  for (std::size_t n = 0; n < cells.size(); ++n) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "cell_%03zu", n);
    const CellResult res = run_one(cells[n].cfg, dir, stem, err);
    auto show = [](const json& v) {
      if (v.is_null()) return std::string();
      if (v.is_number()) return fmt(v.get<double>());
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ";") + short_num(x.get<double>());
      return s;
    };
    summary << stem << ',' << to_string(cells[n].cfg.check) << ',' << show(cells[n].kappa) << ','
            << show(cells[n].points) << ',' << show(cells[n].eps_tilde) << ',' << res.rows << ','
            << res.passed << ',' << fmt(res.max_abs_diff) << ',' << res.code << '\n';
    // Severity order: config error > numerical failure > failed row > pass.
    auto rank = [](int code) {
      return code == exit_config ? 3 : code == exit_numerical ? 2 : code == exit_failed_row ? 1 : 0;
    };
    if (rank(res.code) > rank(worst)) worst = res.code;
  }
  std::filesystem::create_directories(dir);
  write_file(dir / "summary.csv", summary.str());
  return worst;
}

}  // namespace msle
