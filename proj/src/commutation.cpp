#include "msle/commutation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msle {

SchemePlan plan_schemes(const PointConfig& cfg, std::size_t i, std::size_t j, double eps_tilde,
                        double c) {
  if (i >= cfg.size() || j >= cfg.size() || i == j)
    throw InputError("scheme indices must be distinct and in range");
  if (!(eps_tilde >= 0.0) || !std::isfinite(eps_tilde)) throw InputError("eps_tilde must be >= 0");
  if (!(c > 0.0) || !std::isfinite(c)) throw InputError("c must be positive");
  const double gap2 = (cfg[i] - cfg[j]) * (cfg[i] - cfg[j]);
  if (!(4.0 * std::max(1.0, c) * eps_tilde < gap2))
    throw EpsilonTooLarge("eps_tilde too large for the gap between x_i and x_j");
  SchemePlan p;
  p.i = i;
  p.j = j;
  p.eps_tilde = eps_tilde;
  p.c = c;
  p.eps = (1.0 - 4.0 * eps_tilde / gap2) * c * eps_tilde;
  p.eps_prime = (1.0 - 4.0 * c * eps_tilde / gap2) * eps_tilde;
  return p;
}

double phi_arctan(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::atan(v);
  return s;
}

SchemeOutcome run_scheme(SchemeOrder order, const SchemePlan& plan, const Params& params,
                         const PartitionSpec& spec, const PointConfig& cfg, double dt, RngSpec rng,
                         const SchemeOptions& options) {
  if (params.mode != Mode::backward)
    throw InputError("the two-scheme experiment is defined for backward chains");
  struct Leg {
    std::size_t index;
    double time;
  };
  Leg legs[2] = {{plan.i, plan.eps}, {plan.j, plan.eps_tilde}};
  if (order == SchemeOrder::scheme2) {
    legs[0] = {plan.j, plan.eps_prime};
    legs[1] = {plan.i, plan.c * plan.eps_tilde};
  }
  SchemeOutcome out;
  std::vector<double> x(cfg.values());
  for (int leg = 0; leg < 2; ++leg) {
    SleSetup s;
    s.params = params;
    s.spec = spec;
    s.cfg = validate_config(x);
    s.index_i = legs[leg].index;
    s.t_final = legs[leg].time;
    s.dt = dt;
    s.measure = MeasureMode::drifted_Q;
    s.bound_n = std::numeric_limits<double>::infinity();
    s.drift = options.drift;
    s.noise = options.noise;
    const RngSpec leg_rng{rng.seed, rng.path_index, rng.stream * 2 + static_cast<std::uint32_t>(leg)};
    const PathOutcome o = run_ith_sle(s, leg_rng);
    if (o.swallowed()) {
      out.swallowed = true;
      return out;
    }
    x = o.final_config;
    out.total_hcap += o.hcap;
  }
  out.final_config = x;
  for (std::size_t k = 0; k < x.size(); ++k) out.observables["x" + std::to_string(k + 1)] = x[k];
  out.observables["phi"] = phi_arctan(x);
  return out;
}

CommutationResult commutation_experiment(const Params& params, const PartitionSpec& spec,
                                         const PointConfig& cfg, std::size_t i, std::size_t j,
                                         double eps_tilde, double c, double dt, std::uint64_t seed,
                                         std::size_t n_paths, const SchemeOptions& options) {
  if (n_paths < 2) throw InputError("commutation experiment needs at least 2 paths");
  const SchemePlan plan = plan_schemes(cfg, i, j, eps_tilde, c);
  std::vector<SchemeOutcome> s1(n_paths), s2(n_paths);
  parallel_for(n_paths, [&](std::size_t p) {
    s1[p] = run_scheme(SchemeOrder::scheme1, plan, params, spec, cfg, dt, RngSpec{seed, p, 0},
                       options);
    s2[p] = run_scheme(SchemeOrder::scheme2, plan, params, spec, cfg, dt, RngSpec{seed, p, 1},
                       options);
  });

  CommutationResult res;
  std::vector<std::string> names;
  for (std::size_t k = 0; k < cfg.size(); ++k) names.push_back("x" + std::to_string(k + 1));
  names.push_back("phi");
  std::vector<SampleStats> a(names.size()), b(names.size());
  for (std::size_t p = 0; p < n_paths; ++p) {
    if (s1[p].swallowed) {
      ++res.discarded_scheme1;
    } else {
      for (std::size_t m = 0; m < names.size(); ++m) a[m].add(s1[p].observables.at(names[m]));
    }
    if (s2[p].swallowed) {
      ++res.discarded_scheme2;
    } else {
      for (std::size_t m = 0; m < names.size(); ++m) b[m].add(s2[p].observables.at(names[m]));
    }
  }
  const double floor = 10.0 * eps_tilde * eps_tilde;
  for (std::size_t m = 0; m < names.size(); ++m) {
    const double pooled = std::hypot(a[m].std_error(), b[m].std_error());
    res.reports.push_back(make_report(names[m], a[m].mean(), pooled, b[m].mean(),
                                      std::max(3.0 * pooled, floor),
                                      std::min(a[m].count(), b[m].count())));
  }
  return res;
}

std::vector<McReport> halving_check(const CommutationResult& full, const CommutationResult& half) {
  if (full.reports.size() != half.reports.size())
    throw InputError("halving check needs matching observables");
  std::vector<McReport> out;
  for (std::size_t m = 0; m < full.reports.size(); ++m) {
    const auto& f = full.reports[m];
    const auto& h = half.reports[m];
    const double d_full = std::abs(f.estimate - f.reference);
    const double d_half = std::abs(h.estimate - h.reference);
    const double se = std::hypot(f.std_error, h.std_error);
    out.push_back(make_report(h.name + " halving", d_half, h.std_error, 0.0, d_full + 3.0 * se,
                              h.n_samples));
  }
  return out;
}

DriftField product_drift(const PartitionSpec& spec) {
  const ext kappa_exp = ext(spec.kappa) * ext(spec.exponent);
  return [kappa_exp](std::span<const ext> x, std::size_t k) {
    ext acc = 0;
    for (std::size_t l = 0; l < x.size(); ++l)
      if (l != k) acc += 1 / (x[k] - x[l]);
    return kappa_exp * acc;
  };
}

DriftField zero_drift() {
  return [](std::span<const ext>, std::size_t) { return ext(0); };
}

ext apply_generator(Mode mode, double kappa, const DriftField& drift, const ScalarField& phi,
                    const std::vector<ext>& x, std::size_t k, ext fd_step) {
  const ext transport = mode == Mode::backward ? -2 : 2;
  ext out = ext(kappa) / 2 * fd::d2(phi, x, k, fd_step) + drift(x, k) * fd::d1(phi, x, k, fd_step);
  for (std::size_t l = 0; l < x.size(); ++l) {
    if (l == k) continue;
    out += transport / (x[l] - x[k]) * fd::d1(phi, x, l, fd_step);
  }
  return out;
}

namespace {

void require_small_step(const PointConfig& cfg, double fd_step) {
  if (!(fd_step > 0.0)) throw StepTooLarge("fd_step must be positive");
  if (cfg.size() > 1 && !(fd_step < cfg.min_gap() / 10.0))
    throw StepTooLarge("fd_step must be below a tenth of the minimum gap");
}

}  // namespace

double apply_generator(const PartitionSpec& spec, const ScalarField& phi, const PointConfig& cfg,
                       std::size_t k, double fd_step) {
  if (k >= cfg.size()) throw InputError("generator index out of range");
  require_small_step(cfg, fd_step);
  return static_cast<double>(
      apply_generator(spec.mode, spec.kappa, product_drift(spec), phi, fd::widen(cfg.points()), k, fd_step));
}

double commutator_residual(Mode mode, double kappa, const DriftField& drift,
                           const ScalarField& phi, const PointConfig& cfg, std::size_t i,
                           std::size_t j, double fd_step) {
  if (i >= cfg.size() || j >= cfg.size() || i == j)
    throw InputError("commutator indices must be distinct and in range");
  require_small_step(cfg, fd_step);
  const ext h = fd_step;
  auto gen = [&](std::size_t k) -> ScalarField {
    return [&, k](std::span<const ext> y) {
      return apply_generator(mode, kappa, drift, phi, std::vector<ext>(y.begin(), y.end()), k, h);
    };
  };
  const ScalarField li_phi = gen(i);
  const ScalarField lj_phi = gen(j);
  const auto x = fd::widen(cfg.points());
  const ext lij = apply_generator(mode, kappa, drift, lj_phi, x, i, h);
  const ext lji = apply_generator(mode, kappa, drift, li_phi, x, j, h);
  const ext gap = x[i] - x[j];
  const ext s = mode == Mode::backward ? 4 : -4;
  const ext rhs = s / (gap * gap) * (li_phi(x) - lj_phi(x));
  return static_cast<double>(std::abs(lij - lji - rhs));
}

double commutator_residual(const PartitionSpec& spec, const ScalarField& phi,
                           const PointConfig& cfg, std::size_t i, std::size_t j, double fd_step) {
  return commutator_residual(spec.mode, spec.kappa, product_drift(spec), phi, cfg, i, j, fd_step);
}

}  // namespace msle
