#include "msle/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace msle {

double green(GreenKind kind, cplx z, cplx w) {
  if (std::abs(z - w) < 1e-14) throw CoincidentPoints("green: z and w coincide");
  const double image = std::log(std::abs(z - std::conj(w)));
  const double direct = -std::log(std::abs(z - w));
  return kind == GreenKind::neumann ? direct - image : direct + image;
}

CouplingSpec CouplingSpec::make(const Params& params) {
  CouplingSpec cs;
  cs.params = params;
  cs.spec = PartitionSpec::make(params.mode, params.kappa, params.n_points);
  cs.epsilon_signs = params.epsilon_signs;
  if (params.mode == Mode::backward) {
    if (!params.gamma) throw InputError("backward coupling needs gamma");
    const double g = *params.gamma;
    cs.q_charge = 2.0 / g + g / 2.0;
    cs.u_kind = UKind::backward_log;
    cs.green_kind = GreenKind::neumann;
  } else {
    const double sk = std::sqrt(params.kappa);
    cs.chi = params.chi ? *params.chi : std::abs(2.0 / sk - sk / 2.0);
    cs.u_kind = UKind::forward_arg;
    cs.green_kind = GreenKind::dirichlet;
  }
  return cs;
}

void require_coupling(const CouplingSpec& cs) {
  const double sk = std::sqrt(cs.params.kappa);
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
  if (cs.u_kind == UKind::backward_log) {
    if (!cs.params.gamma) throw InputError("backward coupling needs gamma");
    const double g = *cs.params.gamma;
    if (!close(sk, g) && !close(sk, 4.0 / g))
      throw InputError("coupling requires sqrt(kappa) = gamma or 4/gamma");
  } else {
    if (cs.params.kappa == 4.0) throw InputError("forward coupling requires kappa != 4");
    const double expected = cs.params.kappa < 4.0 ? 2.0 / sk - sk / 2.0 : sk / 2.0 - 2.0 / sk;
    if (!close(cs.chi, expected))
      throw InputError("coupling requires chi = |2/sqrt(kappa) - sqrt(kappa)/2|");
  }
}

namespace {

template <typename R, typename C>
C u_tilde_impl(R kappa, std::span<const int> eps, C z, std::span<const R> x) {
  C acc{};
  for (std::size_t k = 0; k < x.size(); ++k) acc += R(eps[k]) * std::log(z - x[k]);
  return -(R(2) / std::sqrt(kappa)) * acc;
}

void require_signs(const CouplingSpec& cs, std::size_t n) {
  if (cs.epsilon_signs.size() != n) throw InputError("epsilon_signs must match the configuration");
}

}  // namespace

double boundary_u(const CouplingSpec& cs, cplx z, std::span<const double> x) {
  const double scale = 2.0 / std::sqrt(cs.params.kappa);
  double acc = 0.0;
  if (cs.u_kind == UKind::backward_log) {
    for (double xi : x) acc += std::log(std::abs(z - xi));
    return scale * acc;
  }
  for (double xi : x) acc += std::arg(z - xi);
  const double sign = cs.params.kappa < 4.0 ? -1.0 : 1.0;
  return sign * scale * acc;
}

cplx holo_u_tilde(const CouplingSpec& cs, cplx z, std::span<const double> x) {
  require_signs(cs, x.size());
  return u_tilde_impl<double, cplx>(cs.params.kappa, cs.epsilon_signs, z, x);
}

double coupling_pde_residual(const CouplingSpec& cs, cplx z, const PointConfig& cfg,
                             std::size_t i, double fd_step) {
  require_signs(cs, cfg.size());
  if (i >= cfg.size()) throw InputError("coupling index out of range");
  if (!(z.imag() > 0.0)) throw InputError("z must lie in the upper half-plane");
  double scale = cfg.size() > 1 ? cfg.min_gap() : std::abs(z - cfg[0]);
  for (double xk : cfg.points()) scale = std::min(scale, std::abs(z - xk));
  if (!(fd_step > 0.0) || !(fd_step < scale / 10.0))
    throw StepTooLarge("fd_step must be below a tenth of every gap and of |z - x_k|");

  const ext kappa = cs.params.kappa;
  const ScalarField zf = z_field(cs.spec);
  const std::vector<int> eps = cs.epsilon_signs;
  const ext_cplx zz(z.real(), z.imag());
  auto field = [&](std::span<const ext> x, ext_cplx w) {
    return u_tilde_impl<ext, ext_cplx>(kappa, eps, w, x) * zf(x);
  };
  auto in_x = [&](std::span<const ext> x) { return field(x, zz); };

  const auto x = fd::widen(cfg.points());
  const ext h = fd_step;
  const ext s = cs.params.mode == Mode::backward ? -1 : 1;
  const ext hw = cs.spec.h_weight;
  const ext_cplx x0 = in_x(x);
  ext_cplx sum{};
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == i) continue;
    const ext gap = x[j] - x[i];
    sum += fd::d1(in_x, x, j, h) / gap - hw * x0 / (gap * gap);
  }
  auto in_z = [&](ext_cplx w) { return field(x, w); };
  const ext_cplx dz = fd::d1_scalar(in_z, zz, h);
  const ext_cplx zi = zz - x[i];
  const ext z_val = zf(x);
  const ext_cplx value = kappa / 2 * fd::d2(in_x, x, i, h) + ext(2) * s * sum +
                         ext(2) * s / zi * dz + ext(2) * ext(cs.charge()) / (zi * zi) * z_val;
  return static_cast<double>(std::abs(value) / z_val);
}

namespace {

double h_value(const CouplingSpec& cs, const BulkPoint& p, std::span<const double> x) {
  const cplx ut = u_tilde_impl<double, cplx>(cs.params.kappa, cs.epsilon_signs, p.value, x);
  if (cs.u_kind == UKind::backward_log) return ut.real() + cs.q_charge * p.log_deriv.real();
  return ut.imag() - cs.chi * p.log_deriv.imag();
}

}  // namespace

HProcessSample simulate_h_process(const CouplingSpec& cs, const PointConfig& cfg, std::size_t i,
                                  std::span<const cplx> bulk, double t_final, double dt,
                                  RngSpec rng, const HProcessOptions& options) {
  require_signs(cs, cfg.size());
  for (std::size_t a = 0; a < bulk.size(); ++a) {
    if (!(bulk[a].imag() > 0.0)) throw InputError("bulk points must lie in the upper half-plane");
    for (std::size_t b = a + 1; b < bulk.size(); ++b)
      if (bulk[a] == bulk[b]) throw CoincidentPoints("bulk points must be distinct");
  }
  SleSetup s;
  s.params = cs.params;
  s.spec = cs.spec;
  s.cfg = cfg;
  s.index_i = i;
  s.t_final = t_final;
  s.dt = dt;
  s.measure = MeasureMode::drifted_Q;
  s.bound_n = options.bound_n;
  s.noise = options.noise;
  s.bulk.assign(bulk.begin(), bulk.end());

  const std::size_t nb = bulk.size();
  HProcessSample out;
  for (std::size_t a = 0; a < nb; ++a)
    for (std::size_t b = a + 1; b < nb; ++b) out.pairs.emplace_back(a, b);
  out.cross_var_accum.assign(out.pairs.size(), 0.0);
  out.green_start.assign(out.pairs.size(), 0.0);
  out.green_end.assign(out.pairs.size(), 0.0);
  out.h_values.assign(nb, {});

  std::vector<double> prev(nb), cur(nb), incs, drifts;
  bool frozen = false;
  auto observer = [&](const StepView& v) {
    if (v.step > 0) {
      incs.push_back(v.increment);
      drifts.push_back(v.drift);
    }
    if (frozen) return;
    const auto& pts = v.chain->bulk;
    for (std::size_t a = 0; a < nb; ++a) cur[a] = h_value(cs, pts[a], v.config);
    if (v.step == 0) {
      out.h_start = cur;
    } else {
      for (std::size_t q = 0; q < out.pairs.size(); ++q) {
        const auto [a, b] = out.pairs[q];
        out.cross_var_accum[q] += (cur[a] - prev[a]) * (cur[b] - prev[b]);
      }
    }
    for (std::size_t q = 0; q < out.pairs.size(); ++q) {
      const auto [a, b] = out.pairs[q];
      const double g = green(cs.green_kind, pts[a].value, pts[b].value);
      if (v.step == 0) out.green_start[q] = g;
      out.green_end[q] = g;
    }
    if (options.keep_trace)
      for (std::size_t a = 0; a < nb; ++a) out.h_values[a].push_back(cur[a]);
    prev = cur;
    out.frozen_step = v.step;
    if (v.bound_stopped) frozen = true;
  };
  const PathOutcome o = run_ith_sle(s, rng, observer);
  out.h_end = prev;
  if (!options.keep_trace)
    for (std::size_t a = 0; a < nb; ++a) out.h_values[a] = {out.h_start[a], out.h_end[a]};
  const std::size_t n = steps_for(t_final, dt);
  const double delta = n == 0 ? dt : t_final / static_cast<double>(n);
  out.path = DrivingPath::from_increments(cfg[i], cs.params.kappa, delta, std::move(incs), drifts);
  out.stopped_at = o.stopped_at();
  return out;
}

std::vector<HProcessSample> simulate_h_processes(const CouplingSpec& cs, const PointConfig& cfg,
                                                 std::size_t i, std::span<const cplx> bulk,
                                                 double t_final, double dt, std::uint64_t seed,
                                                 std::size_t n_paths,
                                                 const HProcessOptions& options) {
  std::vector<HProcessSample> out(n_paths);
  parallel_for(n_paths, [&](std::size_t p) {
    out[p] = simulate_h_process(cs, cfg, i, bulk, t_final, dt, RngSpec{seed, p, 0}, options);
  });
  return out;
}

std::vector<McReport> coupling_martingale_check(const CouplingSpec& cs, const PointConfig& cfg,
                                                std::size_t i, std::span<const cplx> bulk,
                                                double t_final, double dt, std::uint64_t seed,
                                                std::size_t n_paths,
                                                const HProcessOptions& options) {
  if (n_paths < 2) throw InputError("coupling check needs at least 2 paths");
  const std::size_t nb = bulk.size();
  std::vector<std::vector<double>> diffs(n_paths);
  HProcessOptions opts = options;
  opts.keep_trace = false;
  parallel_for(n_paths, [&](std::size_t p) {
    const auto smp = simulate_h_process(cs, cfg, i, bulk, t_final, dt, RngSpec{seed, p, 0}, opts);
    diffs[p].resize(nb);
    for (std::size_t a = 0; a < nb; ++a) diffs[p][a] = smp.h_end[a] - smp.h_start[a];
  });
  std::vector<McReport> out;
  for (std::size_t a = 0; a < nb; ++a) {
    SampleStats st;
    for (const auto& d : diffs) st.add(d[a]);
    char name[96];
    std::snprintf(name, sizeof name, "h_T-h_0 at %.6g%+.6gi", bulk[a].real(), bulk[a].imag());
    out.push_back(make_report(name, st.mean(), st.std_error(), 0.0, 3.0 * st.std_error(),
                              st.count()));
  }
  return out;
}

std::vector<McReport> cross_variation_check(std::span<const HProcessSample> samples,
                                            double rel_tol) {
  if (samples.empty()) throw InputError("cross variation check needs samples");
  const auto& pairs = samples.front().pairs;
  std::vector<McReport> out;
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    SampleStats cross, dg;
    for (const auto& s : samples) {
      cross.add(s.cross_var_accum[q]);
      dg.add(s.green_start[q] - s.green_end[q]);
    }
    const std::string name =
        "pair(" + std::to_string(pairs[q].first) + "," + std::to_string(pairs[q].second) + ")";
    out.push_back(make_report(name, cross.mean(), cross.std_error(), dg.mean(),
                              rel_tol * std::abs(dg.mean()), cross.count()));
  }
  return out;
}

double green_rate(Mode mode, cplx fz, cplx fw, double u) {
  const cplx a = 2.0 / (fz - u);
  const cplx b = 2.0 / (fw - u);
  return mode == Mode::backward ? -a.real() * b.real() : -a.imag() * b.imag();
}

double green_flow_identity_error(Mode mode, cplx z, cplx w, const DrivingPath& path) {
  const GreenKind kind = mode == Mode::backward ? GreenKind::neumann : GreenKind::dirichlet;
  auto step = [mode](cplx v, double u, double d) {
    return mode == Mode::backward ? substep_backward(v, u, d).new_value
                                  : substep_forward(v, u, d).new_value;
  };
  double worst = 0.0;
  cplx fz = z, fw = w;
  for (std::size_t k = 0; k < path.n_steps(); ++k) {
    const double u = path.values[k];
    const double d = path.dt;
    const double g0 = green(kind, fz, fw);
    const double rate = green_rate(mode, step(fz, u, d / 2), step(fw, u, d / 2), u);
    fz = step(fz, u, d);
    fw = step(fw, u, d);
    const double num = (green(kind, fz, fw) - g0) / d;
    worst = std::max(worst, std::abs(num - rate) / std::max(std::abs(rate), 1e-8));
  }
  return worst;
}

}  // namespace msle
