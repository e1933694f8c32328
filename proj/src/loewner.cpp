#include "msle/loewner.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace msle {

cplx sqrt_upper(cplx w) {
  const cplx r = std::sqrt(w);
  return r.imag() < 0.0 ? -r : r;
}

SubstepResult<double> substep_backward(double w, double u0, double delta, double deriv) {
  SubstepResult<double> out;
  const double a = w - u0;
  const double disc = a * a - 4.0 * delta;
  if (disc <= 0.0) {
    out.new_value = u0;
    out.new_deriv = std::numeric_limits<double>::infinity();
    out.multiplier = std::numeric_limits<double>::infinity();
    out.swallowed = true;
    out.swallow_time = 0.25 * a * a;
    return out;
  }
  const double s = std::copysign(std::sqrt(disc), a);
  out.new_value = u0 + s;
  out.increment = -4.0 * delta / (s + a);
  out.multiplier = a / s;
  out.new_deriv = deriv * out.multiplier;
  return out;
}

SubstepResult<cplx> substep_backward(cplx w, double u0, double delta, cplx deriv) {
  SubstepResult<cplx> out;
  const cplx a = w - u0;
  const cplx s = sqrt_upper(a * a - 4.0 * delta);
  out.new_value = u0 + s;
  out.increment = -4.0 * delta / (s + a);
  out.multiplier = a / s;
  out.new_deriv = deriv * out.multiplier;
  return out;
}

SubstepResult<double> substep_forward(double w, double u0, double delta, double deriv) {
  SubstepResult<double> out;
  const double a = w - u0;
  if (a == 0.0) {
    out.new_value = u0;
    out.swallowed = true;
    return out;
  }
  const double s = std::copysign(std::sqrt(a * a + 4.0 * delta), a);
  out.new_value = u0 + s;
  out.increment = 4.0 * delta / (s + a);
  out.multiplier = a / s;
  out.new_deriv = deriv * out.multiplier;
  return out;
}

SubstepResult<cplx> substep_forward(cplx w, double u0, double delta, cplx deriv,
                                    double swallow_guard) {
  SubstepResult<cplx> out;
  const cplx a = w - u0;
  if (std::abs(a) < swallow_guard) {
    out.new_value = w;
    out.new_deriv = deriv;
    out.multiplier = 1.0;
    out.increment = 0.0;
    out.swallowed = true;
    return out;
  }
  const cplx s = sqrt_upper(a * a + 4.0 * delta);
  out.new_value = u0 + s;
  out.increment = 4.0 * delta / (s + a);
  out.multiplier = a / s;
  out.new_deriv = deriv * out.multiplier;
  if (!(s.imag() > 0.0)) {
    out.swallowed = true;
    out.swallow_time = 0.25 * a.imag() * a.imag();
  }
  return out;
}

ChainState ChainState::make(Mode mode, std::span<const double> marked_points,
                            std::span<const cplx> bulk_points) {
  ChainState st;
  st.mode = mode;
  for (double x : marked_points) st.marked.push_back({x, 1.0, 0.0});
  for (cplx z : bulk_points) {
    if (!(z.imag() > 0.0)) throw InputError("bulk points must lie in the upper half-plane");
    st.bulk.push_back({z, z, {1.0, 0.0}, {0.0, 0.0}});
  }
  return st;
}

ChainState& ChainState::with_hcap_probes(double probe_radius) {
  if (!(probe_radius > 0.0)) throw InputError("probe radius must be positive");
  if (time != 0.0) throw InputError("hcap probes must be attached at t = 0");
  for (double r : {probe_radius, 2.0 * probe_radius}) {
    const cplx z{0.0, r};
    bulk.push_back({z, z, {1.0, 0.0}, {0.0, 0.0}});
  }
  return *this;
}

void advance(ChainState& state, double u0, double delta, std::size_t step_index,
             const EvolveOptions& options) {
  const bool backward = state.mode == Mode::backward;
  for (std::size_t k = 0; k < state.marked.size(); ++k) {
    auto& p = state.marked[k];
    const auto r = backward ? substep_backward(p.value, u0, delta, p.deriv)
                            : substep_forward(p.value, u0, delta, p.deriv);
    if (r.swallowed) throw Swallowed(step_index, state.time + r.swallow_time, k);
    p.value = r.new_value;
    p.deriv = r.new_deriv;
    p.log_deriv += std::log(r.multiplier);
  }
  for (std::size_t k = 0; k < state.bulk.size(); ++k) {
    auto& p = state.bulk[k];
    const auto r = backward ? substep_backward(p.value, u0, delta, p.deriv)
                            : substep_forward(p.value, u0, delta, p.deriv, options.swallow_guard);
    if (r.swallowed)
      throw Swallowed(step_index, state.time + r.swallow_time, state.marked.size() + k);
    p.value = r.new_value;
    p.deriv = r.new_deriv;
    p.log_deriv += std::log(r.multiplier);
    p.displacement += r.increment;
  }
  state.time += delta;
  state.hcap_accum += 2.0 * delta;
}

ChainState evolve(ChainState state, const DrivingPath& path, const EvolveOptions& options) {
  for (std::size_t k = 0; k < path.n_steps(); ++k)
    advance(state, path.values[k], path.dt, k, options);
  return state;
}

namespace {

void trace_rows(std::ostream& csv, std::size_t step, const ChainState& st, double w) {
  std::size_t idx = 0;
  for (const auto& p : st.marked) {
    csv << step << ',' << st.time << ',' << w << ',' << idx++ << ',' << p.value << ",0,"
        << p.deriv << ",0\n";
  }
  for (const auto& p : st.bulk) {
    csv << step << ',' << st.time << ',' << w << ',' << idx++ << ',' << p.value.real() << ','
        << p.value.imag() << ',' << p.deriv.real() << ',' << p.deriv.imag() << '\n';
  }
}

}  // namespace

ChainState evolve_traced(ChainState state, const DrivingPath& path, std::ostream& csv,
                         std::size_t stride, const EvolveOptions& options) {
  if (stride == 0) stride = 1;
  csv << "step,t,W,point,re,im,deriv_re,deriv_im\n";
  trace_rows(csv, 0, state, path.values.front());
  for (std::size_t k = 0; k < path.n_steps(); ++k) {
    advance(state, path.values[k], path.dt, k, options);
    if ((k + 1) % stride == 0 || k + 1 == path.n_steps())
      trace_rows(csv, k + 1, state, path.values[k + 1]);
  }
  return state;
}

HcapEstimate extract_hcap(const ChainState& state, double probe_radius) {
  const BulkPoint* near = nullptr;
  const BulkPoint* far = nullptr;
  for (const auto& p : state.bulk) {
    if (p.origin == cplx{0.0, probe_radius}) near = &p;
    if (p.origin == cplx{0.0, 2.0 * probe_radius}) far = &p;
  }
  if (near == nullptr || far == nullptr)
    throw InputError("state does not track hcap probes at the requested radius");
  auto coeff = [](const BulkPoint& p) { return (p.origin * p.displacement).real(); };
  const double c1 = coeff(*near);
  const double c2 = coeff(*far);
  const double scale = std::max(std::abs(c1), std::abs(c2));
  if (std::abs(c1 - c2) > 0.01 * scale && std::abs(c1 - c2) > 1e-12)
    throw ProbeTooClose("hcap probe coefficients differ by more than 1% between R and 2R");
  HcapEstimate est;
  est.coefficient = c1;
  est.hcap = state.mode == Mode::backward ? -c1 : c1;
  return est;
}

HcapEstimate extract_hcap(Mode mode, const DrivingPath& path, double probe_radius) {
  ChainState st = ChainState::make(mode, {});
  st.with_hcap_probes(probe_radius);
  return extract_hcap(evolve(std::move(st), path), probe_radius);
}

cplx reference_map_zero_driving(cplx z, double t, Mode mode) {
  if (t == 0.0) return z;
  if (mode == Mode::backward) return sqrt_upper(z * z - 4.0 * t);
  if (z.real() == 0.0 && z.imag() * z.imag() <= 4.0 * t)
    throw SwallowedReference("point on the imaginary axis is swallowed before t");
  return sqrt_upper(z * z + 4.0 * t);
}

}  // namespace msle
