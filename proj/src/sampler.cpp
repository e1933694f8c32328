#include "msle/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace msle {

namespace {

const double kLogDerivCap = std::log(1e300);

struct PathRecord {
  std::vector<double> increments;
  std::vector<double> drifts;
};

void check_setup(const SleSetup& s) {
  if (s.cfg.size() == 0) throw InputError("configuration is empty");
  if (s.cfg.size() != s.spec.n_points)
    throw InputError("configuration size does not match the partition function");
  if (s.index_i >= s.cfg.size()) throw InputError("driving index out of range");
  if (!(s.t_final >= 0.0) || !std::isfinite(s.t_final)) throw InputError("t_final must be >= 0");
  if (!(s.dt > 0.0)) throw InputError("dt must be positive");
  if (s.spec.mode != s.params.mode) throw InputError("partition mode does not match params");
  if (s.bound_n && !(*s.bound_n > 0.0)) throw InputError("bound_n must be positive");
}

double log_martingale(const PartitionSpec& spec, const ChainState& st, std::span<const double> x) {
  double acc = 0.0;
  for (const auto& p : st.marked) acc += p.log_deriv;
  return spec.h_weight * acc + log_z_value(spec, x);
}

// Steps are split by Brownian-bridge bisection while a companion is within
// sqrt(kRefineRatio max(kappa, 4) delta) of the driving point, down to
// delta / 2^kMaxRefine. Near a collision the weight moves on the time scale
// (X - W)^2, so a fixed grid misjudges it however small dt is.
constexpr int kMaxRefine = 20;
constexpr double kRefineRatio = 256.0;
constexpr std::uint32_t kRefineStreamBit = 0x80000000u;

PathOutcome run_impl(const SleSetup& setup, RngSpec rng, const StepObserver& observer,
                     PathRecord* record) {
  check_setup(setup);
  const std::size_t n_pts = setup.cfg.size();
  const std::size_t i = setup.index_i;
  const std::size_t n = steps_for(setup.t_final, setup.dt);
  const double delta = n == 0 ? 0.0 : setup.t_final / static_cast<double>(n);
  const double sqrt_kappa = std::sqrt(setup.params.kappa);
  const double sqrt_delta = std::sqrt(delta);
  const bool drifted = setup.measure == MeasureMode::drifted_Q;
  const bool backward = setup.params.mode == Mode::backward;
  const double close_scale = kRefineRatio * std::max(setup.params.kappa, 4.0);
  const int max_depth = setup.refine ? kMaxRefine : 0;

  std::vector<double> x(setup.cfg.values());
  std::vector<std::size_t> slot;  // companion k lives in configuration slot slot[k]
  std::vector<double> companions;
  for (std::size_t j = 0; j < n_pts; ++j) {
    if (j == i) continue;
    slot.push_back(j);
    companions.push_back(x[j]);
  }
  ChainState state = ChainState::make(setup.params.mode, companions, setup.bulk);
  ChainState trial = state;
  double w = x[i];

  PathOutcome out;
  out.log_m0 = log_martingale(setup.spec, state, x);
  const double log_bound = setup.bound_n ? std::log(*setup.bound_n) : out.log_m0 + std::log(10.0);
  double log_m = out.log_m0;
  if (log_m > log_bound) out.tau_step = 0;

  auto notify = [&](std::size_t step, double db, double b) {
    if (!observer) return;
    StepView v;
    v.step = step;
    v.time = state.time;
    v.driving = w;
    v.chain = &state;
    v.config = x;
    v.log_m = log_m;
    v.bound_stopped = out.tau_step.has_value();
    v.increment = db;
    v.drift = b;
    observer(v);
  };
  notify(0, 0.0, 0.0);

  GaussianStream gauss(rng);
  GaussianStream bridge(RngSpec{rng.seed, rng.path_index, rng.stream ^ kRefineStreamBit});
  if (record) {
    record->increments.reserve(n);
    record->drifts.reserve(n);
  }

  std::size_t k = 0;
  // Advances over [t, t + sub_delta] with Brownian increment db_sub. Returns
  // false once a companion is absorbed; the state then holds the last good leaf.
  auto interval = [&](auto&& self, double sub_delta, double db_sub, int depth) -> bool {
    const double near2 = close_scale * sub_delta;
    bool start_close = false;
    for (std::size_t c = 0; c < slot.size(); ++c) {
      const double before = x[slot[c]] - w;
      if (before * before < near2) start_close = true;
    }
    // At the finest level the path stops on its current state alone; a
    // decision that looked at the next increment would bias the frozen weight.
    if (start_close && depth >= max_depth && setup.refine) return false;
    double b = 0.0;
    if (drifted && !out.tau_step && setup.drift == DriftKind::partition)
      b = drift_b(setup.spec, x, i);
    trial = state;
    bool absorbed = false;
    try {
      advance(trial, w, sub_delta, k);
    } catch (const Swallowed&) {
      absorbed = true;
    }
    const double w_next = w + sqrt_kappa * db_sub + b * sub_delta;
    bool close = start_close;
    if (!absorbed) {
      for (std::size_t c = 0; c < slot.size(); ++c) {
        const double before = x[slot[c]] - w;
        const double after = trial.marked[c].value - w_next;
        // Ending on the other side of the driving point means the companion
        // was absorbed inside the interval even if the slit map missed it.
        if (after == 0.0 || std::signbit(before) != std::signbit(after)) absorbed = true;
        if (after * after < near2) close = true;
        // Certain to be swallowed by the next backward substep.
        if (backward && after * after <= 4.0 * sub_delta) absorbed = true;
      }
    }
    if ((absorbed || close) && depth < max_depth) {
      const double half = 0.5 * sub_delta;
      const double first =
          0.5 * db_sub + (setup.noise ? std::sqrt(0.5 * half) * bridge.next() : 0.0);
      return self(self, half, first, depth + 1) && self(self, half, db_sub - first, depth + 1);
    }
    if (absorbed) return false;

    std::swap(state, trial);
    w = w_next;
    x[i] = w;
    for (std::size_t c = 0; c < slot.size(); ++c) {
      const auto& p = state.marked[c];
      if (!(p.deriv > 0.0) || std::abs(p.log_deriv) > kLogDerivCap)
        throw NumericalBlowup("companion derivative left (0, 1e300)");
      x[slot[c]] = p.value;
    }
    if (!out.tau_step) {
      log_m = log_martingale(setup.spec, state, x);
      if (log_m > log_bound) out.tau_step = k + 1;
    }
    return true;
  };

  for (; k < n; ++k) {
    const double w_start = w;
    const double db = setup.noise ? sqrt_delta * gauss.next() : 0.0;
    if (!interval(interval, delta, db, 0)) {
      out.swallow_step = k;
      break;
    }
    // Effective drift over the step, so that recorded paths reproduce W.
    const double b = (w - w_start - sqrt_kappa * db) / delta;
    if (record) {
      record->increments.push_back(db);
      record->drifts.push_back(b);
    }
    out.steps = k + 1;
    notify(k + 1, db, b);
  }

  out.final_config = x;
  out.driving_end = w;
  out.hcap = state.hcap_accum;
  out.martingale = std::exp(log_m - out.log_m0);
  out.weight = drifted ? 1.0 : out.martingale;
  return out;
}

}  // namespace

std::optional<StopInfo> PathOutcome::stopped_at() const {
  if (tau_step && (!swallow_step || *tau_step <= *swallow_step))
    return StopInfo{*tau_step, StopReason::bound_n};
  if (swallow_step) return StopInfo{*swallow_step, StopReason::swallowed};
  return std::nullopt;
}

std::size_t steps_for(double t_final, double dt) {
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  if (t_final <= 0.0) return 0;
  // Tolerate T/dt landing a hair above an integer.
  const double r = t_final / dt;
  const double k = std::ceil(r - 1e-9 * std::max(1.0, r));
  return static_cast<std::size_t>(std::max(1.0, k));
}

double drift_s(const PartitionSpec& spec, std::span<const double> config, std::size_t i) {
  return std::sqrt(spec.kappa) * grad_log_z(spec, config, i);
}

PathOutcome run_ith_sle(const SleSetup& setup, RngSpec rng, const StepObserver& observer) {
  return run_impl(setup, rng, observer, nullptr);
}

SlePathSample simulate_ith_sle(const SleSetup& setup, RngSpec rng, std::size_t stride) {
  if (stride == 0) stride = 1;
  SlePathSample sample;
  sample.params = setup.params;
  sample.index_i = setup.index_i;
  PathRecord rec;
  double log_m0 = 0.0;
  ChainState last;
  std::size_t last_step = 0;
  auto observer = [&](const StepView& v) {
    if (v.step == 0) log_m0 = v.log_m;
    sample.weight_trace.push_back(std::exp(v.log_m - log_m0));
    if (v.step % stride == 0) sample.states.push_back(*v.chain);
    last = *v.chain;
    last_step = v.step;
  };
  sample.outcome = run_impl(setup, rng, observer, &rec);
  if (last_step % stride != 0) sample.states.push_back(std::move(last));
  if (setup.measure == MeasureMode::drifted_Q)
    std::fill(sample.weight_trace.begin(), sample.weight_trace.end(), 1.0);
  const std::size_t n = steps_for(setup.t_final, setup.dt);
  const double delta = n == 0 ? setup.dt : setup.t_final / static_cast<double>(n);
  sample.path = DrivingPath::from_increments(setup.cfg[setup.index_i], setup.params.kappa, delta,
                                             std::move(rec.increments), rec.drifts);
  sample.stopped_at = sample.outcome.stopped_at();
  return sample;
}

std::vector<PathOutcome> run_paths(const SleSetup& setup, std::uint64_t seed, std::size_t n_paths,
                                   std::uint32_t stream) {
  std::vector<PathOutcome> out(n_paths);
  parallel_for(n_paths, [&](std::size_t p) {
    out[p] = run_ith_sle(setup, RngSpec{seed, p, stream});
  });
  return out;
}

std::vector<McReport> martingale_check(const SleSetup& setup, std::uint64_t seed,
                                       std::size_t n_paths, std::size_t n_checkpoints) {
  if (n_paths < 2) throw InputError("martingale check needs at least 2 paths");
  if (n_checkpoints == 0) n_checkpoints = 1;
  SleSetup s = setup;
  s.measure = MeasureMode::base_P;
  const std::size_t n = steps_for(s.t_final, s.dt);
  std::vector<std::size_t> marks(n_checkpoints);
  for (std::size_t m = 0; m < n_checkpoints; ++m)
    marks[m] = (n * (m + 1) + n_checkpoints / 2) / n_checkpoints;
  marks.back() = n;

  std::vector<std::vector<double>> ratios(n_paths);
  parallel_for(n_paths, [&](std::size_t p) {
    auto& r = ratios[p];
    r.assign(n_checkpoints, std::numeric_limits<double>::quiet_NaN());
    double log_m0 = 0.0;
    auto obs = [&](const StepView& v) {
      if (v.step == 0) log_m0 = v.log_m;
      for (std::size_t m = 0; m < n_checkpoints; ++m)
        if (marks[m] == v.step) r[m] = std::exp(v.log_m - log_m0);
    };
    const PathOutcome o = run_ith_sle(s, RngSpec{seed, p, 0}, obs);
    // M is frozen after swallowing.
    for (auto& v : r)
      if (std::isnan(v)) v = o.martingale;
  });

  const double t_step = n == 0 ? 0.0 : s.t_final / static_cast<double>(n);
  std::vector<McReport> reports;
  for (std::size_t m = 0; m < n_checkpoints; ++m) {
    SampleStats st;
    for (const auto& r : ratios) st.add(r[m]);
    char name[64];
    std::snprintf(name, sizeof name, "M(t=%.6g)/M0", t_step * static_cast<double>(marks[m]));
    reports.push_back(make_report(name, st.mean(), st.std_error(), 1.0, 3.0 * st.std_error(),
                                  st.count()));
  }
  return reports;
}

GirsanovResult girsanov_check(const SleSetup& setup, const ConfigObservable& observable,
                              std::uint64_t seed, std::size_t n_paths, const std::string& name) {
  if (n_paths < 2) throw InputError("girsanov check needs at least 2 paths");
  SleSetup p_setup = setup;
  p_setup.measure = MeasureMode::base_P;
  SleSetup q_setup = setup;
  q_setup.measure = MeasureMode::drifted_Q;
  const auto p_paths = run_paths(p_setup, seed, n_paths, 0);
  const auto q_paths = run_paths(q_setup, seed, n_paths, 1);

  GirsanovResult res;
  std::vector<double> phi(n_paths);
  double sum_w = 0.0, sum_w2 = 0.0, sum_wphi = 0.0;
  {
    long double a = 0, b = 0, c = 0;
    for (std::size_t k = 0; k < n_paths; ++k) {
      const auto& o = p_paths[k];
      phi[k] = observable(o.final_config);
      a += o.weight;
      b += static_cast<long double>(o.weight) * o.weight;
      c += static_cast<long double>(o.weight) * phi[k];
      if (o.tau_step) ++res.bound_hits;
    }
    sum_w = static_cast<double>(a);
    sum_w2 = static_cast<double>(b);
    sum_wphi = static_cast<double>(c);
  }
  if (!(sum_w > 0.0)) throw EffectiveSampleCollapse("all importance weights vanish");
  res.effective_sample_size = sum_w * sum_w / sum_w2;
  if (res.effective_sample_size < 0.01 * static_cast<double>(n_paths))
    throw EffectiveSampleCollapse("importance-weight effective sample size below 1% of paths");

  const double est_p = sum_wphi / sum_w;
  long double dev = 0;
  for (std::size_t k = 0; k < n_paths; ++k) {
    const long double d = static_cast<long double>(p_paths[k].weight) * (phi[k] - est_p);
    dev += d * d;
  }
  const double se_p = std::sqrt(static_cast<double>(dev)) / sum_w;

  SampleStats q;
  for (const auto& o : q_paths) q.add(observable(o.final_config));
  const double pooled = std::hypot(se_p, q.std_error());
  res.report = make_report(name, est_p, pooled, q.mean(), 3.0 * pooled, n_paths);
  return res;
}

InverseLawSamples sample_inverse_law(double kappa, cplx z0, double t_final, double dt,
                                     std::uint64_t seed, std::size_t n_paths) {
  if (!(kappa > 0.0)) throw InputError("kappa must be positive");
  if (!(z0.imag() > 0.0)) throw InputError("z0 must lie in the upper half-plane");
  const std::size_t n = steps_for(t_final, dt);
  const double delta = n == 0 ? 0.0 : t_final / static_cast<double>(n);
  const double scale = std::sqrt(kappa * delta);

  InverseLawSamples out;
  out.direct.resize(n_paths);
  out.inverse.resize(n_paths);
  parallel_for(n_paths, [&](std::size_t p) {
    // Direct: backward chain from z0 driven by sqrt(kappa) B, recentred at W_T.
    GaussianStream ga(RngSpec{seed, p, 0});
    cplx f = z0;
    double w = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      f = substep_backward(f, w, delta).new_value;
      w += scale * ga.next();
    }
    out.direct[p] = f - w;

    // Inverse: forward driving path on an independent stream, then undo its
    // slit maps last to first.
    GaussianStream gb(RngSpec{seed, p, 1});
    std::vector<double> wt(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) wt[k + 1] = wt[k] + scale * gb.next();
    cplx v = z0 + wt[n];
    for (std::size_t m = 0; m < n; ++m) v = substep_backward(v, wt[n - 1 - m], delta).new_value;
    out.inverse[p] = v - wt[0];
  });
  return out;
}

McReport compare_means(std::string name, const SampleStats& a, const SampleStats& b,
                       double sigma_multiple) {
  const double pooled = std::hypot(a.std_error(), b.std_error());
  return make_report(std::move(name), a.mean(), pooled, b.mean(), sigma_multiple * pooled,
                     std::min(a.count(), b.count()));
}

namespace {

struct VarianceEstimate {
  double var = 0.0;
  double se = 0.0;
};

VarianceEstimate variance_with_se(std::span<const double> xs) {
  SampleStats st;
  for (double x : xs) st.add(x);
  const double m = st.mean();
  const double n = static_cast<double>(xs.size());
  long double m4 = 0;
  for (double x : xs) {
    const long double d = x - m;
    m4 += d * d * d * d;
  }
  const double s2 = st.variance();
  const double fourth = static_cast<double>(m4) / n;
  return {s2, std::sqrt(std::max(0.0, fourth - s2 * s2) / n)};
}

}  // namespace

McReport compare_variances(std::string name, std::span<const double> a, std::span<const double> b,
                           double sigma_multiple) {
  const auto va = variance_with_se(a);
  const auto vb = variance_with_se(b);
  const double pooled = std::hypot(va.se, vb.se);
  return make_report(std::move(name), va.var, pooled, vb.var, sigma_multiple * pooled,
                     std::min(a.size(), b.size()));
}

std::vector<McReport> inverse_law_check(double kappa, cplx z0, double t_final, double dt,
                                        std::uint64_t seed, std::size_t n_paths) {
  if (n_paths < 2) throw InputError("inverse law check needs at least 2 paths");
  const auto s = sample_inverse_law(kappa, z0, t_final, dt, seed, n_paths);
  std::vector<double> ra, ia, rb, ib;
  std::size_t failed = 0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    const cplx a = s.direct[p];
    const cplx b = s.inverse[p];
    if (!std::isfinite(b.real()) || !std::isfinite(b.imag()) || !(b.imag() > 0.0)) {
      ++failed;
      continue;
    }
    ra.push_back(a.real());
    ia.push_back(a.imag());
    rb.push_back(b.real());
    ib.push_back(b.imag());
  }
  if (static_cast<double>(failed) > 0.01 * static_cast<double>(n_paths))
    throw SwallowedTooOften("more than 1% of inverse constructions failed");
  auto stats = [](const std::vector<double>& v) {
    SampleStats st;
    for (double x : v) st.add(x);
    return st;
  };
  return {compare_means("mean Re", stats(ra), stats(rb)),
          compare_means("mean Im", stats(ia), stats(ib)), compare_variances("var Re", ra, rb),
          compare_variances("var Im", ia, ib)};
}

}  // namespace msle
