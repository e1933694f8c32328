#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "msle/core.hpp"
#include "msle/loewner.hpp"
#include "msle/partition.hpp"

namespace msle {

/// base_P: driving is sqrt(kappa) B, weights carry M_t/M_0.
/// drifted_Q: driving gets the drift kappa d_i log Z until tau_n; weights are 1.
/// reweighted_P: base_P samples used as importance samples for Q.
enum class MeasureMode { base_P, drifted_Q, reweighted_P };

enum class StopReason { bound_n, swallowed };

struct StopInfo {
  std::size_t step = 0;
  StopReason reason = StopReason::bound_n;
};

/// Test-harness switches; the defaults give the SLE dynamics proper.
enum class DriftKind { partition, zero };

struct SleSetup {
  Params params;
  PartitionSpec spec;
  PointConfig cfg;
  std::size_t index_i = 0;
  double t_final = 0.1;
  double dt = 1e-3;
  MeasureMode measure = MeasureMode::base_P;
  /// Absolute bound n on M; defaults to 10 M_0. +inf disables stopping.
  std::optional<double> bound_n;
  DriftKind drift = DriftKind::partition;
  bool noise = true;
  /// Bisect steps by Brownian bridge while a companion is close to the
  /// driving point. Off gives one slit map per grid step.
  bool refine = true;
  std::vector<cplx> bulk;
};

/// State handed to a step observer: after step `step` (0 = initial state).
struct StepView {
  std::size_t step = 0;
  double time = 0.0;
  double driving = 0.0;
  const ChainState* chain = nullptr;  // companions in slot order, then bulk
  std::span<const double> config;     // running configuration, W in slot i
  double log_m = 0.0;                 // log M_t (frozen after tau_n)
  bool bound_stopped = false;
  double increment = 0.0;             // Brownian increment of the step just taken
  double drift = 0.0;                 // mean drift over that step
};

using StepObserver = std::function<void(const StepView&)>;

struct PathOutcome {
  std::vector<double> final_config;  // at T, or at the last step before swallowing
  double weight = 1.0;               // M_{T ^ tau_n}/M_0 under base_P, 1 under Q
  double martingale = 1.0;           // M_{T ^ tau_n}/M_0 regardless of measure
  double log_m0 = 0.0;
  double driving_end = 0.0;
  std::size_t steps = 0;             // substeps actually taken
  double hcap = 0.0;                 // accumulated capacity of the chain
  std::optional<std::size_t> tau_step;      // grid step where M first exceeded bound_n
  std::optional<std::size_t> swallow_step;  // substep during which a companion was absorbed

  bool swallowed() const { return swallow_step.has_value(); }
  /// The first stopping event, if any.
  std::optional<StopInfo> stopped_at() const;
};

/// Steps used for horizon T: ceil(T/dt) equal substeps of length T/n.
std::size_t steps_for(double t_final, double dt);

/// Runs one path of the i-th SLE(kappa, b). Companions follow the exact
/// slit-map substep; the driving point follows Euler-Maruyama with the drift
/// frozen at the substep start. Throws NumericalBlowup if a companion
/// derivative leaves (0, 1e300).
PathOutcome run_ith_sle(const SleSetup& setup, RngSpec rng, const StepObserver& observer = {});

/// Full record of one path.
struct SlePathSample {
  Params params;
  std::size_t index_i = 0;
  DrivingPath path;
  std::vector<ChainState> states;    // every `stride` steps, plus the last
  std::vector<double> weight_trace;  // per step, weight_trace[0] = 1
  std::optional<StopInfo> stopped_at;
  PathOutcome outcome;
};

SlePathSample simulate_ith_sle(const SleSetup& setup, RngSpec rng, std::size_t stride = 1);

/// s = sqrt(kappa) d_i log Z at the running configuration (W in slot i).
double drift_s(const PartitionSpec& spec, std::span<const double> config, std::size_t i);

/// Runs n_paths independent paths (path_index = 0..n-1 on `stream`).
std::vector<PathOutcome> run_paths(const SleSetup& setup, std::uint64_t seed, std::size_t n_paths,
                                   std::uint32_t stream = 0);

/// Mean of M_{t ^ tau_n}/M_0 against 1 (3 SE) at `n_checkpoints` evenly spaced
/// times ending at T.
std::vector<McReport> martingale_check(const SleSetup& setup, std::uint64_t seed,
                                       std::size_t n_paths, std::size_t n_checkpoints = 1);

using ConfigObservable = std::function<double(std::span<const double>)>;

struct GirsanovResult {
  McReport report;             // estimate = reweighted P, reference = drifted Q
  double effective_sample_size = 0.0;
  std::size_t bound_hits = 0;  // base_P paths stopped at tau_n
};

/// Compares the self-normalized M-weighted mean of `observable` under base_P
/// with the plain mean under drifted_Q. Throws EffectiveSampleCollapse if the
/// importance weights have ESS below 1% of n_paths.
GirsanovResult girsanov_check(const SleSetup& setup, const ConfigObservable& observable,
                              std::uint64_t seed, std::size_t n_paths, const std::string& name);

struct InverseLawSamples {
  std::vector<cplx> direct;   // f_T(z0) - W_T from a backward SLE
  std::vector<cplx> inverse;  // g_T^{-1}(z0 + W~_T) from an independent forward driving
};

InverseLawSamples sample_inverse_law(double kappa, cplx z0, double t_final, double dt,
                                     std::uint64_t seed, std::size_t n_paths);

/// Mean and variance of Re and Im of the two samples, compared within 3 pooled SE.
/// Throws SwallowedTooOften if more than 1% of inverse constructions fail.
std::vector<McReport> inverse_law_check(double kappa, cplx z0, double t_final, double dt,
                                        std::uint64_t seed, std::size_t n_paths);

/// Two-sample comparison helpers shared by the MC checks.
McReport compare_means(std::string name, const SampleStats& a, const SampleStats& b,
                       double sigma_multiple = 3.0);
McReport compare_variances(std::string name, std::span<const double> a, std::span<const double> b,
                           double sigma_multiple = 3.0);

}  // namespace msle
