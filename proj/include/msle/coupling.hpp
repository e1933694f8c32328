#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "msle/core.hpp"
#include "msle/fd.hpp"
#include "msle/loewner.hpp"
#include "msle/partition.hpp"
#include "msle/sampler.hpp"

namespace msle {

enum class GreenKind { neumann, dirichlet };

/// Neumann: -log|z - w| - log|z - conj w|. Dirichlet: -log|z - w| + log|z - conj w|.
/// Throws CoincidentPoints if |z - w| < 1e-14.
double green(GreenKind kind, cplx z, cplx w);

enum class UKind { backward_log, forward_arg };

struct CouplingSpec {
  Params params;
  PartitionSpec spec;
  double q_charge = 0.0;  // 2/gamma + gamma/2, backward
  double chi = 0.0;       // forward
  UKind u_kind = UKind::backward_log;
  GreenKind green_kind = GreenKind::neumann;
  std::vector<int> epsilon_signs;

  /// Backward needs gamma; forward takes chi from params or, when absent,
  /// the value paired with kappa. Parameter relations are not checked here.
  static CouplingSpec make(const Params& params);

  /// Q backward, chi forward: the constant in front of the log-derivative term.
  double charge() const { return u_kind == UKind::backward_log ? q_charge : chi; }
};

/// Throws InputError unless sqrt(kappa) = gamma or 4/gamma (backward), or
/// kappa != 4 and chi = +-(2/sqrt(kappa) - sqrt(kappa)/2) with the sign of the
/// kappa < 4 / kappa > 4 branch (forward). Signs epsilon_i are left alone so
/// that wrong-sign controls can run.
void require_coupling(const CouplingSpec& cs);

/// (2/sqrt k) sum log|z - x_i| backward; -+(2/sqrt k) sum arg(z - x_i) forward
/// with - for kappa < 4 and + for kappa > 4.
double boundary_u(const CouplingSpec& cs, cplx z, std::span<const double> x);

/// -(2/sqrt k) sum eps_i log(z - x_i), principal branch.
cplx holo_u_tilde(const CouplingSpec& cs, cplx z, std::span<const double> x);

/// |D_{z,i} (u~ Z) + 2 C/(z - x_i)^2 Z| / |Z| with C = Q or chi, by central
/// differences in long double. Throws StepTooLarge unless fd_step is below a
/// tenth of every gap and of every |z - x_k|.
double coupling_pde_residual(const CouplingSpec& cs, cplx z, const PointConfig& cfg,
                             std::size_t i, double fd_step);

struct HProcessOptions {
  std::optional<double> bound_n;  // default 10 M_0
  bool noise = true;
  bool keep_trace = false;
};

struct HProcessSample {
  DrivingPath path;
  std::vector<std::vector<double>> h_values;  // per point; full trace or {h_0, h_end}
  std::vector<double> h_start;
  std::vector<double> h_end;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // z < w index pairs
  std::vector<double> cross_var_accum;                     // sum dh(z) dh(w) per pair
  std::vector<double> green_start;
  std::vector<double> green_end;  // at the step where h froze
  std::optional<StopInfo> stopped_at;
  std::size_t frozen_step = 0;
};

/// Runs the i-th SLE under the drifted measure and records
/// h_t(z) = Re u~(f_t(z); X_t) + Q Re log f_t'(z) (backward) or
/// Im u~(g_t(z); X_t) - chi Im log g_t'(z) (forward) until T, tau_n or
/// swallowing, whichever is first.
HProcessSample simulate_h_process(const CouplingSpec& cs, const PointConfig& cfg, std::size_t i,
                                  std::span<const cplx> bulk, double t_final, double dt,
                                  RngSpec rng, const HProcessOptions& options = {});

std::vector<HProcessSample> simulate_h_processes(const CouplingSpec& cs, const PointConfig& cfg,
                                                 std::size_t i, std::span<const cplx> bulk,
                                                 double t_final, double dt, std::uint64_t seed,
                                                 std::size_t n_paths,
                                                 const HProcessOptions& options = {});

/// Mean of h_T(z) - h_0(z) against 0 within 3 SE, one report per point.
std::vector<McReport> coupling_martingale_check(const CouplingSpec& cs, const PointConfig& cfg,
                                                std::size_t i, std::span<const cplx> bulk,
                                                double t_final, double dt, std::uint64_t seed,
                                                std::size_t n_paths,
                                                const HProcessOptions& options = {});

/// Path-averaged sum dh(z) dh(w) against G_0 - G_end within 5% relative, one
/// report per pair.
std::vector<McReport> cross_variation_check(std::span<const HProcessSample> samples,
                                            double rel_tol = 0.05);

/// dG/dt for the chain at driving value u: -Re(2/(f_z - u)) Re(2/(f_w - u))
/// backward (Neumann), -Im(2/(g_z - u)) Im(2/(g_w - u)) forward (Dirichlet).
double green_rate(Mode mode, cplx fz, cplx fw, double u);

/// Largest relative gap, over substeps of `path`, between the increment of G
/// along the flow divided by dt and the midpoint rate.
double green_flow_identity_error(Mode mode, cplx z, cplx w, const DrivingPath& path);

}  // namespace msle
