#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include "msle/core.hpp"

namespace msle {

using cplx = std::complex<double>;

/// Result of one exact slit-map substep with constant driving.
/// `swallow_time` is the substep-local analytic absorption time when
/// `swallowed` is set.
template <typename T>
struct SubstepResult {
  T new_value{};
  T new_deriv{};
  T multiplier{};  // (w - U0)/(new_value - U0)
  T increment{};   // new_value - w, formed without cancellation
  bool swallowed = false;
  double swallow_time = 0.0;
};

/// Backward substep: U0 + sqrt((w - U0)^2 - 4 delta), i.e. the exact solution of
/// df/dt = -2/(f - U0) over [0, delta]. Complex inputs take the root with
/// nonnegative imaginary part; real inputs keep the sign of (w - U0) and are
/// swallowed once (w - U0)^2 <= 4 delta. The incoming derivative is multiplied
/// by (w - U0)/(new_value - U0).
SubstepResult<double> substep_backward(double w, double u0, double delta, double deriv = 1.0);
SubstepResult<cplx> substep_backward(cplx w, double u0, double delta, cplx deriv = 1.0);

/// Forward substep: U0 + sqrt((w - U0)^2 + 4 delta) for dg/dt = 2/(g - U0).
/// A complex point is swallowed when it lands on the real axis or starts
/// within `swallow_guard` of U0; real points are never swallowed.
SubstepResult<double> substep_forward(double w, double u0, double delta, double deriv = 1.0);
SubstepResult<cplx> substep_forward(cplx w, double u0, double delta, cplx deriv = 1.0,
                                    double swallow_guard = 1e-6);

struct MarkedPoint {
  double value = 0.0;
  double deriv = 1.0;
  double log_deriv = 0.0;
};

struct BulkPoint {
  cplx origin{};
  cplx value{};
  cplx deriv{1.0, 0.0};
  cplx log_deriv{};  // continuous branch, accumulated substep by substep
  cplx displacement{};  // value - origin, summed from per-substep increments
};

struct ChainState {
  double time = 0.0;
  Mode mode = Mode::backward;
  std::vector<MarkedPoint> marked;
  std::vector<BulkPoint> bulk;
  double hcap_accum = 0.0;

  static ChainState make(Mode mode, std::span<const double> marked_points,
                         std::span<const cplx> bulk_points = {});
  /// Adds the probes i*R and 2i*R consumed by extract_hcap.
  ChainState& with_hcap_probes(double probe_radius);
};

struct EvolveOptions {
  double swallow_guard = 1e-6;
};

/// Applies one substep with driving u0 over `delta` to every tracked point.
/// Throws Swallowed carrying `step_index` and the estimated absorption time.
void advance(ChainState& state, double u0, double delta, std::size_t step_index,
             const EvolveOptions& options = {});

/// One substep per path step with U0 = W at the step start.
ChainState evolve(ChainState state, const DrivingPath& path, const EvolveOptions& options = {});

/// Optional trace: CSV rows (step,t,W,point,re,im,deriv) every `stride` steps.
ChainState evolve_traced(ChainState state, const DrivingPath& path, std::ostream& csv,
                         std::size_t stride = 1, const EvolveOptions& options = {});

struct HcapEstimate {
  double coefficient = 0.0;  // Re z (F(z) - z) at z = i R
  double hcap = 0.0;         // 2t for either mode
};

/// Reads the 1/z coefficient of the chain map from the probes at i*R and
/// 2i*R. Backward maps give -2t, forward maps +2t; `hcap` is reported
/// positive in both. Throws ProbeTooClose if the two radii disagree by > 1%.
HcapEstimate extract_hcap(const ChainState& state, double probe_radius = 1e4);

/// Convenience: evolves fresh probes along `path` and extracts the capacity.
HcapEstimate extract_hcap(Mode mode, const DrivingPath& path, double probe_radius = 1e4);

/// sqrt(z^2 - 4t) (backward) or sqrt(z^2 + 4t) (forward), root with Im >= 0.
cplx reference_map_zero_driving(cplx z, double t, Mode mode);

/// Square root with nonnegative imaginary part.
cplx sqrt_upper(cplx w);

}  // namespace msle
