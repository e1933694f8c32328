#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msle/errors.hpp"

namespace msle {

enum class Mode { backward, forward };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& name);

/// Fixed scalars of an experiment.
struct Params {
  Mode mode = Mode::backward;
  double kappa = 4.0;
  std::size_t n_points = 2;
  std::optional<double> gamma;  // backward coupling constant
  std::optional<double> chi;    // forward coupling constant
  std::vector<int> epsilon_signs;

  /// Validates kappa > 0, N >= 1, signs in {+1,-1} of length N and positive
  /// coupling constants. Empty `signs` default to the coupling-compatible
  /// choice for the mode.
  static Params make(Mode mode, double kappa, std::size_t n_points,
                     std::optional<double> gamma = std::nullopt,
                     std::optional<double> chi = std::nullopt,
                     std::vector<int> signs = {});
};

/// An element of Conf_N(R): pairwise distinct reals, kept in user order.
class PointConfig {
 public:
  PointConfig() = default;

  std::span<const double> points() const { return points_; }
  const std::vector<double>& values() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }

  /// Copy with slot `i` replaced; distinctness re-validated.
  PointConfig with_value(std::size_t i, double value) const;
  double min_gap() const;

  friend PointConfig validate_config(std::span<const double> points);

 private:
  explicit PointConfig(std::vector<double> pts) : points_(std::move(pts)) {}
  std::vector<double> points_;
};

/// Throws DuplicatePoint(i, j) for the first coincident pair.
PointConfig validate_config(std::span<const double> points);
inline PointConfig validate_config(std::initializer_list<double> points) {
  return validate_config(std::span<const double>(points.begin(), points.size()));
}

/// (lambda * x_k + shift)_k. Throws InputError unless lambda > 0.
PointConfig transform_config(const PointConfig& cfg, double shift, double lambda);

/// Key for an independent pseudo-random stream. `stream` separates several
/// streams used by the same path (e.g. the two legs of a scheme).
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  std::uint32_t stream = 0;
};

/// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter ctr, Key key);
};

/// Standard normal variates for one RngSpec. Variate k is a pure function of
/// (seed, path_index, stream, k): block k/2 of Philox feeds one Box-Muller
/// pair, so any variate can be regenerated without replaying the stream.
class GaussianStream {
 public:
  explicit GaussianStream(RngSpec spec) : spec_(spec) {}
  double next();
  double at(std::uint64_t k) const;
  std::uint64_t position() const { return position_; }

 private:
  RngSpec spec_;
  std::uint64_t position_ = 0;
};

/// n_steps independent N(0, dt) increments.
std::vector<double> sample_increments(RngSpec rng, double dt, std::size_t n_steps);

/// Time grid with Brownian increments and realized driving values.
struct DrivingPath {
  double dt = 0.0;
  std::vector<double> increments;  // Delta B_k ~ N(0, dt)
  std::vector<double> values;      // W_0 .. W_n

  std::size_t n_steps() const { return increments.size(); }
  double start() const { return values.front(); }
  double end() const { return values.back(); }

  /// W_{k+1} = W_k + sqrt(kappa) dB_k + drift_k dt (drifts may be empty).
  static DrivingPath from_increments(double start, double kappa, double dt,
                                     std::vector<double> increments,
                                     std::span<const double> drifts = {});
  /// Constant path with zero increments.
  static DrivingPath constant(double value, double dt, std::size_t n_steps);
};

/// Universal output record of a check: pass = |estimate - reference| <= tolerance.
struct McReport {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  std::size_t n_samples = 0;
  bool pass = false;
};

McReport make_report(std::string name, double estimate, double std_error,
                     double reference, double tolerance, std::size_t n_samples);

/// Mean/variance accumulator with compensated summation.
class SampleStats {
 public:
  void add(double x);
  std::size_t count() const { return n_; }
  double mean() const;
  double variance() const;  // unbiased
  double std_error() const;

 private:
  struct Neumaier {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x);
    double value() const { return sum + comp; }
  };
  std::size_t n_ = 0;
  double shift_ = 0.0;
  Neumaier s1_;
  Neumaier s2_;
};

/// Worker threads used by parallel_for. Defaults to MSLE_WORKERS or the
/// hardware concurrency.
std::size_t worker_count();
void set_worker_count(std::size_t n);

/// Runs body(k) for k in [0, n). Results must be written to per-index slots;
/// aggregation happens afterwards so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace msle
