#pragma once

#include <cstddef>
#include <span>

#include "msle/core.hpp"
#include "msle/fd.hpp"

namespace msle {

/// Conformal weight h_kappa: -(kappa+6)/(2 kappa) backward, (6-kappa)/(2 kappa) forward.
double h_kappa(Mode mode, double kappa);

/// Product-form (N, kappa)-partition function prod_{i<j} |x_i - x_j|^exponent.
struct PartitionSpec {
  Mode mode = Mode::backward;
  double kappa = 4.0;
  std::size_t n_points = 2;
  double h_weight = 0.0;
  double exponent = 0.0;  // -2/kappa backward, +2/kappa forward
  double homogeneity_degree = 0.0;

  static PartitionSpec make(Mode mode, double kappa, std::size_t n_points);
  /// Same weights with a different pair exponent (negative controls).
  static PartitionSpec with_exponent(Mode mode, double kappa, std::size_t n_points,
                                     double exponent);
};

double log_z_value(const PartitionSpec& spec, std::span<const double> x);
double z_value(const PartitionSpec& spec, const PointConfig& cfg);

/// exponent * sum_{j != i} 1/(x_i - x_j).
double grad_log_z(const PartitionSpec& spec, std::span<const double> x, std::size_t i);
inline double grad_log_z(const PartitionSpec& spec, const PointConfig& cfg, std::size_t i) {
  return grad_log_z(spec, cfg.points(), i);
}
/// Loewner drift b_i = kappa * d/dx_i log Z.
inline double drift_b(const PartitionSpec& spec, std::span<const double> x, std::size_t i) {
  return spec.kappa * grad_log_z(spec, x, i);
}

/// Extended-precision handle to the product form, usable with the generic
/// residual evaluators.
ScalarField z_field(const PartitionSpec& spec);

/// |D_i Z| / |Z| by 5-point central differences for an arbitrary Z handle.
/// Backward: D_i = (k/2) d_i^2 - 2 sum_j [d_j/(x_j - x_i) - h/(x_j - x_i)^2];
/// forward flips the sign of the sum. Throws StepTooLarge unless
/// fd_step < min gap / 10.
double bpz_residual(Mode mode, double kappa, const ScalarField& z, const PointConfig& cfg,
                    std::size_t i, double fd_step);
double bpz_residual(const PartitionSpec& spec, const PointConfig& cfg, std::size_t i,
                    double fd_step);

/// Finite-difference estimate of d/dx_i log Z.
double fd_grad_log_z(const PartitionSpec& spec, const PointConfig& cfg, std::size_t i,
                     double fd_step = 1e-5);

/// |fd_grad_log_z - exponent * sum_j 1/(x_i - x_j)|.
double kz_residual(const PartitionSpec& spec, const PointConfig& cfg, std::size_t i,
                   double fd_step = 1e-5);

}  // namespace msle
