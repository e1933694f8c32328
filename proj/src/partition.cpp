#include "msle/partition.hpp"

#include <cmath>

namespace msle {

double h_kappa(Mode mode, double kappa) {
  if (!(kappa > 0.0)) throw InputError("kappa must be positive");
  return mode == Mode::backward ? -(kappa + 6.0) / (2.0 * kappa) : (6.0 - kappa) / (2.0 * kappa);
}

PartitionSpec PartitionSpec::make(Mode mode, double kappa, std::size_t n_points) {
  const double exponent = (mode == Mode::backward ? -2.0 : 2.0) / kappa;
  return with_exponent(mode, kappa, n_points, exponent);
}

PartitionSpec PartitionSpec::with_exponent(Mode mode, double kappa, std::size_t n_points,
                                           double exponent) {
  PartitionSpec s;
  s.mode = mode;
  s.kappa = kappa;
  s.n_points = n_points;
  s.h_weight = h_kappa(mode, kappa);
  s.exponent = exponent;
  const double pairs = 0.5 * static_cast<double>(n_points) * static_cast<double>(n_points - 1);
  s.homogeneity_degree = exponent * pairs;
  return s;
}

double log_z_value(const PartitionSpec& spec, std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = a + 1; b < x.size(); ++b) acc += std::log(std::abs(x[a] - x[b]));
  return spec.exponent * acc;
}

double z_value(const PartitionSpec& spec, const PointConfig& cfg) {
  return std::exp(log_z_value(spec, cfg.points()));
}

double grad_log_z(const PartitionSpec& spec, std::span<const double> x, std::size_t i) {
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (j != i) acc += 1.0 / (x[i] - x[j]);
  return spec.exponent * acc;
}

ScalarField z_field(const PartitionSpec& spec) {
  const ext exponent = spec.exponent;
  return [exponent](std::span<const ext> x) {
    ext acc = 0;
    for (std::size_t a = 0; a < x.size(); ++a)
      for (std::size_t b = a + 1; b < x.size(); ++b) acc += std::log(std::abs(x[a] - x[b]));
    return std::exp(exponent * acc);
  };
}

namespace {

void require_small_step(const PointConfig& cfg, double fd_step) {
  if (!(fd_step > 0.0)) throw StepTooLarge("fd_step must be positive");
  if (cfg.size() > 1 && !(fd_step < cfg.min_gap() / 10.0))
    throw StepTooLarge("fd_step must be below a tenth of the minimum gap");
}

void require_index(const PointConfig& cfg, std::size_t i) {
  if (i >= cfg.size()) throw InputError("point index out of range");
}

}  // namespace

double bpz_residual(Mode mode, double kappa, const ScalarField& z, const PointConfig& cfg,
                    std::size_t i, double fd_step) {
  require_index(cfg, i);
  require_small_step(cfg, fd_step);
  const auto x = fd::widen(cfg.points());
  const ext h = fd_step;
  const ext hk = h_kappa(mode, kappa);
  const ext z0 = z(x);
  ext sum = 0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == i) continue;
    const ext gap = x[j] - x[i];
    sum += fd::d1(z, x, j, h) / gap - hk * z0 / (gap * gap);
  }
  const ext sign = mode == Mode::backward ? -2 : 2;
  const ext value = ext(kappa) / 2 * fd::d2(z, x, i, h) + sign * sum;
  return static_cast<double>(std::abs(value / z0));
}

double bpz_residual(const PartitionSpec& spec, const PointConfig& cfg, std::size_t i,
                    double fd_step) {
  return bpz_residual(spec.mode, spec.kappa, z_field(spec), cfg, i, fd_step);
}

double fd_grad_log_z(const PartitionSpec& spec, const PointConfig& cfg, std::size_t i,
                     double fd_step) {
  require_index(cfg, i);
  require_small_step(cfg, fd_step);
  const ScalarField zf = z_field(spec);
  auto log_z = [&zf](std::span<const ext> x) { return std::log(zf(x)); };
  return static_cast<double>(fd::d1(log_z, fd::widen(cfg.points()), i, fd_step));
}

double kz_residual(const PartitionSpec& spec, const PointConfig& cfg, std::size_t i,
                   double fd_step) {
  require_index(cfg, i);
  ext closed = 0;
  for (std::size_t j = 0; j < cfg.size(); ++j)
    if (j != i) closed += ext(1) / (ext(cfg[i]) - ext(cfg[j]));
  closed *= spec.exponent;
  return static_cast<double>(std::abs(ext(fd_grad_log_z(spec, cfg, i, fd_step)) - closed));
}

}  // namespace msle
