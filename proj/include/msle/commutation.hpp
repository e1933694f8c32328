#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "msle/core.hpp"
#include "msle/fd.hpp"
#include "msle/partition.hpp"
#include "msle/sampler.hpp"

namespace msle {

/// Leg times for the two schemes, first order in eps_tilde.
struct SchemePlan {
  std::size_t i = 0;
  std::size_t j = 1;
  double eps_tilde = 0.0;
  double c = 1.0;
  double eps = 0.0;        // scheme 1: i-th chain runs eps, then j-th runs eps_tilde
  double eps_prime = 0.0;  // scheme 2: j-th chain runs eps_prime, then i-th runs c * eps_tilde
};

/// eps = (1 - 4 eps~/(x_i - x_j)^2) c eps~, eps' = (1 - 4 c eps~/(x_j - x_i)^2) eps~.
/// Throws EpsilonTooLarge unless 4 max(1, c) eps~ < (x_i - x_j)^2.
SchemePlan plan_schemes(const PointConfig& cfg, std::size_t i, std::size_t j, double eps_tilde,
                        double c);

enum class SchemeOrder { scheme1, scheme2 };

struct SchemeOutcome {
  std::vector<double> final_config;
  std::map<std::string, double> observables;  // x1..xN and phi
  double total_hcap = 0.0;
  bool swallowed = false;
};

struct SchemeOptions {
  DriftKind drift = DriftKind::partition;
  bool noise = true;
};

/// Runs both legs of one scheme for a backward chain. Each leg draws from its
/// own stream: rng.stream * 2 and rng.stream * 2 + 1.
SchemeOutcome run_scheme(SchemeOrder order, const SchemePlan& plan, const Params& params,
                         const PartitionSpec& spec, const PointConfig& cfg, double dt, RngSpec rng,
                         const SchemeOptions& options = {});

/// Default bounded test function sum_k arctan(x_k).
double phi_arctan(std::span<const double> x);

struct CommutationResult {
  std::vector<McReport> reports;  // estimate = scheme 1 mean, reference = scheme 2 mean
  std::size_t discarded_scheme1 = 0;
  std::size_t discarded_scheme2 = 0;
};

/// Compares scheme means of every observable within max(3 pooled SE, 10 eps~^2).
CommutationResult commutation_experiment(const Params& params, const PartitionSpec& spec,
                                         const PointConfig& cfg, std::size_t i, std::size_t j,
                                         double eps_tilde, double c, double dt, std::uint64_t seed,
                                         std::size_t n_paths, const SchemeOptions& options = {});

/// |d_half| against |d_full| + 3 combined SE for each observable, where d is
/// the scheme difference: shrinking eps~ must not grow the discrepancy.
std::vector<McReport> halving_check(const CommutationResult& full, const CommutationResult& half);

/// Drift b_k(x) feeding the generators.
using DriftField = std::function<ext(std::span<const ext>, std::size_t)>;

DriftField product_drift(const PartitionSpec& spec);
DriftField zero_drift();

/// (L_k phi)(x) = (k/2) d_k^2 phi + b_k d_k phi -+ sum_{l != k} 2/(x_l - x_k) d_l phi,
/// transport sign - for backward chains and + for forward ones.
ext apply_generator(Mode mode, double kappa, const DriftField& drift, const ScalarField& phi,
                    const std::vector<ext>& x, std::size_t k, ext fd_step);
double apply_generator(const PartitionSpec& spec, const ScalarField& phi, const PointConfig& cfg,
                       std::size_t k, double fd_step);

/// |[L_i, L_j] phi - s 4/(x_i - x_j)^2 (L_i - L_j) phi| by nested differences,
/// with s = +1 for backward and -1 for forward chains.
double commutator_residual(Mode mode, double kappa, const DriftField& drift,
                           const ScalarField& phi, const PointConfig& cfg, std::size_t i,
                           std::size_t j, double fd_step);
double commutator_residual(const PartitionSpec& spec, const ScalarField& phi,
                           const PointConfig& cfg, std::size_t i, std::size_t j, double fd_step);

}  // namespace msle
