#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "msle/partition.hpp"

using namespace msle;

namespace {

PointConfig random_config(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (;;) {
    std::vector<double> x(n);
    for (auto& v : x) v = u(gen);
    auto sorted = x;
    std::sort(sorted.begin(), sorted.end());
    bool ok = true;
    for (std::size_t k = 1; k < n; ++k) ok = ok && sorted[k] - sorted[k - 1] > 0.2;
    if (ok) return validate_config(x);
  }
}

}  // namespace

TEST_CASE("h_kappa") {
  CHECK(h_kappa(Mode::backward, 6.0) == doctest::Approx(-1.0));
  CHECK(h_kappa(Mode::backward, 2.0) == doctest::Approx(-2.0));
  CHECK(h_kappa(Mode::forward, 8.0 / 3.0) == doctest::Approx(0.625));
  CHECK_THROWS_AS(h_kappa(Mode::forward, 0.0), InputError);
}

TEST_CASE("PartitionSpec fields") {
  const auto b = PartitionSpec::make(Mode::backward, 4.0, 3);
  CHECK(b.exponent == doctest::Approx(-0.5));
  CHECK(b.h_weight == doctest::Approx(-1.25));
  CHECK(b.homogeneity_degree == doctest::Approx(-1.5));
  const auto f = PartitionSpec::make(Mode::forward, 2.0, 4);
  CHECK(f.exponent == doctest::Approx(1.0));
  CHECK(f.homogeneity_degree == doctest::Approx(6.0));
}

TEST_CASE("z_value examples") {
  CHECK(z_value(PartitionSpec::make(Mode::backward, 2.0, 3), validate_config({0.0, 1.0, 3.0})) ==
        doctest::Approx(1.0 / 6.0));
  CHECK(z_value(PartitionSpec::make(Mode::backward, 4.0, 2), validate_config({0.0, 1.0})) ==
        doctest::Approx(1.0));
  CHECK(z_value(PartitionSpec::make(Mode::forward, 2.0, 2), validate_config({0.0, 2.0})) ==
        doctest::Approx(2.0));
}

TEST_CASE("grad_log_z examples") {
  const auto s = PartitionSpec::make(Mode::backward, 4.0, 2);
  const auto cfg = validate_config({0.0, 1.0});
  CHECK(grad_log_z(s, cfg, 0) == doctest::Approx(0.5));
  CHECK(drift_b(s, cfg.points(), 0) == doctest::Approx(2.0));

  for (double kappa : {1.0, 8.0 / 3.0, 7.0}) {
    const auto s3 = PartitionSpec::make(Mode::backward, kappa, 3);
    CHECK(drift_b(s3, validate_config({0.0, 1.0, 3.0}).points(), 1) == doctest::Approx(-1.0));
  }

  const auto sym = validate_config({-0.7, 0.7});
  for (Mode m : {Mode::backward, Mode::forward}) {
    const auto sp = PartitionSpec::make(m, 3.0, 2);
    CHECK(grad_log_z(sp, sym, 0) == doctest::Approx(-grad_log_z(sp, sym, 1)));
  }
}

TEST_CASE("translation invariance") {
  // Dyadic points and shifts keep every gap exact.
  const auto s = PartitionSpec::make(Mode::backward, 8.0 / 3.0, 4);
  const auto cfg = validate_config({0.0, 0.5, 1.25, 3.0});
  CHECK(z_value(s, transform_config(cfg, 2.0, 1.0)) == z_value(s, cfg));
  CHECK(z_value(s, transform_config(cfg, -0.75, 1.0)) == z_value(s, cfg));

  const auto s3 = PartitionSpec::make(Mode::backward, 4.0, 3);
  std::mt19937_64 gen(1);
  for (int k = 0; k < 20; ++k) {
    const auto c = random_config(gen, 3);
    CHECK(z_value(s3, transform_config(c, 0.37, 1.0)) ==
          doctest::Approx(z_value(s3, c)).epsilon(1e-13));
  }
}

TEST_CASE("homogeneity") {
  std::mt19937_64 gen(2);
  for (Mode m : {Mode::backward, Mode::forward}) {
    for (std::size_t n : {2u, 3u, 4u}) {
      const auto s = PartitionSpec::make(m, 6.0, n);
      for (double lambda : {0.1, 2.0, 13.0}) {
        const auto c = random_config(gen, n);
        const double lhs = z_value(s, transform_config(c, 0.0, lambda));
        const double rhs = std::pow(lambda, s.homogeneity_degree) * z_value(s, c);
        CHECK(std::abs(lhs / rhs - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("permutation symmetry") {
  const auto s = PartitionSpec::make(Mode::backward, 2.0, 4);
  std::vector<double> x = {0.0, 1.0, 3.0, -2.5};
  const double ref = z_value(s, validate_config(x));
  std::sort(x.begin(), x.end());
  do {
    CHECK(z_value(s, validate_config(x)) == doctest::Approx(ref).epsilon(1e-14));
  } while (std::next_permutation(x.begin(), x.end()));
}

TEST_CASE("bpz residual examples") {
  CHECK(bpz_residual(PartitionSpec::make(Mode::backward, 4.0, 3), validate_config({0.0, 1.0, 3.0}),
                     0, 1e-4) < 1e-5);
  CHECK(bpz_residual(PartitionSpec::make(Mode::forward, 2.0, 2), validate_config({0.0, 1.0}), 1,
                     1e-4) < 1e-5);
  const auto wrong = PartitionSpec::with_exponent(Mode::backward, 4.0, 2, -3.0 / 4.0);
  CHECK(bpz_residual(wrong, validate_config({0.0, 1.0}), 0, 1e-4) > 0.1);
}

TEST_CASE("bpz residual over random configurations") {
  std::mt19937_64 gen(3);
  for (Mode m : {Mode::backward, Mode::forward}) {
    for (double kappa : {2.0, 8.0 / 3.0, 4.0, 6.0, 8.0}) {
      for (std::size_t n : {2u, 3u, 4u}) {
        const auto s = PartitionSpec::make(m, kappa, n);
        for (int k = 0; k < 5; ++k) {
          const auto c = random_config(gen, n);
          for (std::size_t i = 0; i < n; ++i)
            CHECK(bpz_residual(s, c, i, 1e-4 * c.min_gap()) < 1e-5);
        }
      }
    }
  }
}

TEST_CASE("bpz stencil converges with the step") {
  // Halving the step cuts the truncation error by at least the factor 4 of a
  // second-order scheme; the stencils are fourth order, so by about 16.
  const auto s = PartitionSpec::make(Mode::backward, 4.0, 3);
  const auto c = validate_config({0.0, 1.0, 3.0});
  double prev = bpz_residual(s, c, 1, 0.08);
  for (double h : {0.04, 0.02}) {
    const double r = bpz_residual(s, c, 1, h);
    CHECK(prev / r > 4.0);
    prev = r;
  }
}

TEST_CASE("bpz step validation") {
  const auto s = PartitionSpec::make(Mode::backward, 4.0, 2);
  CHECK_THROWS_AS(bpz_residual(s, validate_config({0.0, 1.0}), 0, 0.2), StepTooLarge);
  CHECK_THROWS_AS(bpz_residual(s, validate_config({0.0, 1.0}), 0, 0.0), StepTooLarge);
  CHECK_THROWS_AS(bpz_residual(s, validate_config({0.0, 1.0}), 2, 1e-4), InputError);
}

TEST_CASE("bpz residual accepts any handle") {
  const ScalarField z = [](std::span<const ext> x) { return std::pow(std::abs(x[0] - x[1]), ext(-0.5)); };
  CHECK(bpz_residual(Mode::backward, 4.0, z, validate_config({0.0, 1.0}), 0, 1e-4) < 1e-5);
  const ScalarField one = [](std::span<const ext>) { return ext(1); };
  CHECK(bpz_residual(Mode::backward, 4.0, one, validate_config({0.0, 1.0}), 0, 1e-4) > 0.1);
}

TEST_CASE("kz residual examples") {
  CHECK(kz_residual(PartitionSpec::make(Mode::backward, 4.0, 2), validate_config({0.0, 1.0}), 0,
                    1e-5) < 1e-8);
  CHECK(kz_residual(PartitionSpec::make(Mode::forward, 6.0, 4), validate_config({0.0, 1.0, 2.0, 5.0}),
                    2) < 1e-7);
  const auto s = PartitionSpec::make(Mode::backward, 3.0, 2);
  const auto sym = validate_config({-1.0, 1.0});
  CHECK(std::abs(fd_grad_log_z(s, sym, 0) + fd_grad_log_z(s, sym, 1)) < 1e-8);
}

TEST_CASE("Frobenius exponent at a collision") {
  for (Mode m : {Mode::backward, Mode::forward}) {
    const auto s = PartitionSpec::make(m, 3.0, 3);
    std::vector<double> limits;
    for (double eps : {1e-2, 1e-4, 1e-6, 1e-8}) {
      const double z = z_value(s, validate_config({0.5, 0.5 + eps, 2.0}));
      limits.push_back(z * std::pow(eps, -s.exponent));
    }
    CHECK(std::isfinite(limits.back()));
    CHECK(limits.back() > 0.0);
    CHECK(std::abs(limits[3] / limits[2] - 1.0) < 1e-5);
    CHECK(std::abs(limits[3] / limits[2] - 1.0) < std::abs(limits[1] / limits[0] - 1.0));
  }
}

TEST_CASE("log-space evaluation survives tiny gaps") {
  const auto s = PartitionSpec::make(Mode::backward, 0.5, 10);
  std::vector<double> x;
  for (int k = 0; k < 10; ++k) x.push_back(1e-3 * k);
  const double lz = log_z_value(s, x);
  CHECK(std::isfinite(lz));
  CHECK(lz > 300.0);
}
