#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "msle/coupling.hpp"

using namespace msle;

namespace {

CouplingSpec backward_spec(double kappa, double gamma, std::size_t n = 2) {
  Params p = Params::make(Mode::backward, kappa, n, gamma);
  return CouplingSpec::make(p);
}

CouplingSpec forward_spec(double kappa, std::size_t n = 2) {
  return CouplingSpec::make(Params::make(Mode::forward, kappa, n));
}

cplx random_upper(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> re(-3.0, 3.0), im(0.3, 3.0);
  return {re(gen), im(gen)};
}

}  // namespace

TEST_CASE("green examples") {
  const cplx i(0, 1);
  CHECK(green(GreenKind::neumann, i, 2.0 * i) == doctest::Approx(-std::log(3.0)));
  CHECK(green(GreenKind::dirichlet, i, 2.0 * i) == doctest::Approx(std::log(3.0)));
  CHECK(green(GreenKind::neumann, i, 1.0 + i) == doctest::Approx(-std::log(std::sqrt(5.0))));
  CHECK_THROWS_AS(green(GreenKind::neumann, i, i), CoincidentPoints);
}

TEST_CASE("green symmetry and positivity") {
  std::mt19937_64 gen(1);
  for (int k = 0; k < 200; ++k) {
    const cplx z = random_upper(gen), w = random_upper(gen);
    for (GreenKind g : {GreenKind::neumann, GreenKind::dirichlet}) {
      CHECK(green(g, z, w) == green(g, w, z));
      CHECK(std::isfinite(green(g, z, w)));
    }
    CHECK(green(GreenKind::dirichlet, z, w) > 0.0);
  }
}

TEST_CASE("boundary_u examples") {
  const double origin[] = {0.0};
  CHECK(boundary_u(backward_spec(4.0, 2.0, 1), cplx(0, 2), origin) == doctest::Approx(std::log(2.0)));
  for (double kappa : {1.0, 4.0, 16.0 / 3.0})
    CHECK(std::abs(boundary_u(backward_spec(kappa, std::sqrt(kappa), 1), cplx(0, 1), origin)) < 1e-15);
  const auto f = forward_spec(2.0, 1);
  CHECK(boundary_u(f, cplx(0, 1), origin) == doctest::Approx(-std::sqrt(2.0) * std::numbers::pi / 2));
}

TEST_CASE("holo_u_tilde examples") {
  const double origin[] = {0.0};
  const auto b = backward_spec(4.0, 2.0, 1);
  const cplx u = holo_u_tilde(b, cplx(0, 2), origin);
  CHECK(u.real() == doctest::Approx(std::log(2.0)));
  CHECK(u.imag() == doctest::Approx(std::numbers::pi / 2));
  CHECK(u.real() == doctest::Approx(boundary_u(b, cplx(0, 2), origin)));

  const auto f = forward_spec(2.0, 1);
  const cplx v = holo_u_tilde(f, cplx(0, 1), origin);
  CHECK(std::abs(v.real()) < 1e-15);
  CHECK(v.imag() == doctest::Approx(-2.22144).epsilon(1e-5));
  CHECK(v.imag() == doctest::Approx(boundary_u(f, cplx(0, 1), origin)));
}

TEST_CASE("u~ extends u") {
  std::mt19937_64 gen(2);
  const auto b = backward_spec(4.0, 2.0, 3);
  const auto f2 = forward_spec(2.0, 3);
  const auto f6 = forward_spec(6.0, 3);
  const std::vector<double> x = {-1.0, 0.5, 2.0};
  for (int k = 0; k < 50; ++k) {
    const cplx z = random_upper(gen);
    CHECK(holo_u_tilde(b, z, x).real() == doctest::Approx(boundary_u(b, z, x)).epsilon(1e-13));
    CHECK(holo_u_tilde(f2, z, x).imag() == doctest::Approx(boundary_u(f2, z, x)).epsilon(1e-13));
    CHECK(holo_u_tilde(f6, z, x).imag() == doctest::Approx(boundary_u(f6, z, x)).epsilon(1e-13));
  }
}

TEST_CASE("boundary_u invariances") {
  const std::vector<double> x = {-1.0, 0.5, 2.0};
  for (const auto& cs : {backward_spec(4.0, 2.0, 3), forward_spec(2.0, 3), forward_spec(6.0, 3)}) {
    std::vector<double> shifted, scaled, permuted = {x[2], x[0], x[1]};
    for (double v : x) {
      shifted.push_back(v + 0.7);
      scaled.push_back(2.5 * v);
    }
    std::optional<double> c_shift, c_scale;
    for (double re : {-2.0, -0.5, 0.3, 1.7}) {
      for (double im : {0.2, 1.0, 4.0}) {
        const cplx z(re, im);
        const double base = boundary_u(cs, z, x);
        const double ds = boundary_u(cs, z + 0.7, shifted) - base;
        const double dl = boundary_u(cs, 2.5 * z, scaled) - base;
        if (!c_shift) c_shift = ds;
        if (!c_scale) c_scale = dl;
        CHECK(std::abs(ds - *c_shift) < 1e-12);
        CHECK(std::abs(dl - *c_scale) < 1e-12);
        CHECK(std::abs(boundary_u(cs, z, permuted) - base) < 1e-12);
      }
    }
  }
}

TEST_CASE("coupling parameters") {
  const auto b = backward_spec(4.0, 2.0);
  CHECK(b.q_charge == doctest::Approx(2.0));
  CHECK(b.green_kind == GreenKind::neumann);
  CHECK_NOTHROW(require_coupling(b));
  CHECK_NOTHROW(require_coupling(backward_spec(1.0, 4.0)));
  CHECK_NOTHROW(require_coupling(backward_spec(2.0, std::sqrt(2.0))));
  CHECK_THROWS_AS(require_coupling(backward_spec(3.0, 1.0)), InputError);

  const auto f = forward_spec(2.0);
  CHECK(f.chi == doctest::Approx(2.0 / std::sqrt(2.0) - std::sqrt(2.0) / 2.0));
  CHECK(f.green_kind == GreenKind::dirichlet);
  CHECK_NOTHROW(require_coupling(f));
  auto bad = f;
  bad.chi = -bad.chi;
  CHECK_THROWS_AS(require_coupling(bad), InputError);
}

TEST_CASE("coupling PDE examples") {
  const auto cfg = validate_config({0.0, 1.0});
  const cplx z(1, 2);
  CHECK(coupling_pde_residual(backward_spec(4.0, 2.0), z, cfg, 0, 1e-4) < 1e-4);
  CHECK(coupling_pde_residual(forward_spec(2.0), z, cfg, 1, 1e-4) < 1e-4);

  auto flipped = backward_spec(4.0, 2.0);
  flipped.epsilon_signs[0] = +1;
  CHECK(coupling_pde_residual(flipped, z, cfg, 0, 1e-4) > 1e-2);
  CHECK_THROWS_AS(coupling_pde_residual(backward_spec(4.0, 2.0), cplx(0, 0.05), cfg, 0, 0.01),
                  StepTooLarge);
}

TEST_CASE("coupling PDE over random points") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const std::vector<CouplingSpec> specs = {backward_spec(4.0, 2.0), backward_spec(1.0, 4.0),
                                           forward_spec(2.0), forward_spec(6.0),
                                           backward_spec(4.0, 2.0, 3), forward_spec(2.0, 3)};
  for (const auto& cs : specs) {
    const std::size_t n = cs.params.n_points;
    for (int k = 0; k < 10; ++k) {
      std::vector<double> x(n);
      PointConfig cfg;
      for (;;) {
        for (auto& v : x) v = u(gen);
        bool ok = true;
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = a + 1; b < n; ++b) ok = ok && std::abs(x[a] - x[b]) > 0.3;
        if (ok) break;
      }
      cfg = validate_config(x);
      const cplx z = random_upper(gen);
      for (std::size_t i = 0; i < n; ++i) CHECK(coupling_pde_residual(cs, z, cfg, i, 1e-4) < 1e-4);
    }
  }
}

TEST_CASE("flipped sign residual converges to a nonzero limit") {
  auto flipped = backward_spec(4.0, 2.0);
  flipped.epsilon_signs[0] = +1;
  const auto cfg = validate_config({0.0, 1.0});
  const double a = coupling_pde_residual(flipped, cplx(1, 2), cfg, 0, 1e-2);
  const double b = coupling_pde_residual(flipped, cplx(1, 2), cfg, 0, 1e-3);
  CHECK(std::abs(a - b) < 1e-3 * b);
}

TEST_CASE("coupling PDE residual shrinks with the step") {
  const auto cs = backward_spec(4.0, 2.0);
  const auto cfg = validate_config({0.0, 1.0});
  const double coarse = coupling_pde_residual(cs, cplx(0.5, 0.8), cfg, 0, 0.06);
  const double fine = coupling_pde_residual(cs, cplx(0.5, 0.8), cfg, 0, 0.03);
  INFO(coarse << " " << fine);
  CHECK(coarse > 1e-9);
  CHECK(coarse / fine > 4.0);
}

TEST_CASE("green rate examples") {
  CHECK(green_rate(Mode::backward, cplx(0, 1), cplx(0, 2), 0.0) == 0.0);
  CHECK(green_rate(Mode::backward, cplx(1, 1), cplx(2, 2), 0.0) == doctest::Approx(-0.5));
}

TEST_CASE("green flow identity") {
  const auto path = DrivingPath::from_increments(0.0, 4.0, 1e-5, sample_increments({9, 0, 0}, 1e-5, 5000));
  for (Mode m : {Mode::backward, Mode::forward})
    CHECK(green_flow_identity_error(m, cplx(1, 2), cplx(-1, 2), path) < 1e-6);
}

TEST_CASE("h process starts at u") {
  const auto cs = backward_spec(4.0, 2.0);
  const auto cfg = validate_config({0.0, 1.0});
  const std::vector<cplx> bulk = {cplx(1, 2), cplx(-1, 2)};
  const auto s = simulate_h_process(cs, cfg, 0, bulk, 0.0, 1e-3, {1, 0, 0});
  for (std::size_t k = 0; k < bulk.size(); ++k) {
    CHECK(s.h_start[k] == boundary_u(cs, bulk[k], cfg.points()));
    CHECK(s.h_end[k] == s.h_start[k]);
  }
  REQUIRE(s.cross_var_accum.size() == 1);
  CHECK(s.cross_var_accum[0] == 0.0);
  CHECK(s.green_start[0] == s.green_end[0]);

  const auto f = forward_spec(2.0);
  const auto sf = simulate_h_process(f, cfg, 1, bulk, 0.0, 1e-3, {1, 0, 0});
  CHECK(sf.h_start[0] == boundary_u(f, bulk[0], cfg.points()));
}

TEST_CASE("h process trace") {
  const auto cs = backward_spec(4.0, 2.0);
  HProcessOptions o;
  o.keep_trace = true;
  const std::vector<cplx> bulk = {cplx(1, 2)};
  const auto s = simulate_h_process(cs, validate_config({0.0, 1.0}), 0, bulk, 0.01, 1e-3, {2, 0, 0}, o);
  REQUIRE(s.h_values.size() == 1);
  CHECK(s.h_values[0].front() == s.h_start[0]);
  CHECK(s.h_values[0].back() == s.h_end[0]);
  for (double h : s.h_values[0]) CHECK(std::isfinite(h));
}

TEST_CASE("coupling martingale") {
  const auto cs = backward_spec(4.0, 2.0);
  const auto cfg = validate_config({0.0, 1.0});
  const std::vector<cplx> bulk = {cplx(1, 2), cplx(-1, 2)};
  for (const auto& r : coupling_martingale_check(cs, cfg, 0, bulk, 0.05, 1e-3, 3, 10000)) {
    INFO(r.name << " " << r.estimate << " se " << r.std_error);
    CHECK(r.pass);
  }
}

TEST_CASE("far from the boundary h barely moves") {
  const auto cs = backward_spec(4.0, 2.0);
  const std::vector<cplx> far = {cplx(0, 100)};
  for (const auto& r :
       coupling_martingale_check(cs, validate_config({0.0, 1.0}), 0, far, 0.05, 1e-4, 3, 4000)) {
    INFO(r.estimate << " se " << r.std_error);
    CHECK(r.pass);
    CHECK(std::abs(r.estimate) < 1e-5);
    CHECK(r.std_error < 1e-5);
  }
}

TEST_CASE("cross variation matches the Green's function drop") {
  const auto cs = backward_spec(4.0, 2.0);
  const std::vector<cplx> bulk = {cplx(1, 2), cplx(-1, 2)};
  const auto samples = simulate_h_processes(cs, validate_config({0.0, 1.0}), 0, bulk, 0.05, 1e-4, 4, 200);
  const auto r = cross_variation_check(samples);
  REQUIRE(r.size() == 1);
  INFO(r[0].estimate << " vs " << r[0].reference);
  CHECK(r[0].pass);

  const auto empty = simulate_h_processes(cs, validate_config({0.0, 1.0}), 0, bulk, 0.0, 1e-4, 4, 3);
  const auto z = cross_variation_check(empty);
  CHECK(z[0].estimate == 0.0);
  CHECK(z[0].reference == 0.0);
}

TEST_CASE("cross variation needs the noise") {
  const auto cs = backward_spec(4.0, 2.0);
  const std::vector<cplx> bulk = {cplx(1, 2), cplx(-1, 2)};
  HProcessOptions o;
  o.noise = false;
  const auto samples =
      simulate_h_processes(cs, validate_config({0.0, 1.0}), 0, bulk, 0.05, 1e-4, 4, 5, o);
  // Drift-only increments are O(dt), so their products sum to O(dt).
  const double drop = samples[0].green_start[0] - samples[0].green_end[0];
  CHECK(std::abs(samples[0].cross_var_accum[0]) < 1e-3 * std::abs(drop));
  CHECK(std::abs(drop) > 1e-3);
  CHECK_FALSE(cross_variation_check(samples)[0].pass);
}
