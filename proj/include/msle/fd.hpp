#pragma once

// Central finite-difference stencils shared by the residual evaluators.
// Evaluation runs in long double so that nested stencils (commutators) stay
// above the rounding floor at steps around 1e-3.

#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace msle {

using ext = long double;
using ext_cplx = std::complex<long double>;

/// Function of a configuration, e.g. a partition function or test function.
using ScalarField = std::function<ext(std::span<const ext>)>;

namespace fd {

inline std::vector<ext> widen(std::span<const double> x) { return {x.begin(), x.end()}; }

/// 4th-order first derivative in coordinate k.
template <typename F>
auto d1(const F& f, std::vector<ext> x, std::size_t k, ext h) {
  const ext x0 = x[k];
  x[k] = x0 + 2 * h;
  auto fp2 = f(x);
  x[k] = x0 + h;
  auto fp1 = f(x);
  x[k] = x0 - h;
  auto fm1 = f(x);
  x[k] = x0 - 2 * h;
  auto fm2 = f(x);
  return (-fp2 + ext(8) * fp1 - ext(8) * fm1 + fm2) / (ext(12) * h);
}

/// 4th-order (5-point) second derivative in coordinate k.
template <typename F>
auto d2(const F& f, std::vector<ext> x, std::size_t k, ext h) {
  const ext x0 = x[k];
  auto f0 = f(x);
  x[k] = x0 + 2 * h;
  auto fp2 = f(x);
  x[k] = x0 + h;
  auto fp1 = f(x);
  x[k] = x0 - h;
  auto fm1 = f(x);
  x[k] = x0 - 2 * h;
  auto fm2 = f(x);
  return (-fp2 + ext(16) * fp1 - ext(30) * f0 + ext(16) * fm1 - fm2) / (ext(12) * h * h);
}

/// 4th-order derivative of a scalar function of one variable.
template <typename F, typename T>
auto d1_scalar(const F& f, T x, ext h) {
  return (-f(x + T(2 * h)) + ext(8) * f(x + T(h)) - ext(8) * f(x - T(h)) + f(x - T(2 * h))) /
         (ext(12) * h);
}

}  // namespace fd
}  // namespace msle
