#pragma once

// Amplitude-invariant Clarke/Park transforms on complex space vectors.
//
//   x_s  = 2/3 (x_a + a x_b + a^2 x_c),   a = exp(j 2pi/3)
//   x_dq = x_s exp(-j theta)             (d = real part, q = imaginary part)
//
// A balanced set x_k = X cos(theta - 2pi k/3 + phi) maps to x_dq = X exp(j phi).

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

namespace imptk {

using Abc = std::array<double, 3>;

namespace detail {
inline const std::complex<double> op_a{-0.5, std::numbers::sqrt3 / 2.0};
inline const std::complex<double> op_a2{-0.5, -std::numbers::sqrt3 / 2.0};
} // namespace detail

inline std::complex<double> abc_to_vector(const Abc& x) {
  return (2.0 / 3.0) * (x[0] + detail::op_a * x[1] + detail::op_a2 * x[2]);
}

// Zero-sequence free inverse.
inline Abc vector_to_abc(std::complex<double> v) {
  return {v.real(), (v * detail::op_a2).real(), (v * detail::op_a).real()};
}

inline std::complex<double> abc_to_dq(const Abc& x, double theta) {
  return abc_to_vector(x) * std::polar(1.0, -theta);
}

inline Abc dq_to_abc(std::complex<double> dq, double theta) {
  return vector_to_abc(dq * std::polar(1.0, theta));
}

} // namespace imptk
