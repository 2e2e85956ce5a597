#pragma once

#include <random>

#include "imptk/freqresp.hpp"

namespace imptk::check {

// Entries uniform in the unit disk.
class RandomMat2 {
public:
  explicit RandomMat2(unsigned seed) : rng_(seed) {}

  cplx entry() {
    std::uniform_real_distribution<double> r(0.0, 1.0), a(0.0, two_pi);
    return std::polar(std::sqrt(r(rng_)), a(rng_));
  }
  Mat2 operator()() { return {entry(), entry(), entry(), entry()}; }

private:
  std::mt19937_64 rng_;
};

inline double rel_err(cplx x, cplx ref) { return std::abs(x - ref) / std::abs(ref); }

inline double phase_err_deg(cplx x, cplx ref) { return std::abs(std::arg(x / ref)) * 180.0 / std::numbers::pi; }

} // namespace imptk::check
