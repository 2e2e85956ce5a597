#pragma once

// dq <-> modified sequence (pn) domain transform and MFD classification.
//
// The sequence-domain matrix is a similarity transform of the dq matrix,
//   Z_pn = A Z_dq A^-1,  A = (1/sqrt2) [[1, j], [1, -j]],
// where the p channel lives at w_dq + w1 and the n channel at w_dq - w1.
// A is unitary, so eigenvalues (and hence Nyquist loci) are shared.

#include <cmath>
#include <string>
#include <vector>

#include "imptk/freqresp.hpp"

namespace imptk {

inline Mat2 transform_matrix() {
  const double k = 1.0 / std::numbers::sqrt2;
  return {k, cplx(0.0, k), k, cplx(0.0, -k)};
}

inline Mat2 transform_matrix_inverse() { return transform_matrix().conj_transpose(); }

inline Mat2 dq_to_pn(const Mat2& z) {
  return transform_matrix() * z * transform_matrix_inverse();
}

inline Mat2 pn_to_dq(const Mat2& z) {
  return transform_matrix_inverse() * z * transform_matrix();
}

inline Tf2x2 dq_to_pn(const Tf2x2& z) {
  if (z.domain() != Domain::dq) throw MismatchError("dq_to_pn: input is not tagged dq");
  std::vector<Mat2> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = dq_to_pn(z[i]);
  return {z.grid(), std::move(out), Domain::pn, z.role()};
}

inline Tf2x2 pn_to_dq(const Tf2x2& z) {
  if (z.domain() != Domain::pn) throw MismatchError("pn_to_dq: input is not tagged pn");
  std::vector<Mat2> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = pn_to_dq(z[i]);
  return {z.grid(), std::move(out), Domain::dq, z.role()};
}

inline Tf2x2 to_domain(const Tf2x2& z, Domain target) {
  if (z.domain() == target) return z;
  return target == Domain::pn ? dq_to_pn(z) : pn_to_dq(z);
}

struct SequenceFrequencyPair {
  double omega_dq;
  double omega_p;
  double omega_n;  // may be negative: a negative-sequence phasor at negative frequency
};

inline SequenceFrequencyPair map_frequency(double omega_dq, double omega_1) {
  return {omega_dq, omega_dq + omega_1, omega_dq - omega_1};
}

inline std::vector<SequenceFrequencyPair> map_frequencies(const FrequencyGrid& grid) {
  std::vector<SequenceFrequencyPair> out;
  out.reserve(grid.size());
  for (double w : grid.points()) out.push_back(map_frequency(w, grid.fundamental()));
  return out;
}

// ---------------------------------------------------------------------------
// MFD classification
// ---------------------------------------------------------------------------
inline constexpr double default_mfd_threshold = 0.05;

struct MfdPoint {
  double f_hz;
  double ratio;                // max(|Z12|,|Z21|) / max(|Z11|,|Z22|)
  bool mfd;                    // ratio <= threshold
  double sym_residual_diag;    // |Z_dd - Z_qq| / max diag magnitude
  double sym_residual_offdiag; // |Z_dq + Z_qd| / max diag magnitude
};

struct MfdReport {
  Domain domain;
  double threshold;
  std::vector<MfdPoint> points;

  bool all_mfd() const {
    for (const auto& p : points)
      if (!p.mfd) return false;
    return true;
  }
};

inline double offdiag_ratio(const Mat2& z) {
  const double diag = std::max(std::abs(z.a), std::abs(z.d));
  const double off = std::max(std::abs(z.b), std::abs(z.c));
  if (diag == 0.0) return off == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return off / diag;
}

// For pn input the symmetry residuals are evaluated on the equivalent dq matrix.
inline MfdReport mfd_classify(const Tf2x2& z, double threshold = default_mfd_threshold) {
  if (!(threshold > 0.0)) throw ConfigError("mfd_classify: threshold must be positive");
  MfdReport rep{z.domain(), threshold, {}};
  rep.points.reserve(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Mat2 dq = z.domain() == Domain::dq ? z[i] : pn_to_dq(z[i]);
    const double scale = std::max(std::abs(dq.a), std::abs(dq.d));
    const double norm = scale > 0.0 ? scale : 1.0;
    const double r = offdiag_ratio(z[i]);
    rep.points.push_back({z.grid().hz(i), r, r <= threshold, std::abs(dq.a - dq.d) / norm,
                          std::abs(dq.b + dq.c) / norm});
  }
  return rep;
}

namespace csv {

inline std::string to_csv(const MfdReport& r) {
  std::string s = "f_hz,ratio,verdict,sym_residual_diag,sym_residual_offdiag\n";
  for (const auto& p : r.points)
    s += num(p.f_hz) + "," + num(p.ratio) + "," + (p.mfd ? "1" : "0") + "," +
         num(p.sym_residual_diag) + "," + num(p.sym_residual_offdiag) + "\n";
  return s;
}

} // namespace csv

} // namespace imptk
