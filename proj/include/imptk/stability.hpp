#pragma once

// Minor-loop gains (exact, semi-decoupled, decoupled), eigenvalue loci,
// the decoupling norm epsilon, and Nyquist encirclement counting.

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "imptk/freqresp.hpp"
#include "imptk/models_analytic.hpp"

namespace imptk {

// ---------------------------------------------------------------------------
// Minor loops
// ---------------------------------------------------------------------------
inline Tf2x2 minor_loop(const Tf2x2& zs, const Tf2x2& yl) {
  require_compatible(zs, yl, "minor_loop");
  std::vector<Mat2> v(zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) v[i] = zs[i] * yl[i];
  return {zs.grid(), std::move(v), zs.domain(), Role::minorloop};
}

// diag(Z_1^S Y_1^L, Z_2^S Y_2^L) from scalar (single-injection) channels.
inline Tf2x2 minor_loop_decoupled(const Tf1x1& zs1, const Tf1x1& zs2, const Tf1x1& yl1,
                                  const Tf1x1& yl2, Domain domain) {
  const auto& g = zs1.grid();
  if (!(zs2.grid() == g) || !(yl1.grid() == g) || !(yl2.grid() == g))
    throw MismatchError("minor_loop_decoupled: grid mismatch");
  std::vector<Mat2> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = Mat2::diag(zs1[i] * yl1[i], zs2[i] * yl2[i]);
  return {g, std::move(v), domain, Role::minorloop};
}

inline Tf2x2 semidecouple(const Tf2x2& l) {
  if (l.role() != Role::minorloop) throw MismatchError("semidecouple: input is not a minor loop");
  std::vector<Mat2> v(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) v[i] = Mat2::diag(l[i].a, l[i].d);
  return {l.grid(), std::move(v), l.domain(), Role::minorloop};
}

struct MinorLoopSet {
  Tf2x2 exact;
  Tf2x2 semidec;
  Tf2x2 dec;

  Domain domain() const { return exact.domain(); }
};

// ---------------------------------------------------------------------------
// Eigenvalues
// ---------------------------------------------------------------------------
using EigPair = std::array<cplx, 2>;

// Roots of l^2 - tr l + det = 0 with discriminant (a - d)^2 + 4 b c.
// The larger root is formed without cancellation and the smaller from det / larger.
inline EigPair eig2_closed_form(const Mat2& m) {
  if (m.b * m.c == cplx(0.0)) return {m.a, m.d};
  const cplx tr = m.trace();
  const cplx diff = m.a - m.d;
  const cplx root = std::sqrt(diff * diff + 4.0 * m.b * m.c);
  cplx plus = 0.5 * (tr + root);
  cplx minus = 0.5 * (tr - root);
  if (std::abs(plus) >= std::abs(minus)) {
    if (plus != cplx(0.0)) minus = m.det() / plus;
  } else {
    plus = m.det() / minus;
  }
  return {plus, minus};
}

inline EigPair eig2_numeric(const Mat2& m) {
  Eigen::Matrix2cd e;
  e << m.a, m.b, m.c, m.d;
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> solver(e, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigen solver did not converge");
  const auto& ev = solver.eigenvalues();
  return {ev(0), ev(1)};
}

// Distance between two eigenvalue pairs regarded as unordered multisets.
inline double multiset_distance(const EigPair& x, const EigPair& y) {
  const double same = std::max(std::abs(x[0] - y[0]), std::abs(x[1] - y[1]));
  const double swap = std::max(std::abs(x[0] - y[1]), std::abs(x[1] - y[0]));
  return std::min(same, swap);
}

struct EigenLoci {
  FrequencyGrid grid;
  std::vector<cplx> lambda1;
  std::vector<cplx> lambda2;
  std::vector<bool> swapped;  // branch swap applied at point k relative to the raw solver order

  std::size_t size() const { return lambda1.size(); }
};

// Reorders so that sum_i |lambda_i(k+1) - lambda_i(k)| is minimal at every step.
inline EigenLoci pair_for_continuity(const FrequencyGrid& grid, const std::vector<EigPair>& raw) {
  EigenLoci loci{grid, {}, {}, {}};
  loci.lambda1.reserve(raw.size());
  loci.lambda2.reserve(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    bool swap = false;
    if (k > 0) {
      const cplx p1 = loci.lambda1.back(), p2 = loci.lambda2.back();
      const double keep = std::abs(raw[k][0] - p1) + std::abs(raw[k][1] - p2);
      const double flip = std::abs(raw[k][1] - p1) + std::abs(raw[k][0] - p2);
      swap = flip < keep;
    }
    loci.lambda1.push_back(swap ? raw[k][1] : raw[k][0]);
    loci.lambda2.push_back(swap ? raw[k][0] : raw[k][1]);
    loci.swapped.push_back(swap);
  }
  return loci;
}

inline EigenLoci eig_loci_closed_form(const Tf2x2& l) {
  std::vector<EigPair> raw(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) raw[i] = eig2_closed_form(l[i]);
  return pair_for_continuity(l.grid(), raw);
}

inline EigenLoci eig_loci_numeric(const Tf2x2& l) {
  std::vector<EigPair> raw(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) raw[i] = eig2_numeric(l[i]);
  return pair_for_continuity(l.grid(), raw);
}

// ---------------------------------------------------------------------------
// Decoupling norm
// ---------------------------------------------------------------------------
inline constexpr double default_epsilon_threshold = 0.1;

// eps such that the exact eigenvalues are {L11 - eps, L22 + eps}.
// The two candidate roots eps = (D -/+ sqrt(D^2 + 4bc)) / 2, D = L11 - L22,
// multiply to -bc. Pairing eigenvalues with diagonals at minimum total
// distance (2|eps|) selects the smaller root; ties take the principal "-" root.
inline cplx epsilon_at(const Mat2& m) {
  const cplx bc = m.b * m.c;
  if (bc == cplx(0.0)) return 0.0;
  const cplx diff = m.a - m.d;
  const cplx root = std::sqrt(diff * diff + 4.0 * bc);
  const cplx e_minus = 0.5 * (diff - root);
  const cplx e_plus = 0.5 * (diff + root);
  const double am = std::abs(e_minus), ap = std::abs(e_plus);
  if (am < ap) return -bc / e_plus;
  if (ap < am) return -bc / e_minus;
  return e_minus;
}

struct EpsilonNorm {
  FrequencyGrid grid;
  Domain domain;
  double threshold;
  std::vector<cplx> eps;
  std::vector<double> violations_hz;

  bool violated(std::size_t i) const { return std::abs(eps[i]) > threshold; }
};

inline EpsilonNorm epsilon_norm(const Tf2x2& l, double threshold = default_epsilon_threshold) {
  if (l.role() != Role::minorloop) throw MismatchError("epsilon_norm: input is not a minor loop");
  EpsilonNorm out{l.grid(), l.domain(), threshold, {}, {}};
  out.eps.reserve(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) {
    out.eps.push_back(epsilon_at(l[i]));
    if (out.violated(i)) out.violations_hz.push_back(l.grid().hz(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagonal dominance of the RL grid matrix: (w1 L)^2 < R^2 + (w L)^2
// ---------------------------------------------------------------------------
inline std::vector<bool> diagonal_dominance(const SystemParams& p, const FrequencyGrid& grid) {
  const double r = p.r_th(), l = p.l_th(), x1 = p.omega1() * l;
  std::vector<bool> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double xw = grid.omega(i) * l;
    out[i] = x1 * x1 < r * r + xw * xw;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nyquist
// ---------------------------------------------------------------------------
inline constexpr double default_nyquist_margin = 0.02;

struct NyquistVerdict {
  std::vector<double> branch_encirclements;  // per branch; may be half-integer when branches join
  int total_encirclements = 0;
  double min_distance = 0.0;  // closest approach of any locus point to -1
  bool marginal = false;      // verdict withheld
  bool stable = false;        // meaningful only if !marginal
  static constexpr const char* assumption = "assumes open-loop stable source and load";
};

namespace detail {

inline double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= two_pi;
  while (a <= -std::numbers::pi) a += two_pi;
  return a;
}

inline double swept_angle(const std::vector<cplx>& pts, std::size_t from, std::size_t to) {
  double total = 0.0;
  for (std::size_t k = from + 1; k <= to; ++k)
    total += wrap_angle(std::arg(pts[k] + 1.0) - std::arg(pts[k - 1] + 1.0));
  return total;
}

// Angle subtended at -1 by the straight segment from x to y.
inline double segment_angle(cplx x, cplx y) { return std::arg((y + 1.0) / (x + 1.0)); }

} // namespace detail

// Counts encirclements of -1 by the eigenvalue loci over w in (-W, W), using
// L(-jw) = conj(L(jw)). Positive counts are counter-clockwise. The curve is
// closed at both ends with straight segments between each point and its mirror
// image; at the low end each branch is joined to the nearest conjugate branch.
inline NyquistVerdict nyquist_verdict(const EigenLoci& loci,
                                      double tol_margin = default_nyquist_margin) {
  NyquistVerdict v;
  const std::size_t n = loci.size();
  if (n < 2) throw ConfigError("nyquist_verdict: need at least two frequency points");
  const std::array<const std::vector<cplx>*, 2> br{&loci.lambda1, &loci.lambda2};

  v.min_distance = std::numeric_limits<double>::infinity();
  for (const auto* b : br)
    for (cplx z : *b) v.min_distance = std::min(v.min_distance, std::abs(z + 1.0));
  v.marginal = v.min_distance < tol_margin;

  double total = 0.0;
  for (int i = 0; i < 2; ++i) {
    const auto& pts = *br[i];
    // positive and mirrored negative half sweep the same angle
    double a = 2.0 * detail::swept_angle(pts, 0, n - 1);
    a += detail::segment_angle(pts[n - 1], std::conj(pts[n - 1]));
    v.branch_encirclements.push_back(a / two_pi);
    total += a;
  }
  // low-end closure: conj(lambda_j(w_min)) -> lambda_i(w_min)
  const cplx l1 = loci.lambda1.front(), l2 = loci.lambda2.front();
  const double same = std::abs(std::conj(l1) - l1) + std::abs(std::conj(l2) - l2);
  const double cross = std::abs(std::conj(l2) - l1) + std::abs(std::conj(l1) - l2);
  if (same <= cross) {
    const double c1 = detail::segment_angle(std::conj(l1), l1);
    const double c2 = detail::segment_angle(std::conj(l2), l2);
    v.branch_encirclements[0] += c1 / two_pi;
    v.branch_encirclements[1] += c2 / two_pi;
    total += c1 + c2;
  } else {
    const double c1 = detail::segment_angle(std::conj(l2), l1);
    const double c2 = detail::segment_angle(std::conj(l1), l2);
    v.branch_encirclements[0] += c1 / two_pi;
    v.branch_encirclements[1] += c2 / two_pi;
    total += c1 + c2;
  }
  v.total_encirclements = static_cast<int>(std::lround(total / two_pi));
  v.stable = v.total_encirclements == 0;
  return v;
}

// Single closed curve (already including any mirror half), for SISO use and tests.
inline int winding_number(const std::vector<cplx>& closed_curve) {
  if (closed_curve.size() < 2) return 0;
  double a = detail::swept_angle(closed_curve, 0, closed_curve.size() - 1);
  a += detail::segment_angle(closed_curve.back(), closed_curve.front());
  return static_cast<int>(std::lround(a / two_pi));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------
namespace csv {

inline std::string to_csv(const EigenLoci& l) {
  std::string s = "f_hz,re_l1,im_l1,re_l2,im_l2\n";
  for (std::size_t i = 0; i < l.size(); ++i)
    s += num(l.grid.hz(i)) + "," + num(l.lambda1[i].real()) + "," + num(l.lambda1[i].imag()) +
         "," + num(l.lambda2[i].real()) + "," + num(l.lambda2[i].imag()) + "\n";
  return s;
}

inline std::string to_csv(const EpsilonNorm& e) {
  std::string s = "f_hz,re_eps,im_eps,abs_eps,violated\n";
  for (std::size_t i = 0; i < e.eps.size(); ++i)
    s += num(e.grid.hz(i)) + "," + num(e.eps[i].real()) + "," + num(e.eps[i].imag()) + "," +
         num(std::abs(e.eps[i])) + "," + (e.violated(i) ? "1" : "0") + "\n";
  return s;
}

} // namespace csv

} // namespace imptk
