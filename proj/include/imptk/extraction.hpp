#pragma once

// Impedance identification by shunt current injection.
//
// For every analysis frequency the averaged model is simulated with one or
// two injections; a no-injection baseline is subtracted and single-bin DFTs
// over a commensurate window give voltage and branch-current phasors.
//  - one injection per channel gives the decoupled scalars V_k / I_k
//  - two independent injections give the full matrix Z = [V1 V2] [I1 I2]^-1
// Source and load are identified from the same runs using their own branch
// currents (current into the grid for the source, into the converter for the load).
//
// Sequence channels use the space vector x_s(t):
//   X_p = mean(x_s e^{-j w_p t}),  X_n = conj(mean(x_s e^{+j w_n t}))
// with w_p = w + w1 and w_n = w - w1, so that [X_p, X_n] = A [X_d, X_q] / sqrt2
// and a negative w_n is read as the conjugate component at |w_n|.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imptk/domains.hpp"
#include "imptk/parallel.hpp"
#include "imptk/stability.hpp"
#include "imptk/timesim.hpp"

namespace imptk {

inline constexpr double default_window_s = 0.4;
inline constexpr double commensurate_step_hz = 2.5;

// ---------------------------------------------------------------------------
// Single-bin DFT
// ---------------------------------------------------------------------------
inline bool integer_cycles(double f_hz, double window_s) {
  const double cycles = f_hz * window_s;
  return std::abs(cycles - std::round(cycles)) < 1e-6 * std::max(1.0, std::abs(cycles));
}

inline void require_commensurate(double f_hz, double f1_hz, std::size_t n, double dt) {
  const double window = static_cast<double>(n) * dt;
  if (!integer_cycles(f_hz, window) || !integer_cycles(f1_hz, window)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "window of %.6g s is not commensurate with %.6g Hz and the %.6g Hz fundamental",
                  window, f_hz, f1_hz);
    throw NumericalError(buf);
  }
}

// Phasor X with x(t) = Re{X e^{j w t}}: X = (2/N) sum x_k e^{-j w t_k}.
// A pure A sin(2 pi f t) gives |X| = A, arg X = -90 deg.
inline cplx dft_bin(std::span<const double> x, double dt, double t0, double f_hz,
                    double f1_hz) {
  require_commensurate(f_hz, f1_hz, x.size(), dt);
  const double w = two_pi * f_hz;
  cplx acc{};
  for (std::size_t k = 0; k < x.size(); ++k)
    acc += x[k] * std::polar(1.0, -w * (t0 + static_cast<double>(k) * dt));
  return 2.0 * acc / static_cast<double>(x.size());
}

// Coefficient of e^{j w t} in a complex series (w may be negative).
inline cplx vector_bin(std::span<const cplx> x, double dt, double t0, double omega) {
  cplx acc{};
  for (std::size_t k = 0; k < x.size(); ++k)
    acc += x[k] * std::polar(1.0, -omega * (t0 + static_cast<double>(k) * dt));
  return acc / static_cast<double>(x.size());
}

// Channel pair: (d, q) or (p, n).
using Phasor2 = std::pair<cplx, cplx>;

// Positive-sequence phasor at f_p and negative-sequence phasor at f_n (signed).
inline Phasor2 abc_to_pn_phasors(std::span<const Abc> x, double dt, double t0, double f_p_hz,
                                 double f_n_hz, double f1_hz) {
  require_commensurate(std::abs(f_p_hz), f1_hz, x.size(), dt);
  require_commensurate(std::abs(f_n_hz), f1_hz, x.size(), dt);
  std::vector<cplx> v(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) v[k] = abc_to_vector(x[k]);
  const cplx p = vector_bin(v, dt, t0, two_pi * f_p_hz);
  const cplx n = std::conj(vector_bin(v, dt, t0, -two_pi * f_n_hz));
  return {p, n};
}

// d and q phasors at f_hz in the fixed w1 t frame.
inline Phasor2 abc_to_dq_phasors(std::span<const Abc> x, double dt, double t0, double f_hz,
                                 double f1_hz) {
  std::vector<double> d(x.size()), q(x.size());
  const double w1 = two_pi * f1_hz;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const cplx v = abc_to_dq(x[k], w1 * (t0 + static_cast<double>(k) * dt));
    d[k] = v.real();
    q[k] = v.imag();
  }
  return {dft_bin(d, dt, t0, f_hz, f1_hz), dft_bin(q, dt, t0, f_hz, f1_hz)};
}

// ---------------------------------------------------------------------------
// Phasor sets
// ---------------------------------------------------------------------------
struct PhasorSet {
  double f_hz = 0.0;  // dq-domain analysis frequency
  Domain domain = Domain::dq;
  Phasor2 v;
  Phasor2 i_source;  // current into the grid subsystem
  Phasor2 i_load;    // current into the converter subsystem
};

// Phasors of (trace - baseline) over the last `window_samples` samples.
inline PhasorSet measure_phasors(const SimTrace& tr, const SimTrace& baseline, Domain domain,
                                 double f_hz, std::size_t window_samples) {
  if (tr.diverged || baseline.diverged) throw NumericalError("cannot measure a diverged trace");
  if (tr.size() != baseline.size() || tr.size() < window_samples)
    throw NumericalError("trace and baseline lengths differ or are shorter than the window");
  const std::size_t start = tr.size() - window_samples;
  const double t0 = tr.t[start];
  std::vector<Abc> v(window_samples), is(window_samples), il(window_samples);
  for (std::size_t k = 0; k < window_samples; ++k) {
    for (int ph = 0; ph < 3; ++ph) {
      v[k][ph] = tr.v_pcc[start + k][ph] - baseline.v_pcc[start + k][ph];
      is[k][ph] = -(tr.i_source[start + k][ph] - baseline.i_source[start + k][ph]);
      il[k][ph] = tr.i_load[start + k][ph] - baseline.i_load[start + k][ph];
    }
  }
  const double f1 = tr.f1_hz;
  auto measure = [&](const std::vector<Abc>& x) {
    return domain == Domain::dq ? abc_to_dq_phasors(x, tr.dt, t0, f_hz, f1)
                                : abc_to_pn_phasors(x, tr.dt, t0, f_hz + f1, f_hz - f1, f1);
  };
  return {f_hz, domain, measure(v), measure(is), measure(il)};
}

// ---------------------------------------------------------------------------
// Solves
// ---------------------------------------------------------------------------
inline constexpr double condition_flag_threshold = 1e3;

struct MatrixSolve {
  Mat2 z;
  double cond;
};

// Columns of V and I are the two experiments.
inline MatrixSolve solve_two_injections(Phasor2 v1, Phasor2 i1, Phasor2 v2, Phasor2 i2) {
  const Mat2 vm{v1.first, v2.first, v1.second, v2.second};
  const Mat2 im{i1.first, i2.first, i1.second, i2.second};
  if (is_singular(im))
    throw NumericalError("injection pair is ill-conditioned (near-collinear current phasors)");
  return {vm * inverse(im), condition_number(im)};
}

inline cplx scalar_ratio(cplx v, cplx i, double floor) {
  if (std::abs(i) < floor) throw NumericalError("injected-component current below noise floor");
  return v / i;
}

// ---------------------------------------------------------------------------
// Analytic counterpart of the decoupled (single-injection) measurement
// ---------------------------------------------------------------------------
// Shunt injection e_k into the PCC: V = (Y_S + Y_L)^-1 e_k, I_S = Y_S V, I_L = Y_L V.
struct DecoupledChannels {
  Tf1x1 source1, source2;  // Z_d^S, Z_q^S or Z_p^S, Z_n^S
  Tf1x1 load1, load2;
};

inline DecoupledChannels decoupled_shunt_channels(const Tf2x2& zs, const Tf2x2& zl) {
  require_compatible(zs, zl, "decoupled_shunt_channels");
  const std::size_t n = zs.size();
  std::vector<cplx> s1(n), s2(n), l1(n), l2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat2 ys = inverse(zs[i]), yl = inverse(zl[i]);
    const Mat2 zt = inverse(ys + yl);
    const Mat2 is = ys * zt, il = yl * zt;
    // column k of zt/is/il is the response to injection in channel k
    s1[i] = zt.a / is.a;
    s2[i] = zt.d / is.d;
    l1[i] = zt.a / il.a;
    l2[i] = zt.d / il.d;
  }
  const char* c1 = zs.domain() == Domain::dq ? "d" : "p";
  const char* c2 = zs.domain() == Domain::dq ? "q" : "n";
  const auto& g = zs.grid();
  return {{g, s1, std::string("Z_") + c1 + "^S"}, {g, s2, std::string("Z_") + c2 + "^S"},
          {g, l1, std::string("Z_") + c1 + "^L"}, {g, l2, std::string("Z_") + c2 + "^L"}};
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------
struct ExtractionSettings {
  Domain domain = Domain::dq;
  double window_s = default_window_s;
  double amplitude_pu = default_injection_pu;
  unsigned threads = 1;
  bool linearity_check = true;  // repeats the first frequency at twice the amplitude
};

struct LinearityDelta {
  double f_hz;
  double relative_change;  // max entry change of Z_S and Z_L, relative to the matrix scale
};

struct ExtractionResult {
  Domain domain;
  Tf2x2 z_source;
  Tf2x2 z_load;
  DecoupledChannels decoupled;
  std::vector<double> cond;
  std::vector<bool> flagged;
  std::vector<LinearityDelta> linearity;
  std::vector<PhasorSet> phasors_first;  // experiment 1 at each frequency
  std::vector<PhasorSet> phasors_second; // experiment 2 at each frequency
};

inline std::pair<InjectionKind, InjectionKind> injection_pair(Domain d) {
  return d == Domain::dq ? std::pair{InjectionKind::dq1, InjectionKind::dq2}
                         : std::pair{InjectionKind::pn1, InjectionKind::pn2};
}

// Rounds to multiples of 2.5 Hz, removes duplicates and, for the sequence
// domain, the points whose mirror bin lands on dc or the fundamental.
inline FrequencyGrid snap_to_commensurate(const FrequencyGrid& grid, Domain domain,
                                          double step_hz = commensurate_step_hz) {
  const double f1 = grid.fundamental_hz();
  std::vector<double> hz;
  for (double f : grid.points_hz()) {
    double snapped = std::max(step_hz, std::round(f / step_hz) * step_hz);
    if (domain == Domain::pn &&
        (std::abs(snapped - f1) < 1e-9 || std::abs(snapped - 2.0 * f1) < 1e-9))
      continue;
    if (!hz.empty() && std::abs(hz.back() - snapped) < 1e-9) continue;
    hz.push_back(snapped);
  }
  return FrequencyGrid::from_hz(hz, f1, GridKind::explicit_points);
}

namespace detail {

inline SimConfig injected(const SimConfig& base, InjectionKind kind, double f_hz, double amp_pu) {
  SimConfig c = base;
  c.injection = InjectionSpec{kind, f_hz, amp_pu * base.params.i_base_peak()};
  return c;
}

inline double relative_change(const Mat2& x, const Mat2& y) {
  const double scale = std::max(x.max_abs(), y.max_abs());
  return (x - y).max_abs() / scale;
}

} // namespace detail

// `base` fixes the system, case, dt and total time; the window is the tail of
// each run. Every frequency must be commensurate with the window.
inline ExtractionResult extract(const SimConfig& base, const FrequencyGrid& grid,
                                const ExtractionSettings& s) {
  base.validate();
  if (std::abs(grid.fundamental_hz() - base.params.f_n_hz) > 1e-9)
    throw ConfigError("extraction grid fundamental does not match f_n_hz");
  if (base.t_end <= s.window_s) throw ConfigError("t_end must exceed the DFT window");
  const auto window_samples = static_cast<std::size_t>(std::llround(s.window_s / base.dt));
  const double f1 = base.params.f_n_hz;
  for (double f : grid.points_hz()) {
    require_commensurate(f, f1, window_samples, base.dt);
    if (s.domain == Domain::pn) {
      if (std::abs(f - f1) < 1e-9 || std::abs(f - 2 * f1) < 1e-9)
        throw ConfigError("sequence-domain sweep cannot use f = f_n or 2 f_n (mirror collision)");
    }
  }

  SimConfig base_run = base;
  base_run.injection.reset();
  const SimTrace baseline = simulate(base_run);
  if (baseline.diverged) throw NumericalError("baseline simulation diverged");

  const auto [k1, k2] = injection_pair(s.domain);
  const std::size_t n = grid.size();
  std::vector<PhasorSet> ph1(n), ph2(n);
  parallel_for(2 * n, s.threads, [&](std::size_t job) {
    const std::size_t i = job / 2;
    const bool second = job % 2 == 1;
    const double f = grid.hz(i);
    const SimTrace tr = simulate(detail::injected(base, second ? k2 : k1, f, s.amplitude_pu));
    if (tr.diverged) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "simulation diverged at %.6g Hz with %s injection", f,
                    to_string(second ? k2 : k1));
      throw NumericalError(buf);
    }
    (second ? ph2 : ph1)[i] = measure_phasors(tr, baseline, s.domain, f, window_samples);
  });

  const double floor = 1e-6 * s.amplitude_pu * base.params.i_base_peak();
  std::vector<Mat2> zs(n), zl(n);
  std::vector<cplx> s1(n), s2(n), l1(n), l2(n);
  std::vector<double> cond(n);
  std::vector<bool> flagged(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = ph1[i];
    const auto& b = ph2[i];
    try {
      const MatrixSolve src = solve_two_injections(a.v, a.i_source, b.v, b.i_source);
      const MatrixSolve load = solve_two_injections(a.v, a.i_load, b.v, b.i_load);
      zs[i] = src.z;
      zl[i] = load.z;
      cond[i] = std::max(src.cond, load.cond);
      flagged[i] = cond[i] > condition_flag_threshold;
      s1[i] = scalar_ratio(a.v.first, a.i_source.first, floor);
      s2[i] = scalar_ratio(b.v.second, b.i_source.second, floor);
      l1[i] = scalar_ratio(a.v.first, a.i_load.first, floor);
      l2[i] = scalar_ratio(b.v.second, b.i_load.second, floor);
    } catch (const NumericalError& e) {
      char buf[96];
      std::snprintf(buf, sizeof buf, " (at %.6g Hz, %s/%s injections)", grid.hz(i), to_string(k1),
                    to_string(k2));
      throw NumericalError(e.what() + std::string(buf));
    }
  }

  const char* c1 = s.domain == Domain::dq ? "d" : "p";
  const char* c2 = s.domain == Domain::dq ? "q" : "n";
  ExtractionResult res{
      s.domain,
      Tf2x2(grid, zs, s.domain, Role::impedance),
      Tf2x2(grid, zl, s.domain, Role::impedance),
      {{grid, s1, std::string("Z_") + c1 + "^S"},
       {grid, s2, std::string("Z_") + c2 + "^S"},
       {grid, l1, std::string("Z_") + c1 + "^L"},
       {grid, l2, std::string("Z_") + c2 + "^L"}},
      cond,
      flagged,
      {},
      ph1,
      ph2};

  if (s.linearity_check && n > 0) {
    const double f = grid.hz(0);
    const double amp = 2.0 * s.amplitude_pu;
    const SimTrace t1 = simulate(detail::injected(base, k1, f, amp));
    const SimTrace t2 = simulate(detail::injected(base, k2, f, amp));
    const PhasorSet a = measure_phasors(t1, baseline, s.domain, f, window_samples);
    const PhasorSet b = measure_phasors(t2, baseline, s.domain, f, window_samples);
    const Mat2 zs2 = solve_two_injections(a.v, a.i_source, b.v, b.i_source).z;
    const Mat2 zl2 = solve_two_injections(a.v, a.i_load, b.v, b.i_load).z;
    res.linearity.push_back(
        {f, std::max(detail::relative_change(zs[0], zs2), detail::relative_change(zl[0], zl2))});
  }
  return res;
}

// ---------------------------------------------------------------------------
// Full model set
// ---------------------------------------------------------------------------
struct ModelSet {
  Domain domain;
  Tf2x2 z_source;
  Tf2x2 z_load;
  DecoupledChannels decoupled;
  MinorLoopSet loops;
  EigenLoci loci_exact;
  EigenLoci loci_semidec;
  EigenLoci loci_dec;
  EpsilonNorm epsilon;
  NyquistVerdict verdict;
};

inline ModelSet build_model_set(const Tf2x2& zs, const Tf2x2& zl, const DecoupledChannels& dec,
                                double eps_threshold = default_epsilon_threshold) {
  require_compatible(zs, zl, "build_model_set");
  const Tf2x2 exact = minor_loop(zs, invert(zl));
  const Tf1x1 y1 = [&] {
    std::vector<cplx> v(dec.load1.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / dec.load1[i];
    return Tf1x1(dec.load1.grid(), v, "Y1^L");
  }();
  const Tf1x1 y2 = [&] {
    std::vector<cplx> v(dec.load2.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / dec.load2[i];
    return Tf1x1(dec.load2.grid(), v, "Y2^L");
  }();
  MinorLoopSet loops{exact, semidecouple(exact),
                     minor_loop_decoupled(dec.source1, dec.source2, y1, y2, zs.domain())};
  EigenLoci le = eig_loci_closed_form(loops.exact);
  return {zs.domain(),
          zs,
          zl,
          dec,
          loops,
          le,
          eig_loci_closed_form(loops.semidec),
          eig_loci_closed_form(loops.dec),
          epsilon_norm(loops.exact, eps_threshold),
          nyquist_verdict(le)};
}

struct PipelineResult {
  ExtractionResult raw;
  ModelSet models;
};

// Runs the extraction and assembles every model variant.
inline PipelineResult pipeline(const SimConfig& base, const FrequencyGrid& grid,
                               const ExtractionSettings& s) {
  ExtractionResult r = extract(base, grid, s);
  ModelSet m = build_model_set(r.z_source, r.z_load, r.decoupled);
  return {std::move(r), std::move(m)};
}

// Analytic counterpart: closed-form matrices, transformed to `domain`.
inline ModelSet analytic_model_set(const SystemParams& p, const FrequencyGrid& grid,
                                   Domain domain) {
  const OperatingPoint op = solve_operating_point(p);
  const Tf2x2 zs = to_domain(grid_impedance_dq(p, grid), domain);
  const Tf2x2 zl = to_domain(vsc_impedance_dq(p, op, grid, p.pll_enabled), domain);
  return build_model_set(zs, zl, decoupled_shunt_channels(zs, zl));
}

namespace csv {

inline std::string to_csv_with_cond(const Tf2x2& m, const std::vector<double>& cond) {
  std::string s = header_2x2() + ",cond\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    s += row_2x2(m.grid().hz(i), m[i]) + "," + num(cond[i]) + "\n";
  return s;
}

} // namespace csv

} // namespace imptk
