#pragma once

// Closed-form dq-domain impedances of the case-study system: an RL Thevenin
// grid (source) and a current-controlled VSC (load) with PWM delay and an
// optional synchronous-reference-frame PLL.
//
// Frame and sign conventions
//  - amplitude-invariant Park transform; dq quantities are phase peak values
//  - the global dq frame is aligned with the steady-state PCC voltage
//  - source current flows from the grid into the PCC, load current from the
//    PCC into the converter; Z_S is measured with current into the grid.

#include <cmath>
#include <string>

#include "imptk/config.hpp"
#include "imptk/freqresp.hpp"

namespace imptk {

struct SystemParams {
  double v_th_volt = 690.0;   // Thevenin EMF, line-to-line rms
  double s_base_va = 1.0e6;
  double f_n_hz = 50.0;
  double v_dc_volt = 1400.0;  // carried for completeness; the averaged model has a stiff dc link
  cplx z_th_pu{0.02, 0.4};
  cplx z_s_pu{0.002, 0.1};
  double kp_pu = 0.255;
  double ti_s = 0.0025;
  double k_pll = 60.0;        // dimensionless here: acts on v_q / |v|
  double t_pll_s = 0.033;
  double t_d_s = 1.0e-4;      // 1 / (2 f_sw) with f_sw = 5 kHz
  double id_ref_pu = 1.0;
  double iq_ref_pu = 0.0;
  bool pll_enabled = false;

  double omega1() const { return two_pi * f_n_hz; }
  double z_base() const { return v_th_volt * v_th_volt / s_base_va; }
  double v_base_peak() const { return v_th_volt * std::sqrt(2.0 / 3.0); }
  double i_base_rms() const { return s_base_va / (std::sqrt(3.0) * v_th_volt); }
  double i_base_peak() const { return std::sqrt(2.0) * i_base_rms(); }

  double r_th() const { return z_th_pu.real() * z_base(); }
  double l_th() const { return z_th_pu.imag() * z_base() / omega1(); }
  double r_s() const { return z_s_pu.real() * z_base(); }
  double l_s() const { return z_s_pu.imag() * z_base() / omega1(); }
  double kp_ohm() const { return kp_pu * z_base(); }
  // Set-points count current delivered to the grid; the load branch current
  // (into the converter, used by every impedance) is their negative.
  cplx load_current_ref() const { return -cplx(id_ref_pu, iq_ref_pu) * i_base_peak(); }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string("parameter ") + name + " must be positive");
    };
    positive(v_th_volt, "v_th_volt");
    positive(s_base_va, "s_base_va");
    positive(f_n_hz, "f_n_hz");
    positive(v_dc_volt, "v_dc_volt");
    positive(ti_s, "ti_s");
    positive(t_pll_s, "t_pll_s");
    positive(t_d_s, "t_d_s");
    positive(kp_pu, "kp_pu");
    positive(k_pll, "k_pll");
    if (z_th_pu.real() < 0.0 || z_th_pu.imag() < 0.0 || z_s_pu.real() < 0.0 || z_s_pu.imag() < 0.0)
      throw ConfigError("impedances must have non-negative R and X");
    if (z_s_pu.imag() <= 0.0 && z_th_pu.imag() <= 0.0)
      throw ConfigError("the network needs a non-zero series inductance");
  }

  static SystemParams from_config(const Config& cfg) {
    SystemParams p;
    auto set = [&](const char* key, double& field) {
      if (auto v = cfg.number(key)) field = *v;
    };
    set("v_th_volt", p.v_th_volt);
    set("s_base_va", p.s_base_va);
    set("f_n_hz", p.f_n_hz);
    set("v_dc_volt", p.v_dc_volt);
    double re = p.z_th_pu.real(), im = p.z_th_pu.imag();
    set("z_th_pu_re", re);
    set("z_th_pu_im", im);
    p.z_th_pu = {re, im};
    re = p.z_s_pu.real();
    im = p.z_s_pu.imag();
    set("z_s_pu_re", re);
    set("z_s_pu_im", im);
    p.z_s_pu = {re, im};
    set("kp_pu", p.kp_pu);
    set("ti_s", p.ti_s);
    set("k_pll", p.k_pll);
    set("t_pll_s", p.t_pll_s);
    set("t_d_s", p.t_d_s);
    set("id_ref_pu", p.id_ref_pu);
    set("iq_ref_pu", p.iq_ref_pu);
    if (auto b = cfg.boolean("pll_enabled")) p.pll_enabled = *b;
    try {
      p.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(cfg.where("v_th_volt") + ": " + e.what());
    }
    return p;
  }
};

// Same |Z_th|, different X/R.
inline SystemParams with_xr_ratio(SystemParams p, double x_over_r) {
  const double mag = std::abs(p.z_th_pu);
  const double r = mag / std::sqrt(1.0 + x_over_r * x_over_r);
  p.z_th_pu = {r, r * x_over_r};
  return p;
}

// ---------------------------------------------------------------------------
// Operating point
// ---------------------------------------------------------------------------
struct OperatingPoint {
  cplx v_pcc;   // dq, real by frame choice (V)
  cplx i_load;  // dq (A), equals the source current without injection
  cplx v_conv;  // converter modulation voltage, dq (V)
  cplx e_th;    // Thevenin EMF expressed in the PCC-aligned frame (V)
  double residual_pu = 0.0;
};

inline double operating_point_residual(const SystemParams& p, const OperatingPoint& op) {
  const cplx zth{p.r_th(), p.omega1() * p.l_th()};
  const cplx zs{p.r_s(), p.omega1() * p.l_s()};
  const double r1 = std::abs(op.e_th - zth * op.i_load - op.v_pcc);
  const double r2 = std::abs(op.v_pcc - zs * op.i_load - op.v_conv);
  const double r3 = std::abs(std::abs(op.e_th) - p.v_base_peak());
  const cplx iref = p.load_current_ref();
  const double r4 = std::abs(op.i_load - iref) * p.z_base();
  return std::max({r1, r2, r3, r4}) / p.v_base_peak();
}

// Steady-state phasor solution with the load current at its set-points.
// |E| is fixed; the PCC voltage is taken as the real axis, so
//   |V + Z_th I| = |E|  ->  V = -Re(Z_th I) + sqrt(|E|^2 - Im(Z_th I)^2).
inline OperatingPoint solve_operating_point(const SystemParams& p) {
  p.validate();
  const cplx i_l = p.load_current_ref();
  const cplx zth{p.r_th(), p.omega1() * p.l_th()};
  const cplx zs{p.r_s(), p.omega1() * p.l_s()};
  const cplx drop = zth * i_l;
  const double e = p.v_base_peak();
  const double disc = e * e - drop.imag() * drop.imag();
  if (disc <= 0.0) throw NumericalError("operating point: set-points not achievable through Z_th");
  const double v = -drop.real() + std::sqrt(disc);
  if (!(v > 0.0)) throw NumericalError("operating point: PCC voltage collapses at these set-points");
  OperatingPoint op{cplx(v, 0.0), i_l, cplx(v, 0.0) - zs * i_l, cplx(v, 0.0) + drop, 0.0};
  op.residual_pu = operating_point_residual(p, op);
  if (op.residual_pu > 1e-9) throw NumericalError("operating point residual too large");
  return op;
}

// ---------------------------------------------------------------------------
// Impedance models
// ---------------------------------------------------------------------------
namespace detail {

inline void require_fundamental(const SystemParams& p, const FrequencyGrid& grid) {
  if (std::abs(grid.fundamental() - p.omega1()) > 1e-12 * p.omega1())
    throw ConfigError("grid fundamental does not match f_n_hz");
}

// RL branch in dq: [[R + sL, -w1 L], [w1 L, R + sL]].
inline Mat2 rl_dq(double r, double l, double w1, cplx s) {
  return {r + s * l, -w1 * l, w1 * l, r + s * l};
}

} // namespace detail

inline Mat2 grid_impedance_dq_at(const SystemParams& p, double omega) {
  return detail::rl_dq(p.r_th(), p.l_th(), p.omega1(), cplx(0.0, omega));
}

inline cplx current_controller(const SystemParams& p, cplx s) {
  return p.kp_ohm() * (1.0 + 1.0 / (p.ti_s * s));
}

inline cplx pwm_delay(const SystemParams& p, cplx s) { return 1.0 / (1.0 + p.t_d_s * s); }

// Closed-loop PLL angle response to the normalised q-axis voltage:
// dtheta = H / (s + H) * dv_q / |V|,  H = K (1 + 1 / (T s)).
inline cplx pll_transfer(const SystemParams& p, cplx s) {
  const cplx h = p.k_pll * (1.0 + 1.0 / (p.t_pll_s * s));
  return h / (s + h);
}

// Load impedance at one dq frequency. Small-signal derivation, with
// J = [[0,-1],[1,0]] the 90-degree rotation and dtheta the PLL angle error:
//   controller frame currents:   di_c = di - dtheta J I0
//   converter voltage (global):  dv_c = G_d H_c di_c + dtheta J Vc0
//   filter:                      dv   = Z_f di + dv_c
// so dv = Z_mfd di + p dtheta with p = J (Vc0 - G_d H_c I0) and
// dtheta = G_pll / V0 * dv_q. Solving for dv gives Z_L = M^-1 Z_mfd with
// M = I - g p e_q^T.
inline Mat2 vsc_impedance_dq_at(const SystemParams& p, const OperatingPoint& op, double omega,
                                bool pll_enabled) {
  const cplx s{0.0, omega};
  const cplx gc = pwm_delay(p, s) * current_controller(p, s);
  Mat2 z = detail::rl_dq(p.r_s(), p.l_s(), p.omega1(), s);
  z.a += gc;
  z.d += gc;
  if (!pll_enabled) return z;

  const cplx g = pll_transfer(p, s) / op.v_pcc.real();
  // w = Vc0 - G_d H_c I0 as a dq 2-vector; p = J w = (-w_q, w_d)
  const cplx wd = op.v_conv.real() - gc * op.i_load.real();
  const cplx wq = op.v_conv.imag() - gc * op.i_load.imag();
  const cplx pd = -wq;
  const cplx pq = wd;
  const Mat2 m{1.0, -g * pd, 0.0, 1.0 - g * pq};
  return inverse(m) * z;
}

inline Tf2x2 grid_impedance_dq(const SystemParams& p, const FrequencyGrid& grid) {
  detail::require_fundamental(p, grid);
  return Tf2x2::generate(grid, Domain::dq, Role::impedance,
                         [&](double w) { return grid_impedance_dq_at(p, w); });
}

inline Tf2x2 vsc_impedance_dq(const SystemParams& p, const OperatingPoint& op,
                              const FrequencyGrid& grid, bool pll_enabled) {
  detail::require_fundamental(p, grid);
  if (!(op.v_pcc.real() > 0.0)) throw ConfigError("vsc_impedance_dq: operating point not solved");
  return Tf2x2::generate(grid, Domain::dq, Role::impedance, [&](double w) {
    return vsc_impedance_dq_at(p, op, w, pll_enabled);
  });
}

inline Tf2x2 to_per_unit(const Tf2x2& z, double z_base) {
  const double k = z.role() == Role::admittance ? z_base : 1.0 / z_base;
  std::vector<Mat2> v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = cplx(k) * z[i];
  return {z.grid(), std::move(v), z.domain(), z.role()};
}

inline Tf2x2 to_si(const Tf2x2& z, double z_base) {
  const double k = z.role() == Role::admittance ? 1.0 / z_base : z_base;
  std::vector<Mat2> v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = cplx(k) * z[i];
  return {z.grid(), std::move(v), z.domain(), z.role()};
}

} // namespace imptk
