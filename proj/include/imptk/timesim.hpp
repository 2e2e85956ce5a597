#pragma once

// Fixed-step RK4 simulation of the averaged case-study system:
//
//   EMF --R_th,L_th--> PCC --R_s,L_s--> converter (PI current control,
//                       |                 first-order PWM delay, optional PLL)
//                    shunt injection i_inj
//
// The PCC has no shunt element, so the load current is i_s + i_inj and only
// the grid-branch current is a network state. Summing both branch equations
//   (L_th + L_s) di_s/dt = e - R_th i_s - R_s (i_s + i_inj) - v_c - L_s di_inj/dt
// and the PCC voltage follows as v = e - R_th i_s - L_th di_s/dt.
// The network is integrated on stationary-frame space vectors; controller
// states live in the controller dq frame.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "imptk/config.hpp"
#include "imptk/models_analytic.hpp"
#include "imptk/threephase.hpp"

namespace imptk {

enum class SimCase { mfd, mfc };
enum class InjectionKind { dq1, dq2, pn1, pn2 };

inline const char* to_string(SimCase c) { return c == SimCase::mfd ? "MFD" : "MFC"; }
inline const char* to_string(InjectionKind k) {
  switch (k) {
  case InjectionKind::dq1: return "dq1";
  case InjectionKind::dq2: return "dq2";
  case InjectionKind::pn1: return "pn1";
  case InjectionKind::pn2: return "pn2";
  }
  return "?";
}

struct InjectionSpec {
  InjectionKind kind = InjectionKind::dq1;
  double f_inj_hz = 10.0;
  double amplitude = 0.0;  // A, phase peak

  void validate() const {
    if (!(f_inj_hz > 0.0)) throw ConfigError("injection frequency must be positive");
    if (!(amplitude > 0.0)) throw ConfigError("injection amplitude must be positive");
  }
};

// Three-phase shunt injection currents.
//  dq1: I sin(wi t) cos(w1 t - 2pi k/3)          pure d axis in the w1 t frame
//  dq2: -I sin(wi t) sin(w1 t - 2pi k/3)         pure q axis in the w1 t frame
//  pn1: I sin((wi + w1) t - 2pi k/3)             positive sequence at wi + w1
//  pn2: I sin((wi - w1) t + 2pi k/3)             negative sequence at wi - w1
inline Abc injection_signal(const InjectionSpec& spec, double t, double f1_hz) {
  const double wi = two_pi * spec.f_inj_hz, w1 = two_pi * f1_hz, amp = spec.amplitude;
  Abc out{};
  for (int k = 0; k < 3; ++k) {
    const double shift = two_pi * k / 3.0;
    switch (spec.kind) {
    case InjectionKind::dq1: out[k] = amp * std::sin(wi * t) * std::cos(w1 * t - shift); break;
    case InjectionKind::dq2: out[k] = -amp * std::sin(wi * t) * std::sin(w1 * t - shift); break;
    case InjectionKind::pn1: out[k] = amp * std::sin((wi + w1) * t - shift); break;
    case InjectionKind::pn2: out[k] = amp * std::sin((wi - w1) * t + shift); break;
    }
  }
  return out;
}

inline Abc injection_derivative(const InjectionSpec& spec, double t, double f1_hz) {
  const double wi = two_pi * spec.f_inj_hz, w1 = two_pi * f1_hz, amp = spec.amplitude;
  Abc out{};
  for (int k = 0; k < 3; ++k) {
    const double shift = two_pi * k / 3.0;
    const double ph = w1 * t - shift;
    switch (spec.kind) {
    case InjectionKind::dq1:
      out[k] = amp * (wi * std::cos(wi * t) * std::cos(ph) - w1 * std::sin(wi * t) * std::sin(ph));
      break;
    case InjectionKind::dq2:
      out[k] = -amp * (wi * std::cos(wi * t) * std::sin(ph) + w1 * std::sin(wi * t) * std::cos(ph));
      break;
    case InjectionKind::pn1: out[k] = amp * (wi + w1) * std::cos((wi + w1) * t - shift); break;
    case InjectionKind::pn2: out[k] = amp * (wi - w1) * std::cos((wi - w1) * t + shift); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------
inline constexpr double default_dt = 10e-6;
inline constexpr double default_injection_pu = 0.02;

struct SimConfig {
  SystemParams params;
  SimCase sim_case = SimCase::mfd;
  double dt = default_dt;
  double t_end = 0.8;
  std::optional<InjectionSpec> injection;
  double initial_offset_pu = 0.0;   // added to the grid current at t = 0 (d axis)
  bool zero_sources = false;        // EMF and converter voltage forced to zero, controller frozen
  double divergence_bound_pu = 50.0;

  void validate() const {
    params.validate();
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
    if (dt > params.t_d_s / 10.0 * (1.0 + 1e-12))
      throw ConfigError("dt must resolve the PWM delay (dt <= t_d / 10)");
    if (sim_case == SimCase::mfc && dt > params.t_pll_s / 20.0 * (1.0 + 1e-12))
      throw ConfigError("dt must resolve the PLL (dt <= t_pll / 20)");
    if (injection) injection->validate();
  }

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

  static SimConfig from_config(const Config& cfg) {
    SimConfig c;
    c.params = SystemParams::from_config(cfg);
    if (auto s = cfg.text("case")) {
      if (*s == "MFD" || *s == "mfd")
        c.sim_case = SimCase::mfd;
      else if (*s == "MFC" || *s == "mfc")
        c.sim_case = SimCase::mfc;
      else
        throw ConfigError(cfg.where("case") + ": case must be MFD or MFC, got '" + *s + "'");
      const bool pll = c.sim_case == SimCase::mfc;
      if (cfg.has("pll_enabled") && c.params.pll_enabled != pll)
        throw ConfigError(cfg.where("case") + ": case contradicts pll_enabled");
      c.params.pll_enabled = pll;
    } else {
      c.sim_case = c.params.pll_enabled ? SimCase::mfc : SimCase::mfd;
    }
    if (auto v = cfg.number("dt_s")) c.dt = *v;
    if (auto v = cfg.number("t_end_s")) c.t_end = *v;
    const auto kind = cfg.text("inj_kind");
    if (kind && *kind != "none") {
      InjectionSpec spec;
      if (*kind == "dq1")
        spec.kind = InjectionKind::dq1;
      else if (*kind == "dq2")
        spec.kind = InjectionKind::dq2;
      else if (*kind == "pn1")
        spec.kind = InjectionKind::pn1;
      else if (*kind == "pn2")
        spec.kind = InjectionKind::pn2;
      else
        throw ConfigError(cfg.where("inj_kind") + ": unknown injection kind '" + *kind + "'");
      spec.f_inj_hz = cfg.number("f_inj_hz").value_or(spec.f_inj_hz);
      spec.amplitude =
          cfg.number("i_inj_pu").value_or(default_injection_pu) * c.params.i_base_peak();
      c.injection = spec;
    }
    try {
      c.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(cfg.where("dt_s") + ": " + e.what());
    }
    return c;
  }
};

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------
// Integrator state: grid current (stationary, 2), PI integrators (dq, 2),
// PWM-delay output (dq, 2), PLL integrator, PLL angle.
using SimState = std::array<double, 8>;

struct SimTrace {
  double dt = 0.0;
  double f1_hz = 50.0;
  std::vector<double> t;
  std::vector<Abc> v_pcc;
  std::vector<Abc> i_source;  // grid -> PCC
  std::vector<Abc> i_load;    // PCC -> converter
  std::vector<double> theta;  // controller angle
  std::vector<SimState> states;
  bool diverged = false;

  std::size_t size() const { return t.size(); }
};

namespace detail {

struct SimOutputs {
  cplx v_pcc;   // stationary
  cplx i_s;     // stationary
  cplx i_l;     // stationary
  double theta;
};

class AveragedModel {
public:
  explicit AveragedModel(const SimConfig& cfg)
      : cfg_(cfg), p_(cfg.params), op_(solve_operating_point(cfg.params)) {
    w1_ = p_.omega1();
    r_th_ = p_.r_th();
    l_th_ = p_.l_th();
    r_s_ = p_.r_s();
    l_s_ = p_.l_s();
    kp_ = p_.kp_ohm();
    ki_ = kp_ / p_.ti_s;
    i_ref_ = p_.load_current_ref();
    e_mag_ = std::abs(op_.e_th);
    e_angle_ = std::arg(op_.e_th);
  }

  const OperatingPoint& operating_point() const { return op_; }

  SimState initial_state() const {
    SimState x{};
    const cplx i0 = op_.i_load + cfg_.initial_offset_pu * p_.i_base_peak();
    x[0] = i0.real();
    x[1] = i0.imag();
    x[2] = op_.v_conv.real();
    x[3] = op_.v_conv.imag();
    x[4] = op_.v_conv.real();
    x[5] = op_.v_conv.imag();
    return x;
  }

  SimState derivative(double t, const SimState& x, SimOutputs* out = nullptr) const {
    const bool pll = cfg_.sim_case == SimCase::mfc;
    const double theta = pll ? x[7] : w1_ * t;
    const cplx rot = std::polar(1.0, theta);
    const cplx i_s{x[0], x[1]};
    const cplx x_i{x[2], x[3]};
    const cplx v_c_dq{x[4], x[5]};

    cplx i_inj{}, di_inj{};
    if (cfg_.injection) {
      const double f1 = p_.f_n_hz;
      i_inj = abc_to_vector(injection_signal(*cfg_.injection, t, f1));
      di_inj = abc_to_vector(injection_derivative(*cfg_.injection, t, f1));
    }
    const cplx emf = cfg_.zero_sources ? cplx{} : std::polar(e_mag_, w1_ * t + e_angle_);
    const cplx v_c = cfg_.zero_sources ? cplx{} : v_c_dq * rot;

    const cplx di_s =
        (emf - r_th_ * i_s - r_s_ * (i_s + i_inj) - v_c - l_s_ * di_inj) / (l_th_ + l_s_);
    const cplx v_pcc = emf - r_th_ * i_s - l_th_ * di_s;
    const cplx i_l = i_s + i_inj;

    SimState dx{};
    dx[0] = di_s.real();
    dx[1] = di_s.imag();
    if (!cfg_.zero_sources) {
      const cplx err = i_l * std::conj(rot) - i_ref_;  // current into the converter
      const cplx u = kp_ * err + x_i;
      const cplx dxi = ki_ * err;
      const cplx dvc = (u - v_c_dq) / p_.t_d_s;
      dx[2] = dxi.real();
      dx[3] = dxi.imag();
      dx[4] = dvc.real();
      dx[5] = dvc.imag();
      if (pll) {
        const cplx v_ctrl = v_pcc * std::conj(rot);
        const double mag = std::max(std::abs(v_ctrl), 1e-9 * p_.v_base_peak());
        const double e = v_ctrl.imag() / mag;
        dx[6] = p_.k_pll / p_.t_pll_s * e;
        dx[7] = w1_ + p_.k_pll * e + x[6];
      }
    }
    if (out) *out = {v_pcc, i_s, i_l, theta};
    return dx;
  }

  // Largest state magnitude in per unit.
  double state_norm_pu(const SimState& x) const {
    const double ib = p_.i_base_peak(), vb = p_.v_base_peak();
    return std::max({std::hypot(x[0], x[1]) / ib, std::hypot(x[2], x[3]) / vb,
                     std::hypot(x[4], x[5]) / vb, std::abs(x[6]) / w1_});
  }

private:
  SimConfig cfg_;
  SystemParams p_;
  OperatingPoint op_;
  double w1_, r_th_, l_th_, r_s_, l_s_, kp_, ki_, e_mag_, e_angle_;
  cplx i_ref_;
};

inline SimState axpy(const SimState& x, double h, const SimState& k) {
  SimState y;
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + h * k[i];
  return y;
}

} // namespace detail

// Integrates [0, t_end] and records every step. Divergence (non-finite state or
// state norm above the bound) truncates the trace and sets `diverged`.
inline SimTrace simulate(const SimConfig& cfg) {
  cfg.validate();
  const detail::AveragedModel model(cfg);
  const std::size_t n = cfg.steps();
  const double h = cfg.dt;

  SimTrace tr;
  tr.dt = h;
  tr.f1_hz = cfg.params.f_n_hz;
  tr.t.reserve(n + 1);
  tr.v_pcc.reserve(n + 1);
  tr.i_source.reserve(n + 1);
  tr.i_load.reserve(n + 1);
  tr.theta.reserve(n + 1);
  tr.states.reserve(n + 1);

  SimState x = model.initial_state();
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * h;
    detail::SimOutputs o;
    const SimState k1 = model.derivative(t, x, &o);
    bool finite = true;
    for (double v : x) finite = finite && std::isfinite(v);
    if (!finite || model.state_norm_pu(x) > cfg.divergence_bound_pu) {
      tr.diverged = true;
      break;
    }
    tr.t.push_back(t);
    tr.v_pcc.push_back(vector_to_abc(o.v_pcc));
    tr.i_source.push_back(vector_to_abc(o.i_s));
    tr.i_load.push_back(vector_to_abc(o.i_l));
    tr.theta.push_back(o.theta);
    tr.states.push_back(x);
    if (k == n) break;

    const SimState k2 = model.derivative(t + h / 2, detail::axpy(x, h / 2, k1));
    const SimState k3 = model.derivative(t + h / 2, detail::axpy(x, h / 2, k2));
    const SimState k4 = model.derivative(t + h, detail::axpy(x, h, k3));
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Settling
// ---------------------------------------------------------------------------
// First index k0 such that |x(k) - x(k - P)| < tol for every k in [k0, k0 + P]
// and every series; P = period_samples. Returns nullopt if never settled.
inline std::optional<std::size_t>
detect_settling(const std::vector<std::vector<double>>& series, std::size_t period_samples,
                double tol) {
  if (series.empty() || period_samples == 0) return std::nullopt;
  const std::size_t n = series.front().size();
  std::size_t run = 0;
  for (std::size_t k = period_samples; k < n; ++k) {
    bool ok = true;
    for (const auto& s : series)
      if (std::abs(s[k] - s[k - period_samples]) >= tol) {
        ok = false;
        break;
      }
    run = ok ? run + 1 : 0;
    if (run > period_samples) return k - period_samples;
  }
  return std::nullopt;
}

// Per-unit state series, with the angle reduced to its deviation from w1 t.
inline std::vector<std::vector<double>> normalized_states(const SimTrace& tr,
                                                          const SystemParams& p) {
  std::vector<std::vector<double>> s(8, std::vector<double>(tr.size()));
  const double ib = p.i_base_peak(), vb = p.v_base_peak(), w1 = p.omega1();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto& x = tr.states[k];
    s[0][k] = x[0] / ib;
    s[1][k] = x[1] / ib;
    s[2][k] = x[2] / vb;
    s[3][k] = x[3] / vb;
    s[4][k] = x[4] / vb;
    s[5][k] = x[5] / vb;
    s[6][k] = x[6] / w1;
    s[7][k] = tr.theta[k] - w1 * tr.t[k];
  }
  return s;
}

struct SettledTrace {
  SimTrace trace;
  std::size_t settle_index;
};

// `period_s` defaults to one fundamental period; with injection pass the common
// period of the injected tones.
inline SettledTrace run_to_steady_state(const SimConfig& cfg, double period_s = 0.0,
                                        double tol_pu = 1e-6) {
  if (period_s <= 0.0) period_s = 1.0 / cfg.params.f_n_hz;
  SimTrace tr = simulate(cfg);
  if (tr.diverged) throw NumericalError("simulation diverged before settling");
  const auto period = static_cast<std::size_t>(std::llround(period_s / cfg.dt));
  const auto k0 = detect_settling(normalized_states(tr, cfg.params), period, tol_pu);
  if (!k0) throw NumericalError("simulation did not settle within t_end");
  return {std::move(tr), *k0};
}

// ---------------------------------------------------------------------------
// Boundedness (used to cross-check Nyquist verdicts)
// ---------------------------------------------------------------------------
enum class Boundedness { decaying, growing, diverged };

inline const char* to_string(Boundedness b) {
  switch (b) {
  case Boundedness::decaying: return "decaying";
  case Boundedness::growing: return "growing";
  case Boundedness::diverged: return "diverged";
  }
  return "?";
}

// Peak deviation of the load current from its set-point (dq, pu) in the
// first and last fundamental period after an initial disturbance.
struct BoundednessReport {
  Boundedness verdict;
  double early_deviation_pu;
  double late_deviation_pu;
};

inline BoundednessReport assess_boundedness(SimConfig cfg, double offset_pu = 0.01) {
  cfg.injection.reset();
  cfg.initial_offset_pu = offset_pu;
  const SimTrace tr = simulate(cfg);
  if (tr.diverged) return {Boundedness::diverged, 0.0, 0.0};
  const auto& p = cfg.params;
  const OperatingPoint op = solve_operating_point(p);
  const std::size_t per = static_cast<std::size_t>(std::llround(1.0 / (p.f_n_hz * cfg.dt)));
  auto deviation = [&](std::size_t from, std::size_t to) {
    double m = 0.0;
    for (std::size_t k = from; k < to && k < tr.size(); ++k) {
      const cplx i = abc_to_dq(tr.i_load[k], p.omega1() * tr.t[k]);
      m = std::max(m, std::abs(i - op.i_load) / p.i_base_peak());
    }
    return m;
  };
  const double early = deviation(per, 2 * per);
  const double late = deviation(tr.size() - per, tr.size());
  return {late < early ? Boundedness::decaying : Boundedness::growing, early, late};
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------
namespace csv {

inline std::string to_csv(const SimTrace& tr, std::size_t stride = 1) {
  std::string s = "t_s,va,vb,vc,isa,isb,isc,ila,ilb,ilc,theta_pll\n";
  for (std::size_t k = 0; k < tr.size(); k += std::max<std::size_t>(stride, 1)) {
    s += num(tr.t[k]);
    for (const Abc* x : {&tr.v_pcc[k], &tr.i_source[k], &tr.i_load[k]})
      for (double v : *x) s += "," + num(v);
    s += "," + num(tr.theta[k]) + "\n";
  }
  return s;
}

} // namespace csv

} // namespace imptk
