#include <gtest/gtest.h>

#include "imptk/config.hpp"
#include "imptk/domains.hpp"
#include "imptk/models_analytic.hpp"
#include "imptk/stability.hpp"
#include "support.hpp"

using namespace imptk;

namespace {

const FrequencyGrid sweep = make_grid(1, 2000, 120, GridKind::logarithmic);

double rel(const Mat2& x, const Mat2& y) { return (x - y).max_abs() / y.max_abs(); }

} // namespace

TEST(SystemParamsTest, TableDefaultsAndBases) {
  const SystemParams p;
  EXPECT_DOUBLE_EQ(p.z_base(), 690.0 * 690.0 / 1e6);
  EXPECT_NEAR(p.i_base_rms(), 1e6 / (std::sqrt(3.0) * 690.0), 1e-9);
  EXPECT_NEAR(p.r_th(), 0.02 * 0.4761, 1e-15);
  EXPECT_NEAR(p.omega1() * p.l_th(), 0.4 * 0.4761, 1e-14);
  EXPECT_NEAR(p.kp_ohm(), 0.255 * 0.4761, 1e-15);
}

TEST(SystemParamsTest, ConfigKeysAndErrors) {
  const auto cfg = Config::parse_string("z_th_pu_re = 0.1\nz_th_pu_im = 0.2\npll_enabled = true\n");
  const auto p = SystemParams::from_config(cfg);
  EXPECT_EQ(p.z_th_pu, cplx(0.1, 0.2));
  EXPECT_TRUE(p.pll_enabled);
  EXPECT_THROW(Config::parse_string("z_th_pu_rex = 1\n"), ConfigError);
  EXPECT_THROW(SystemParams::from_config(Config::parse_string("ti_s = -1\n")), ConfigError);
}

TEST(SystemParamsTest, XrRatioKeepsMagnitude) {
  const auto p = with_xr_ratio(SystemParams{}, 0.1);
  EXPECT_NEAR(std::abs(p.z_th_pu), std::abs(cplx(0.02, 0.4)), 1e-15);
  EXPECT_NEAR(p.z_th_pu.imag() / p.z_th_pu.real(), 0.1, 1e-12);
}

TEST(GridImpedance, OffDiagonalIsFundamentalReactance) {
  const SystemParams p;
  const auto z = to_per_unit(grid_impedance_dq(p, sweep), p.z_base());
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(std::abs(z[i].b), 0.4, 1e-12);
    EXPECT_NEAR(std::abs(z[i].c), 0.4, 1e-12);
  }
}

TEST(GridImpedance, DcLimitAndResistiveGrid) {
  SystemParams p;
  EXPECT_NEAR(std::abs(grid_impedance_dq_at(p, 1e-9).a - p.r_th()), 0.0, 1e-12);
  p.z_th_pu = {0.02, 0.0};
  const Mat2 z = grid_impedance_dq_at(p, two_pi * 300);
  EXPECT_TRUE(z == Mat2::diag(p.r_th(), p.r_th()));
}

TEST(GridImpedance, PassiveHermitianPart) {
  const SystemParams p;
  const auto z = grid_impedance_dq(p, sweep);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Mat2 h = cplx(0.5) * (z[i] + z[i].conj_transpose());
    const auto ev = eig2_numeric(h);
    EXPECT_GT(ev[0].real(), 0.0);
    EXPECT_GT(ev[1].real(), 0.0);
  }
}

TEST(GridImpedance, RejectsWrongFundamental) {
  EXPECT_THROW(grid_impedance_dq(SystemParams{}, make_grid(1, 10, 3, GridKind::linear, 60)),
               ConfigError);
}

TEST(OperatingPointTest, NoLoad) {
  SystemParams p;
  p.id_ref_pu = 0;
  p.iq_ref_pu = 0;
  const auto op = solve_operating_point(p);
  EXPECT_EQ(op.i_load, cplx(0));
  EXPECT_NEAR(std::abs(op.v_pcc - p.v_base_peak()), 0.0, 1e-9);
}

TEST(OperatingPointTest, RatedCurrentPhasorArithmetic) {
  const SystemParams p;
  const auto op = solve_operating_point(p);
  const cplx zth{p.r_th(), p.omega1() * p.l_th()};
  EXPECT_NEAR(std::abs(op.v_pcc - (op.e_th - zth * op.i_load)), 0.0, 1e-9);
  EXPECT_NEAR(std::abs(op.e_th), p.v_base_peak(), 1e-9);
  EXPECT_NEAR(std::abs(op.i_load), p.i_base_peak(), 1e-9);
  EXPECT_EQ(op.v_pcc.imag(), 0.0);
  EXPECT_LT(op.residual_pu, 1e-9);
  EXPECT_LT(operating_point_residual(p, op), 1e-9);
}

TEST(OperatingPointTest, UnreachableSetPoint) {
  SystemParams p;
  p.iq_ref_pu = 3.0;  // PCC voltage collapses
  EXPECT_THROW(solve_operating_point(p), NumericalError);
}

TEST(VscImpedance, MfdStructure) {
  const SystemParams p;
  const auto op = solve_operating_point(p);
  const auto z = vsc_impedance_dq(p, op, sweep, false);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double scale = std::abs(z[i].a);
    EXPECT_LE(std::abs(z[i].a - z[i].d), 1e-9 * scale);
    EXPECT_LE(std::abs(z[i].b + z[i].c), 1e-9 * scale);
  }
  const auto pn = dq_to_pn(z);
  for (std::size_t i = 0; i < pn.size(); ++i)
    EXPECT_LE(std::max(std::abs(pn[i].b), std::abs(pn[i].c)),
              1e-9 * std::max(std::abs(pn[i].a), std::abs(pn[i].d)));
}

TEST(VscImpedance, HandEvaluationWithoutPll) {
  const SystemParams p;
  const auto op = solve_operating_point(p);
  const double w = two_pi * 37.0, w1 = p.omega1();
  const cplx s{0, w};
  const cplx gc = p.kp_ohm() * (1.0 + 1.0 / (p.ti_s * s)) / (1.0 + p.t_d_s * s);
  const cplx diag = p.r_s() + s * p.l_s() + gc;
  const Mat2 ref{diag, -w1 * p.l_s(), w1 * p.l_s(), diag};
  EXPECT_LT(rel(vsc_impedance_dq_at(p, op, w, false), ref), 1e-14);
}

TEST(VscImpedance, PllAltersQAxisAndCoupling) {
  const SystemParams p;
  const auto op = solve_operating_point(p);
  const auto g = make_grid(1, 20, 10, GridKind::logarithmic);
  const auto mfd = vsc_impedance_dq(p, op, g, false);
  const auto mfc = vsc_impedance_dq(p, op, g, true);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_GT(std::abs(mfc[i].d - mfd[i].d), 1e-3 * std::abs(mfd[i].d));
    // admittance column d is untouched by the PLL path
    const Mat2 y0 = inverse(mfd[i]), y1 = inverse(mfc[i]);
    EXPECT_LT(std::abs(y1.a - y0.a), 1e-9 * std::abs(y0.a));
    EXPECT_LT(std::abs(y1.c - y0.c), 1e-9 * std::abs(y0.a));
  }
}

TEST(VscImpedance, PllDisappearsWithoutLoadAndFilterDrop) {
  SystemParams p;
  p.id_ref_pu = 0;
  p.iq_ref_pu = 0;
  const auto op = solve_operating_point(p);
  // Vc0 = V on the d axis only: the PLL affects the q row alone
  const Mat2 z0 = vsc_impedance_dq_at(p, op, two_pi * 15, false);
  const Mat2 z1 = vsc_impedance_dq_at(p, op, two_pi * 15, true);
  EXPECT_LT(std::abs(z1.a - z0.a), 1e-12 * std::abs(z0.a));
  EXPECT_LT(std::abs(z1.b - z0.b), 1e-12 * std::abs(z0.a));
  EXPECT_GT(std::abs(z1.d - z0.d), 1e-3 * std::abs(z0.d));
}

TEST(PerUnit, RoundTrip) {
  const SystemParams p;
  const auto z = grid_impedance_dq(p, sweep);
  const auto back = to_si(to_per_unit(z, p.z_base()), p.z_base());
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_LT(rel(back[i], z[i]), 1e-12);
  const auto y = invert(z);
  const auto yb = to_si(to_per_unit(y, p.z_base()), p.z_base());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_LT(rel(yb[i], y[i]), 1e-12);
}

TEST(DiagonalDominance, Boundary) {
  const auto g = FrequencyGrid::from_hz({1e-6, 50.0, 500.0}, 50.0);
  const auto strong = diagonal_dominance(SystemParams{}, g);
  EXPECT_FALSE(strong[0]);
  EXPECT_TRUE(strong[1]);
  EXPECT_TRUE(strong[2]);
  const auto weak = diagonal_dominance(with_xr_ratio(SystemParams{}, 0.1), sweep);
  for (bool b : weak) EXPECT_TRUE(b);
}
