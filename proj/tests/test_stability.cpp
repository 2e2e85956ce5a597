#include <gtest/gtest.h>

#include "imptk/domains.hpp"
#include "imptk/extraction.hpp"
#include "imptk/stability.hpp"
#include "support.hpp"

using namespace imptk;

namespace {

const FrequencyGrid g3 = make_grid(1, 100, 3, GridKind::logarithmic);

Tf2x2 constant(const Mat2& m, Role role, const FrequencyGrid& g = g3) {
  return Tf2x2::generate(g, Domain::dq, role, [&](double) { return m; });
}

EigenLoci circle(cplx center, double radius, int n = 400) {
  std::vector<double> hz(n);
  for (int k = 0; k < n; ++k) hz[k] = 1.0 + k;
  EigenLoci l{FrequencyGrid::from_hz(hz, 50), {}, {}, {}};
  for (int k = 0; k < n; ++k) {
    // half circle through the upper half plane; the mirror closes it
    const double a = std::numbers::pi * k / (n - 1);
    l.lambda1.push_back(center + std::polar(radius, -a));
    l.lambda2.push_back(0.0);
    l.swapped.push_back(false);
  }
  return l;
}

} // namespace

TEST(MinorLoop, IdentityDiagonalAndExpansion) {
  EXPECT_TRUE(minor_loop(constant(Mat2::identity(), Role::impedance),
                         constant(Mat2::identity(), Role::admittance))[0] == Mat2::identity());
  const auto l = minor_loop(constant(Mat2::diag(2.0, 3.0), Role::impedance),
                            constant(Mat2::diag(0.5, 4.0), Role::admittance));
  EXPECT_TRUE(l[0] == Mat2::diag(1.0, 12.0));
  check::RandomMat2 rnd(5);
  const Mat2 zs = rnd(), yl = rnd();
  const Mat2 m = minor_loop(constant(zs, Role::impedance), constant(yl, Role::admittance))[0];
  EXPECT_LT(std::abs(m.a - (zs.a * yl.a + zs.b * yl.c)), 1e-15);
  EXPECT_LT(std::abs(m.b - (zs.a * yl.b + zs.b * yl.d)), 1e-15);
  EXPECT_LT(std::abs(m.c - (zs.c * yl.a + zs.d * yl.c)), 1e-15);
  EXPECT_LT(std::abs(m.d - (zs.c * yl.b + zs.d * yl.d)), 1e-15);
}

TEST(MinorLoop, RejectsDomainMismatch) {
  const Tf2x2 pn(g3, std::vector<Mat2>(3, Mat2::identity()), Domain::pn, Role::admittance);
  EXPECT_THROW(minor_loop(constant(Mat2::identity(), Role::impedance), pn), MismatchError);
}

TEST(MinorLoopDecoupled, ScalarProductAndZeroOffDiagonals) {
  auto s = [](cplx v, const char* lbl) { return Tf1x1(g3, {v, v, v}, lbl); };
  const auto l = minor_loop_decoupled(s(2.0, "zd"), s(3.0, "zq"), s(0.25, "yd"), s(1.0, "yq"),
                                      Domain::dq);
  EXPECT_EQ(l[0].a, cplx(0.5));
  EXPECT_EQ(l[0].d, cplx(3.0));
  EXPECT_EQ(l[0].b, cplx(0.0));
  EXPECT_EQ(l[0].c, cplx(0.0));
  EXPECT_EQ(l.role(), Role::minorloop);
  const Tf1x1 other(make_grid(1, 100, 4, GridKind::logarithmic), {1, 1, 1, 1}, "x");
  EXPECT_THROW(minor_loop_decoupled(s(1, "a"), other, s(1, "b"), s(1, "c"), Domain::dq),
               MismatchError);
}

TEST(Semidecouple, DefinitionAndIdempotence) {
  const Mat2 m{1.0, 2.0, 3.0, 4.0};
  const auto s = semidecouple(constant(m, Role::minorloop));
  EXPECT_TRUE(s[0] == Mat2::diag(1.0, 4.0));
  EXPECT_TRUE(semidecouple(s)[0] == s[0]);
  EXPECT_THROW(semidecouple(constant(m, Role::impedance)), MismatchError);
}

TEST(Eigen, HandCases) {
  const auto d = eig2_closed_form(Mat2::diag(cplx(1, 2), cplx(3, -1)));
  EXPECT_EQ(d[0], cplx(1, 2));
  EXPECT_EQ(d[1], cplx(3, -1));
  const auto s = eig2_closed_form(Mat2{0.0, 1.0, 1.0, 0.0});
  EXPECT_LT(multiset_distance(s, {1.0, -1.0}), 1e-15);
  const auto n = eig2_numeric(Mat2{0.0, 1.0, 1.0, 0.0});
  EXPECT_LT(multiset_distance(n, {1.0, -1.0}), 1e-15);
}

TEST(Eigen, PlusFourDiscriminant) {
  // with the printed minus sign this matrix would give {1+2i, 1-2i}
  const auto e = eig2_closed_form(Mat2{1.0, 2.0, 2.0, 1.0});
  EXPECT_LT(multiset_distance(e, {3.0, -1.0}), 1e-14);
}

TEST(Eigen, ClosedFormMatchesNumericOnRandomMatrices) {
  check::RandomMat2 rnd(2024);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const Mat2 m = rnd();
    worst = std::max(worst, multiset_distance(eig2_closed_form(m), eig2_numeric(m)));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(EigenLociTest, ContinuityPairing) {
  const auto g = make_grid(1, 10, 50, GridKind::linear);
  // eigenvalues cross on the real axis; a solver sorted by real part would swap
  const auto l = Tf2x2::generate(g, Domain::dq, Role::minorloop,
                                 [](double w) { return Mat2::diag(w / two_pi, 11.0 - w / two_pi); });
  std::vector<EigPair> raw;
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto e = eig2_closed_form(l[i]);
    if (e[0].real() > e[1].real()) std::swap(e[0], e[1]);
    raw.push_back(e);
  }
  const auto loci = pair_for_continuity(g, raw);
  for (std::size_t i = 1; i < g.size(); ++i) {
    EXPECT_LT(std::abs(loci.lambda1[i] - loci.lambda1[i - 1]), 0.3);
    EXPECT_LT(std::abs(loci.lambda2[i] - loci.lambda2[i - 1]), 0.3);
  }
  const auto closed = eig_loci_closed_form(l), numeric = eig_loci_numeric(l);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_LT(multiset_distance({closed.lambda1[i], closed.lambda2[i]},
                                {numeric.lambda1[i], numeric.lambda2[i]}),
              1e-10);
}

TEST(Epsilon, ZeroForDecoupled) {
  EXPECT_EQ(epsilon_at(Mat2::diag(1.0, 5.0)), cplx(0.0));
  EXPECT_EQ(epsilon_at(Mat2{1.0, 3.0, 0.0, 5.0}), cplx(0.0));
  const auto e = epsilon_norm(constant(Mat2::diag(2.0, 0.1), Role::minorloop));
  for (cplx x : e.eps) EXPECT_EQ(x, cplx(0.0));
  EXPECT_TRUE(e.violations_hz.empty());
}

TEST(Epsilon, SymmetricHandCase) {
  EXPECT_LT(std::abs(epsilon_at(Mat2{1.0, 0.3, 0.3, 1.0}) - cplx(-0.3)), 1e-15);
}

TEST(Epsilon, ReconstructsExactEigenvalues) {
  check::RandomMat2 rnd(99);
  for (int k = 0; k < 10000; ++k) {
    const Mat2 m = rnd();
    const cplx eps = epsilon_at(m);
    EXPECT_LT(multiset_distance({m.a - eps, m.d + eps}, eig2_closed_form(m)), 1e-12);
  }
}

TEST(Epsilon, VanishesWithCoupling) {
  for (double x : {1e-2, 1e-4, 1e-6}) {
    const Mat2 m{cplx(1, 1), x, x, cplx(-2, 0.5)};
    EXPECT_LT(std::abs(epsilon_at(m)), 2 * x * x);
  }
}

TEST(Epsilon, ThresholdViolations) {
  const auto e = epsilon_norm(constant(Mat2{1.0, 0.5, 0.5, 1.0}, Role::minorloop), 0.1);
  EXPECT_EQ(e.violations_hz.size(), 3u);
  EXPECT_THROW(epsilon_norm(constant(Mat2::identity(), Role::impedance)), MismatchError);
}

TEST(Nyquist, SmallCircleIsStable) {
  const auto v = nyquist_verdict(circle(0.0, 0.5));
  EXPECT_EQ(v.total_encirclements, 0);
  EXPECT_TRUE(v.stable);
  EXPECT_FALSE(v.marginal);
}

TEST(Nyquist, CircleAroundMinusOne) {
  const auto v = nyquist_verdict(circle(-1.0, 2.0));
  EXPECT_EQ(std::abs(v.total_encirclements), 1);
  EXPECT_FALSE(v.stable);
}

TEST(Nyquist, MarginalWithinTolerance) {
  const auto v = nyquist_verdict(circle(-0.5, 0.49));
  EXPECT_TRUE(v.marginal);
  EXPECT_FALSE(nyquist_verdict(circle(-0.5, 0.4)).marginal);
}

TEST(Nyquist, WindingNumberOfClosedCurve) {
  std::vector<cplx> c;
  for (int k = 0; k < 100; ++k) c.push_back(-1.0 + std::polar(0.5, two_pi * k / 100));
  EXPECT_EQ(winding_number(c), 1);
  std::reverse(c.begin(), c.end());
  EXPECT_EQ(winding_number(c), -1);
}

TEST(DomainInvariance, LociAgreeAcrossDomains) {
  SystemParams p;
  p.pll_enabled = true;
  const auto g = make_grid(1, 1000, 80, GridKind::logarithmic);
  const auto dq = analytic_model_set(p, g, Domain::dq);
  const auto pn = analytic_model_set(p, g, Domain::pn);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_LT(multiset_distance({dq.loci_exact.lambda1[i], dq.loci_exact.lambda2[i]},
                                {pn.loci_exact.lambda1[i], pn.loci_exact.lambda2[i]}),
              1e-10);
  EXPECT_EQ(dq.verdict.total_encirclements, pn.verdict.total_encirclements);
}

TEST(MfdImplication, SequenceLoopsCoincide) {
  const SystemParams p;
  const auto g = make_grid(1, 1000, 80, GridKind::logarithmic);
  const auto m = analytic_model_set(p, g, Domain::pn);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Mat2 e = m.loops.exact[i], s = m.loops.semidec[i], d = m.loops.dec[i];
    EXPECT_LT((e - s).max_abs(), 1e-9 * e.max_abs());
    EXPECT_LT((e - d).max_abs(), 1e-9 * e.max_abs());
    EXPECT_EQ(m.epsilon.eps[i], cplx(0.0));
  }
  const auto dq = analytic_model_set(p, g, Domain::dq);
  double dev = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    dev = std::max(dev, (dq.loops.exact[i] - dq.loops.semidec[i]).max_abs());
  EXPECT_GT(dev, 1e-3);
}

TEST(Csv, LociAndEpsilonHeaders) {
  const auto l = constant(Mat2{1.0, 0.5, 0.5, 1.0}, Role::minorloop);
  const std::string a = csv::to_csv(eig_loci_closed_form(l));
  const std::string b = csv::to_csv(epsilon_norm(l));
  EXPECT_EQ(a.substr(0, a.find('\n')), "f_hz,re_l1,im_l1,re_l2,im_l2");
  EXPECT_EQ(b.substr(0, b.find('\n')), "f_hz,re_eps,im_eps,abs_eps,violated");
}
