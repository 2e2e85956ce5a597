#include <gtest/gtest.h>

#include <filesystem>

#include "imptk/freqresp.hpp"
#include "support.hpp"

using namespace imptk;

namespace {

Tf2x2 constant(const FrequencyGrid& g, const Mat2& m, Role role = Role::impedance) {
  return Tf2x2::generate(g, Domain::dq, role, [&](double) { return m; });
}

void expect_mat_near(const Mat2& x, const Mat2& y, double tol) {
  EXPECT_LT((x - y).max_abs(), tol) << "entries differ";
}

} // namespace

TEST(MakeGrid, LinearSpacing) {
  const auto g = make_grid(10, 1000, 3, GridKind::linear);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_DOUBLE_EQ(g.omega(0), two_pi * 10);
  EXPECT_NEAR(g.omega(1), two_pi * 505, 1e-9);
  EXPECT_DOUBLE_EQ(g.omega(2), two_pi * 1000);
}

TEST(MakeGrid, DecadeSpacing) {
  const auto g = make_grid(1, 100, 3, GridKind::logarithmic);
  EXPECT_DOUBLE_EQ(g.omega(0), two_pi * 1);
  EXPECT_NEAR(g.omega(1), two_pi * 10, 1e-9);
  EXPECT_DOUBLE_EQ(g.omega(2), two_pi * 100);
}

TEST(MakeGrid, RejectsBadInput) {
  EXPECT_THROW(make_grid(100, 10, 5, GridKind::linear), ConfigError);
  EXPECT_THROW(make_grid(0, 10, 5, GridKind::linear), ConfigError);
  EXPECT_THROW(make_grid(-1, 10, 5, GridKind::logarithmic), ConfigError);
  EXPECT_THROW(make_grid(1, 10, 1, GridKind::linear), ConfigError);
}

TEST(FrequencyGridType, InvariantsEnforced) {
  EXPECT_THROW(FrequencyGrid({1.0, 1.0}, GridKind::explicit_points, 314.0), ConfigError);
  EXPECT_THROW(FrequencyGrid({2.0, 1.0}, GridKind::explicit_points, 314.0), ConfigError);
  EXPECT_THROW(FrequencyGrid({1.0, NAN}, GridKind::explicit_points, 314.0), ConfigError);
  EXPECT_THROW(FrequencyGrid({1.0, 2.0}, GridKind::explicit_points, 0.0), ConfigError);
}

TEST(FrequencyGridType, ExactEquality) {
  const auto a = make_grid(1, 100, 5, GridKind::logarithmic);
  auto pts = a.points();
  pts[2] = std::nextafter(pts[2], 1e9);
  const FrequencyGrid b(pts, GridKind::logarithmic, a.fundamental());
  EXPECT_TRUE(a == make_grid(1, 100, 5, GridKind::logarithmic));
  EXPECT_FALSE(a == b);
}

TEST(Invert, Identity) {
  const auto g = make_grid(1, 100, 4, GridKind::logarithmic);
  const auto y = invert(constant(g, Mat2::identity()));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_TRUE(y[i] == Mat2::identity());
  EXPECT_EQ(y.role(), Role::admittance);
}

TEST(Invert, Diagonal) {
  const auto g = make_grid(1, 100, 4, GridKind::logarithmic);
  const auto y = invert(constant(g, Mat2::diag(2.0, 4.0)));
  for (std::size_t i = 0; i < g.size(); ++i) expect_mat_near(y[i], Mat2::diag(0.5, 0.25), 1e-15);
}

TEST(Invert, SingularPointNamesFrequency) {
  const auto g = make_grid(10, 30, 3, GridKind::linear);
  const auto m = Tf2x2::generate(g, Domain::dq, Role::impedance, [](double w) {
    if (std::abs(w - two_pi * 20) < 1e-9) return Mat2{1.0, 2.0, 2.0, 4.0};
    return Mat2::identity();
  });
  try {
    invert(m);
    FAIL() << "expected singularity error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("20 Hz"), std::string::npos) << e.what();
  }
}

TEST(Invert, ScaleInvariantThreshold) {
  EXPECT_FALSE(is_singular(Mat2{1e-8, 0.0, 0.0, 1e-8}));
  EXPECT_TRUE(is_singular(Mat2{1e8, 1e8, 1e8, 1e8 * (1 + 1e-14)}));
}

TEST(Matmul, IdentityAndDiagonal) {
  const auto g = make_grid(1, 100, 3, GridKind::logarithmic);
  check::RandomMat2 rnd(7);
  const Mat2 a = rnd();
  const auto p = matmul(constant(g, a), constant(g, Mat2::identity(), Role::admittance));
  EXPECT_TRUE(p[1] == a);
  EXPECT_EQ(p.role(), Role::minorloop);
  const auto d = matmul(constant(g, Mat2::diag(2.0, 3.0)), constant(g, Mat2::diag(5.0, 7.0)));
  EXPECT_TRUE(d[0] == Mat2::diag(10.0, 21.0));
}

TEST(Matmul, HandProduct) {
  const Mat2 x{1.0, 1.0, 0.0, 1.0}, y{1.0, 0.0, 1.0, 1.0};
  EXPECT_TRUE(x * y == (Mat2{2.0, 1.0, 1.0, 1.0}));
}

TEST(Matmul, RejectsMismatch) {
  const auto g1 = make_grid(1, 100, 3, GridKind::logarithmic);
  const auto g2 = make_grid(1, 100, 4, GridKind::logarithmic);
  EXPECT_THROW(matmul(constant(g1, Mat2::identity()), constant(g2, Mat2::identity())),
               MismatchError);
  const Tf2x2 pn(g1, std::vector<Mat2>(3, Mat2::identity()), Domain::pn, Role::admittance);
  EXPECT_THROW(matmul(constant(g1, Mat2::identity()), pn), MismatchError);
}

TEST(Properties, DoubleInverseAndProduct) {
  check::RandomMat2 rnd(11);
  const auto g = make_grid(1, 1000, 200, GridKind::logarithmic);
  std::vector<Mat2> v(g.size());
  for (auto& m : v) {
    do m = rnd();
    while (condition_number(m) > 1e3);
  }
  const Tf2x2 z(g, v, Domain::dq, Role::impedance);
  const Tf2x2 z_copy = z;
  const auto zz = invert(invert(z));
  const auto id = matmul(z, invert(z));
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_LT((zz[i] - z[i]).max_abs() / z[i].max_abs(), 1e-10);
    EXPECT_LT((id[i] - Mat2::identity()).max_abs(), 1e-10);
    EXPECT_TRUE(z[i] == z_copy[i]);
  }
  EXPECT_EQ(zz.role(), Role::impedance);
}

TEST(TfTypes, RejectNonFinite) {
  const auto g = make_grid(1, 10, 2, GridKind::linear);
  EXPECT_THROW(Tf2x2(g, {Mat2::identity(), Mat2{NAN, 0, 0, 1}}, Domain::dq, Role::impedance),
               NumericalError);
  EXPECT_THROW(Tf2x2(g, {Mat2::identity()}, Domain::dq, Role::impedance), MismatchError);
  EXPECT_THROW(Tf1x1(g, {1.0, cplx(INFINITY, 0)}, "x"), NumericalError);
}

TEST(Csv, HeaderAndRoundTrip) {
  const auto g = make_grid(1, 100, 5, GridKind::logarithmic);
  check::RandomMat2 rnd(3);
  std::vector<Mat2> v(g.size());
  for (auto& m : v) m = rnd();
  const Tf2x2 z(g, v, Domain::pn, Role::impedance);
  const std::string text = csv::to_csv(z);
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "f_hz,re_11,im_11,re_12,im_12,re_21,im_21,re_22,im_22");
  const auto path = (std::filesystem::temp_directory_path() / "imptk_fr_roundtrip.csv").string();
  csv::write(path, text);
  const auto back = csv::read_2x2(path, 50.0, Domain::pn, Role::impedance);
  ASSERT_EQ(back.size(), z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_LT((back[i] - z[i]).max_abs(), 1e-11);
    EXPECT_NEAR(back.grid().hz(i), g.hz(i), 1e-9 * g.hz(i));
  }
  const Tf1x1 s(g, std::vector<cplx>(g.size(), cplx(1, 2)), "s");
  const std::string t1 = csv::to_csv(s);
  EXPECT_EQ(t1.substr(0, t1.find('\n')), "f_hz,re,im");
  std::filesystem::remove(path);
}
