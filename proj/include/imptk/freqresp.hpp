#pragma once

// Complex frequency-response containers and pointwise 2x2 algebra.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "imptk/errors.hpp"

namespace imptk {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Mat2: a plain 2x2 complex matrix, row major [[a, b], [c, d]].
// ---------------------------------------------------------------------------
struct Mat2 {
  cplx a{}, b{}, c{}, d{};

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static constexpr Mat2 diag(cplx x, cplx y) { return {x, 0.0, 0.0, y}; }

  cplx trace() const { return a + d; }
  cplx det() const { return a * d - b * c; }
  double max_abs() const {
    return std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
  }
  bool finite() const {
    auto ok = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
    return ok(a) && ok(b) && ok(c) && ok(d);
  }
  Mat2 conj_transpose() const {
    return {std::conj(a), std::conj(c), std::conj(b), std::conj(d)};
  }

  cplx operator()(int row, int col) const {
    return row == 0 ? (col == 0 ? a : b) : (col == 0 ? c : d);
  }

  friend Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
            x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
  }
  friend Mat2 operator+(const Mat2& x, const Mat2& y) {
    return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d};
  }
  friend Mat2 operator-(const Mat2& x, const Mat2& y) {
    return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d};
  }
  friend Mat2 operator*(cplx s, const Mat2& x) { return {s * x.a, s * x.b, s * x.c, s * x.d}; }
  friend bool operator==(const Mat2&, const Mat2&) = default;
};

// |det| < 1e-12 * (max |entry|)^2 is treated as singular.
inline bool is_singular(const Mat2& m) {
  const double scale = m.max_abs();
  return scale == 0.0 || std::abs(m.det()) < 1e-12 * scale * scale;
}

// Pointwise inverse; the caller checks is_singular first.
inline Mat2 inverse(const Mat2& m) {
  const cplx inv_det = 1.0 / m.det();
  return {m.d * inv_det, -m.b * inv_det, -m.c * inv_det, m.a * inv_det};
}

// Solve m x = v for a 2-vector.
inline std::pair<cplx, cplx> solve(const Mat2& m, std::pair<cplx, cplx> v) {
  const Mat2 inv = inverse(m);
  return {inv.a * v.first + inv.b * v.second, inv.c * v.first + inv.d * v.second};
}

// 2-norm condition number sigma_max / sigma_min.
inline double condition_number(const Mat2& m) {
  // Singular values are sqrt of eigenvalues of M^H M (Hermitian, real spectrum).
  const Mat2 g = m.conj_transpose() * m;
  const double tr = g.a.real() + g.d.real();
  const double det = std::abs(m.det()) * std::abs(m.det());
  const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
  const double smax2 = tr / 2.0 + disc;
  const double smin2 = det / smax2;
  if (smin2 <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(smax2 / smin2);
}

// ---------------------------------------------------------------------------
// FrequencyGrid
// ---------------------------------------------------------------------------
enum class GridKind { linear, logarithmic, explicit_points };

class FrequencyGrid {
public:
  FrequencyGrid() = default;

  // points in rad/s, fundamental in rad/s.
  FrequencyGrid(std::vector<double> points, GridKind kind, double fundamental)
      : points_(std::move(points)), kind_(kind), fundamental_(fundamental) {
    if (!(fundamental_ > 0.0) || !std::isfinite(fundamental_))
      throw ConfigError("grid fundamental must be positive and finite");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i]))
        throw ConfigError("grid point " + std::to_string(i) + " is not finite");
      if (i > 0 && !(points_[i] > points_[i - 1]))
        throw ConfigError("grid points must be strictly increasing");
    }
  }

  static FrequencyGrid from_hz(const std::vector<double>& hz, double f1_hz,
                               GridKind kind = GridKind::explicit_points) {
    std::vector<double> w(hz.size());
    std::transform(hz.begin(), hz.end(), w.begin(), [](double f) { return two_pi * f; });
    return {std::move(w), kind, two_pi * f1_hz};
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double omega(std::size_t i) const { return points_[i]; }
  double hz(std::size_t i) const { return points_[i] / two_pi; }
  const std::vector<double>& points() const { return points_; }
  std::vector<double> points_hz() const {
    std::vector<double> out(points_.size());
    std::transform(points_.begin(), points_.end(), out.begin(),
                   [](double w) { return w / two_pi; });
    return out;
  }
  GridKind kind() const { return kind_; }
  double fundamental() const { return fundamental_; }
  double fundamental_hz() const { return fundamental_ / two_pi; }

  // Exact comparison: no tolerance, no interpolation.
  friend bool operator==(const FrequencyGrid& x, const FrequencyGrid& y) {
    return x.points_ == y.points_ && x.fundamental_ == y.fundamental_;
  }

private:
  std::vector<double> points_;
  GridKind kind_ = GridKind::explicit_points;
  double fundamental_ = two_pi * 50.0;
};

inline FrequencyGrid make_grid(double f_min_hz, double f_max_hz, std::size_t n, GridKind kind,
                               double f1_hz = 50.0) {
  if (!(f_min_hz > 0.0) || !(f_max_hz > 0.0))
    throw ConfigError("grid bounds must be positive");
  if (!(f_min_hz < f_max_hz)) throw ConfigError("grid requires f_min < f_max");
  if (n < 2) throw ConfigError("grid requires at least 2 points");
  std::vector<double> hz(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    if (kind == GridKind::logarithmic)
      hz[i] = f_min_hz * std::pow(f_max_hz / f_min_hz, u);
    else
      hz[i] = f_min_hz + (f_max_hz - f_min_hz) * u;
  }
  hz.front() = f_min_hz;
  hz.back() = f_max_hz;
  return FrequencyGrid::from_hz(hz, f1_hz, kind);
}

// ---------------------------------------------------------------------------
// Tagged responses
// ---------------------------------------------------------------------------
enum class Domain { dq, pn };
enum class Role { impedance, admittance, minorloop };

inline const char* to_string(Domain d) { return d == Domain::dq ? "dq" : "pn"; }
inline const char* to_string(Role r) {
  switch (r) {
  case Role::impedance: return "impedance";
  case Role::admittance: return "admittance";
  case Role::minorloop: return "minorloop";
  }
  return "?";
}

class Tf2x2 {
public:
  Tf2x2(FrequencyGrid grid, std::vector<Mat2> values, Domain domain, Role role)
      : grid_(std::move(grid)), values_(std::move(values)), domain_(domain), role_(role) {
    if (values_.size() != grid_.size())
      throw MismatchError("Tf2x2: " + std::to_string(values_.size()) + " values for " +
                          std::to_string(grid_.size()) + " grid points");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!values_[i].finite())
        throw NumericalError("Tf2x2: non-finite entry at " + std::to_string(grid_.hz(i)) + " Hz");
  }

  // Evaluate f(omega) -> Mat2 at every grid point.
  template <typename F>
  static Tf2x2 generate(const FrequencyGrid& grid, Domain domain, Role role, F&& f) {
    std::vector<Mat2> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.omega(i));
    return {grid, std::move(v), domain, role};
  }

  const FrequencyGrid& grid() const { return grid_; }
  const std::vector<Mat2>& values() const { return values_; }
  const Mat2& operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  Domain domain() const { return domain_; }
  Role role() const { return role_; }

private:
  FrequencyGrid grid_;
  std::vector<Mat2> values_;
  Domain domain_;
  Role role_;
};

class Tf1x1 {
public:
  Tf1x1(FrequencyGrid grid, std::vector<cplx> values, std::string label)
      : grid_(std::move(grid)), values_(std::move(values)), label_(std::move(label)) {
    if (values_.size() != grid_.size())
      throw MismatchError("Tf1x1 '" + label_ + "': value count does not match grid");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!std::isfinite(values_[i].real()) || !std::isfinite(values_[i].imag()))
        throw NumericalError("Tf1x1 '" + label_ + "': non-finite value at " +
                             std::to_string(grid_.hz(i)) + " Hz");
  }

  const FrequencyGrid& grid() const { return grid_; }
  const std::vector<cplx>& values() const { return values_; }
  cplx operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  const std::string& label() const { return label_; }

private:
  FrequencyGrid grid_;
  std::vector<cplx> values_;
  std::string label_;
};

inline Tf2x2 invert(const Tf2x2& m) {
  std::vector<Mat2> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (is_singular(m[i])) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "singular 2x2 matrix at %.6g Hz", m.grid().hz(i));
      throw NumericalError(buf);
    }
    out[i] = inverse(m[i]);
  }
  Role role = m.role();
  if (role == Role::impedance)
    role = Role::admittance;
  else if (role == Role::admittance)
    role = Role::impedance;
  return {m.grid(), std::move(out), m.domain(), role};
}

inline void require_compatible(const Tf2x2& x, const Tf2x2& y, const char* what) {
  if (!(x.grid() == y.grid())) throw MismatchError(std::string(what) + ": grid mismatch");
  if (x.domain() != y.domain()) throw MismatchError(std::string(what) + ": domain mismatch");
}

inline Tf2x2 matmul(const Tf2x2& x, const Tf2x2& y) {
  require_compatible(x, y, "matmul");
  std::vector<Mat2> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const bool loop = (x.role() == Role::impedance && y.role() == Role::admittance) ||
                    (x.role() == Role::admittance && y.role() == Role::impedance) ||
                    x.role() == Role::minorloop || y.role() == Role::minorloop;
  return {x.grid(), std::move(out), x.domain(), loop ? Role::minorloop : x.role()};
}

// Entry (row, col) as a scalar response.
inline Tf1x1 element(const Tf2x2& m, int row, int col, std::string label) {
  std::vector<cplx> v(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) v[i] = m[i](row, col);
  return {m.grid(), std::move(v), std::move(label)};
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------
namespace csv {

// Fixed formatting so repeated runs are byte identical.
inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", x);
  return buf;
}

inline std::string header_2x2() {
  return "f_hz,re_11,im_11,re_12,im_12,re_21,im_21,re_22,im_22";
}

inline std::string row_2x2(double f_hz, const Mat2& m) {
  std::string s = num(f_hz);
  for (cplx z : {m.a, m.b, m.c, m.d}) s += "," + num(z.real()) + "," + num(z.imag());
  return s;
}

inline void write(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

inline std::string to_csv(const Tf2x2& m) {
  std::string s = header_2x2() + "\n";
  for (std::size_t i = 0; i < m.size(); ++i) s += row_2x2(m.grid().hz(i), m[i]) + "\n";
  return s;
}

inline std::string to_csv(const Tf1x1& m) {
  std::string s = "f_hz,re,im\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    s += num(m.grid().hz(i)) + "," + num(m[i].real()) + "," + num(m[i].imag()) + "\n";
  return s;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  return out;
}

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": missing header row");
  t.header = split(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Tf2x2 read_2x2(const std::string& path, double f1_hz, Domain domain, Role role) {
  const Table t = read(path);
  if (t.header.size() < 9 || t.header[0] != "f_hz" || t.header[1] != "re_11")
    throw ConfigError(path + ": not a 2x2 response file");
  std::vector<double> hz;
  std::vector<Mat2> v;
  for (const auto& r : t.rows) {
    hz.push_back(r[0]);
    v.push_back({{r[1], r[2]}, {r[3], r[4]}, {r[5], r[6]}, {r[7], r[8]}});
  }
  return {FrequencyGrid::from_hz(hz, f1_hz), std::move(v), domain, role};
}

} // namespace csv

} // namespace imptk
