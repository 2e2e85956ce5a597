#pragma once

// Minimal static SVG line plots. Every plot is written together with a CSV
// holding exactly the plotted series.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "imptk/freqresp.hpp"

namespace imptk::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  // scattered points instead of a polyline
};

struct HLine {
  double y;
  std::string label;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool equal_aspect = false;  // complex-plane plots
  std::vector<Series> series;
  std::vector<HLine> hlines;
  std::vector<std::pair<double, double>> points_of_interest;  // drawn as a cross
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* c[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                            "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};
  return c[i % 8];
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 6.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
    t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
  return t;
}

} // namespace detail

inline std::string render(const Plot& p) {
  const double w = 720, h = 440, ml = 70, mr = 170, mt = 36, mb = 52;
  const double pw = w - ml - mr, ph = h - mt - mb;

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
      if (p.log_x && !(s.x[k] > 0)) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.y[k]);
      y1 = std::max(y1, s.y[k]);
    }
  for (const auto& l : p.hlines) {
    y0 = std::min(y0, l.y);
    y1 = std::max(y1, l.y);
  }
  for (const auto& [px, py] : p.points_of_interest) {
    x0 = std::min(x0, px);
    x1 = std::max(x1, px);
    y0 = std::min(y0, py);
    y1 = std::max(y1, py);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + (p.log_x ? x0 : 1.0);
  if (y1 <= y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  if (p.equal_aspect) {
    const double sx = (x1 - x0) / pw, sy = (y1 - y0) / ph, s = std::max(sx, sy);
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    x0 = cx - 0.5 * s * pw, x1 = cx + 0.5 * s * pw;
    y0 = cy - 0.5 * s * ph, y1 = cy + 0.5 * s * ph;
  }

  auto X = [&](double x) {
    const double u = p.log_x ? (std::log10(x) - std::log10(x0)) / (std::log10(x1) - std::log10(x0))
                             : (x - x0) / (x1 - x0);
    return ml + u * pw;
  };
  auto Y = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  using detail::fmt;

  std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" +
                  fmt(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" +
       detail::escape(p.title) + "</text>\n";

  // grid and ticks
  std::vector<double> xt;
  if (p.log_x) {
    for (int e = static_cast<int>(std::floor(std::log10(x0)));
         e <= static_cast<int>(std::ceil(std::log10(x1))); ++e)
      if (std::pow(10.0, e) >= x0 * (1 - 1e-12) && std::pow(10.0, e) <= x1 * (1 + 1e-12))
        xt.push_back(std::pow(10.0, e));
  } else {
    xt = detail::linear_ticks(x0, x1);
  }
  for (double t : xt) {
    o += "<line x1=\"" + fmt(X(t)) + "\" y1=\"" + fmt(mt) + "\" x2=\"" + fmt(X(t)) + "\" y2=\"" +
         fmt(mt + ph) + "\" stroke=\"#ddd\"/>\n";
    o += "<text x=\"" + fmt(X(t)) + "\" y=\"" + fmt(mt + ph + 15) + "\" text-anchor=\"middle\">" +
         detail::tick_label(t) + "</text>\n";
  }
  for (double t : detail::linear_ticks(y0, y1)) {
    o += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(Y(t)) + "\" x2=\"" + fmt(ml + pw) + "\" y2=\"" +
         fmt(Y(t)) + "\" stroke=\"#ddd\"/>\n";
    o += "<text x=\"" + fmt(ml - 6) + "\" y=\"" + fmt(Y(t) + 4) + "\" text-anchor=\"end\">" +
         detail::tick_label(t) + "</text>\n";
  }
  o += "<rect x=\"" + fmt(ml) + "\" y=\"" + fmt(mt) + "\" width=\"" + fmt(pw) + "\" height=\"" +
       fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  o += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"" + fmt(h - 12) + "\" text-anchor=\"middle\">" +
       detail::escape(p.x_label) + "</text>\n";
  o += "<text transform=\"translate(16," + fmt(mt + ph / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + detail::escape(p.y_label) + "</text>\n";

  o += "<clipPath id=\"area\"><rect x=\"" + fmt(ml) + "\" y=\"" + fmt(mt) + "\" width=\"" +
       fmt(pw) + "\" height=\"" + fmt(ph) + "\"/></clipPath>\n<g clip-path=\"url(#area)\">\n";
  for (const auto& l : p.hlines)
    o += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(Y(l.y)) + "\" x2=\"" + fmt(ml + pw) +
         "\" y2=\"" + fmt(Y(l.y)) + "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
  for (const auto& [px, py] : p.points_of_interest) {
    const double cx = X(px), cy = Y(py);
    o += "<path d=\"M" + fmt(cx - 5) + "," + fmt(cy - 5) + "L" + fmt(cx + 5) + "," + fmt(cy + 5) +
         "M" + fmt(cx - 5) + "," + fmt(cy + 5) + "L" + fmt(cx + 5) + "," + fmt(cy - 5) +
         "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  }
  for (std::size_t i = 0; i < p.series.size(); ++i) {
    const auto& s = p.series[i];
    const char* col = detail::palette(i);
    if (s.markers) {
      for (std::size_t k = 0; k < s.x.size(); ++k) {
        if (!std::isfinite(s.y[k]) || (p.log_x && !(s.x[k] > 0))) continue;
        o += "<circle cx=\"" + fmt(X(s.x[k])) + "\" cy=\"" + fmt(Y(s.y[k])) +
             "\" r=\"2.5\" fill=\"none\" stroke=\"" + col + "\"/>\n";
      }
      continue;
    }
    std::string d;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      if (!std::isfinite(s.y[k]) || (p.log_x && !(s.x[k] > 0))) continue;
      d += (d.empty() ? "M" : "L") + fmt(X(s.x[k])) + "," + fmt(Y(s.y[k]));
    }
    o += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + col + "\" stroke-width=\"1.3\"/>\n";
  }
  o += "</g>\n";

  // legend
  for (std::size_t i = 0; i < p.series.size(); ++i) {
    const double ly = mt + 10 + 16 * static_cast<double>(i);
    o += "<line x1=\"" + fmt(ml + pw + 10) + "\" y1=\"" + fmt(ly) + "\" x2=\"" +
         fmt(ml + pw + 30) + "\" y2=\"" + fmt(ly) + "\" stroke=\"" + detail::palette(i) +
         "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + fmt(ml + pw + 35) + "\" y=\"" + fmt(ly + 4) + "\">" +
         detail::escape(p.series[i].name) + "</text>\n";
  }
  for (std::size_t i = 0; i < p.hlines.size(); ++i) {
    const double ly = mt + 10 + 16 * static_cast<double>(p.series.size() + i);
    o += "<line x1=\"" + fmt(ml + pw + 10) + "\" y1=\"" + fmt(ly) + "\" x2=\"" +
         fmt(ml + pw + 30) + "\" y2=\"" + fmt(ly) +
         "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
    o += "<text x=\"" + fmt(ml + pw + 35) + "\" y=\"" + fmt(ly + 4) + "\">" +
         detail::escape(p.hlines[i].label) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

// Wide layout when every series shares the x vector, long layout otherwise.
inline std::string data_csv(const Plot& p) {
  bool shared = !p.series.empty();
  for (const auto& s : p.series) shared = shared && s.x == p.series.front().x;
  std::string o;
  if (shared) {
    o = p.x_label;
    for (const auto& s : p.series) o += "," + s.name;
    o += "\n";
    const auto& x = p.series.front().x;
    for (std::size_t k = 0; k < x.size(); ++k) {
      o += csv::num(x[k]);
      for (const auto& s : p.series) o += "," + csv::num(s.y[k]);
      o += "\n";
    }
  } else {
    o = "series,x,y\n";
    for (const auto& s : p.series)
      for (std::size_t k = 0; k < s.x.size(); ++k)
        o += s.name + "," + csv::num(s.x[k]) + "," + csv::num(s.y[k]) + "\n";
  }
  return o;
}

}  // namespace imptk::svg
