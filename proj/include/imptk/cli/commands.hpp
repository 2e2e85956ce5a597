#pragma once

// Command implementations behind tools/imptk. Each command writes CSVs,
// sibling SVG views and one manifest.json into its output directory.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "imptk/cli/svg.hpp"
#include "imptk/config.hpp"
#include "imptk/domains.hpp"
#include "imptk/extraction.hpp"
#include "imptk/models_analytic.hpp"
#include "imptk/stability.hpp"
#include "imptk/timesim.hpp"

#ifndef IMPTK_VERSION
#define IMPTK_VERSION "0.0.0"
#endif

namespace imptk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_numerical = 2, exit_marginal = 3 };

// ---------------------------------------------------------------------------
// Options
// ---------------------------------------------------------------------------
enum class DomainSel { dq, pn, both };

inline DomainSel parse_domain(const std::string& s) {
  if (s == "dq") return DomainSel::dq;
  if (s == "pn") return DomainSel::pn;
  if (s == "both") return DomainSel::both;
  throw ConfigError("--domain must be dq, pn or both, got '" + s + "'");
}

inline std::vector<Domain> domains_of(DomainSel d) {
  if (d == DomainSel::dq) return {Domain::dq};
  if (d == DomainSel::pn) return {Domain::pn};
  return {Domain::dq, Domain::pn};
}

inline const char* to_string(DomainSel d) {
  return d == DomainSel::dq ? "dq" : d == DomainSel::pn ? "pn" : "both";
}

inline constexpr const char* default_grid = "1:2000:200:log";

// fmin:fmax:n:log|lin
inline FrequencyGrid parse_grid(const std::string& spec, double f1_hz) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 4) throw ConfigError("--grid expects fmin:fmax:n:log|lin, got '" + spec + "'");
  double fmin = 0, fmax = 0;
  long n = 0;
  try {
    std::size_t used = 0;
    fmin = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("");
    fmax = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("");
    n = std::stol(parts[2], &used);
    if (used != parts[2].size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw ConfigError("--grid: cannot parse numbers in '" + spec + "'");
  }
  if (n < 2) throw ConfigError("--grid: n must be at least 2");
  GridKind kind;
  if (parts[3] == "log")
    kind = GridKind::logarithmic;
  else if (parts[3] == "lin")
    kind = GridKind::linear;
  else
    throw ConfigError("--grid: spacing must be log or lin, got '" + parts[3] + "'");
  return make_grid(fmin, fmax, static_cast<std::size_t>(n), kind, f1_hz);
}

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  DomainSel domain = DomainSel::both;
  std::string grid = default_grid;
  unsigned threads = 1;
  std::vector<std::string> argv;  // recorded in the manifest
};

struct ExtractOptions {
  std::string model = "matrix";        // matrix | dec
  std::vector<std::string> injections;  // empty: both kinds of each domain
  double amplitude_pu = default_injection_pu;
  double window_s = default_window_s;
};

struct StabilityOptions {
  std::string source = "analytic";  // analytic | extracted
  double eps_threshold = default_epsilon_threshold;
  double amplitude_pu = default_injection_pu;
  double window_s = default_window_s;
};

struct CompareOptions {
  std::string dir_a;
  std::string dir_b;
};

struct SimulateOptions {
  std::size_t stride = 10;
  double offset_pu = 0.0;
};

// ---------------------------------------------------------------------------
// Output directory and manifest
// ---------------------------------------------------------------------------
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct LoadedConfig {
  std::string path;
  std::string text;
  Config cfg;
  SimConfig sim;
};

inline LoadedConfig load_config(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required for this command");
  LoadedConfig c{path, read_file(path), Config::load(path), {}};
  c.sim = SimConfig::from_config(c.cfg);
  c.sim.validate();
  return c;
}

class OutputDir {
public:
  explicit OutputDir(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir_ + ": " + ec.message());
  }

  const std::string& path() const { return dir_; }

  void write(const std::string& name, const std::string& content) {
    csv::write((fs::path(dir_) / name).string(), content);
    files_.insert(name);
  }

  void plot(const std::string& stem, const svg::Plot& p) {
    write(stem + ".csv", svg::data_csv(p));
    write(stem + ".svg", svg::render(p));
  }

  // Exactly one manifest per directory; rewritten on every run.
  void manifest(const std::string& command, const Options& o, const LoadedConfig* cfg,
                json extra) {
    json m;
    m["tool"] = "imptk";
    m["version"] = IMPTK_VERSION;
    m["command"] = command;
    m["argv"] = o.argv;
    m["domain"] = to_string(o.domain);
    m["threads"] = o.threads;
    if (cfg) {
      json snap = json::object();
      for (const auto& [k, e] : cfg->cfg.entries()) snap[k] = e.value;
      m["config"] = {{"path", cfg->path}, {"fnv1a64", hex64(fnv1a(cfg->text))}, {"values", snap}};
    }
    m["outputs"] = json(std::vector<std::string>(files_.begin(), files_.end()));
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["timestamp"] = ts;
    for (auto& [k, v] : extra.items()) m[k] = v;
    csv::write((fs::path(dir_) / "manifest.json").string(), m.dump(2) + "\n");
  }

private:
  std::string dir_;
  std::set<std::string> files_;
};

inline json grid_json(const FrequencyGrid& g) {
  return {{"f1_hz", g.fundamental_hz()}, {"points_hz", g.points_hz()}};
}

// ---------------------------------------------------------------------------
// Plot builders
// ---------------------------------------------------------------------------
namespace detail {

inline std::array<std::string, 4> element_names(Domain d) {
  if (d == Domain::dq) return {"dd", "dq", "qd", "qq"};
  return {"pp", "pn", "np", "nn"};
}

inline cplx element(const Mat2& m, int k) {
  return k == 0 ? m.a : k == 1 ? m.b : k == 2 ? m.c : m.d;
}

inline double angle_deg(cplx z) { return std::arg(z) * 180.0 / std::numbers::pi; }

// Magnitude (pu) or angle (deg) of every element; `overlay` adds markers.
inline svg::Plot bode_panel(const std::string& title, const std::string& sym, const Tf2x2& z,
                            bool magnitude, const Tf2x2* overlay = nullptr) {
  svg::Plot p;
  p.title = title;
  p.x_label = "f_hz";
  p.y_label = magnitude ? "magnitude (pu)" : "angle (deg)";
  p.log_x = true;
  const auto names = element_names(z.domain());
  const auto hz = z.grid().points_hz();
  for (int k = 0; k < 4; ++k) {
    for (const Tf2x2* src : {&z, overlay}) {
      if (!src) continue;
      svg::Series s;
      const std::string tag = src == overlay ? "_extracted" : (overlay ? "_analytic" : "");
      s.name = (magnitude ? "abs_" : "arg_") + sym + "_" + names[k] + tag;
      s.x = hz;
      s.markers = src == overlay;
      for (std::size_t i = 0; i < src->size(); ++i) {
        const cplx v = element((*src)[i], k);
        s.y.push_back(magnitude ? std::abs(v) : angle_deg(v));
      }
      p.series.push_back(std::move(s));
    }
  }
  return p;
}

inline svg::Plot channel_panel(const std::string& title, const std::vector<const Tf1x1*>& ch,
                               const std::vector<std::string>& names,
                               const std::vector<bool>& markers, double z_base, bool magnitude) {
  svg::Plot p;
  p.title = title;
  p.x_label = "f_hz";
  p.y_label = magnitude ? "magnitude (pu)" : "angle (deg)";
  p.log_x = true;
  for (std::size_t c = 0; c < ch.size(); ++c) {
    svg::Series s;
    s.name = (magnitude ? "abs_" : "arg_") + names[c];
    s.x = ch[c]->grid().points_hz();
    s.markers = markers[c];
    for (cplx v : ch[c]->values()) s.y.push_back(magnitude ? std::abs(v) / z_base : angle_deg(v));
    p.series.push_back(std::move(s));
  }
  return p;
}

inline const char* variant_name(int v) { return v == 0 ? "exact" : v == 1 ? "semidec" : "dec"; }

inline const EigenLoci& variant_loci(const ModelSet& m, int v) {
  return v == 0 ? m.loci_exact : v == 1 ? m.loci_semidec : m.loci_dec;
}

inline const Tf2x2& variant_loop(const ModelSet& m, int v) {
  return v == 0 ? m.loops.exact : v == 1 ? m.loops.semidec : m.loops.dec;
}

inline svg::Plot loci_magnitude_panel(const ModelSet& m) {
  svg::Plot p;
  p.title = std::string("eigenvalue loci magnitude, ") + imptk::to_string(m.domain);
  p.x_label = "f_hz";
  p.y_label = "abs(lambda)";
  p.log_x = true;
  for (int v = 0; v < 3; ++v) {
    const auto& l = variant_loci(m, v);
    for (int b = 0; b < 2; ++b) {
      svg::Series s;
      s.name = std::string(variant_name(v)) + "_l" + std::to_string(b + 1);
      s.x = l.grid.points_hz();
      for (cplx z : b == 0 ? l.lambda1 : l.lambda2) s.y.push_back(std::abs(z));
      p.series.push_back(std::move(s));
    }
  }
  return p;
}

inline svg::Plot nyquist_panel(const ModelSet& m) {
  svg::Plot p;
  p.title = std::string("Nyquist, positive frequencies, ") + imptk::to_string(m.domain);
  p.x_label = "real";
  p.y_label = "imag";
  p.equal_aspect = true;
  p.points_of_interest.push_back({-1.0, 0.0});
  for (int v = 0; v < 3; ++v) {
    const auto& l = variant_loci(m, v);
    for (int b = 0; b < 2; ++b) {
      svg::Series s;
      s.name = std::string(variant_name(v)) + "_l" + std::to_string(b + 1);
      for (cplx z : b == 0 ? l.lambda1 : l.lambda2) {
        s.x.push_back(z.real());
        s.y.push_back(z.imag());
      }
      p.series.push_back(std::move(s));
    }
  }
  return p;
}

inline svg::Plot epsilon_panel(const std::vector<const EpsilonNorm*>& eps, double threshold) {
  svg::Plot p;
  p.title = "decoupling norm";
  p.x_label = "f_hz";
  p.y_label = "abs(eps)";
  p.log_x = true;
  for (const auto* e : eps) {
    svg::Series s;
    s.name = std::string("abs_eps_") + imptk::to_string(e->domain);
    s.x = e->grid.points_hz();
    for (cplx z : e->eps) s.y.push_back(std::abs(z));
    p.series.push_back(std::move(s));
  }
  char lbl[48];
  std::snprintf(lbl, sizeof lbl, "threshold %g", threshold);
  p.hlines.push_back({threshold, lbl});
  return p;
}

inline std::string verdict_row(Domain d, int v, const NyquistVerdict& n) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%s,%d,%s,%s,%s", imptk::to_string(d), variant_name(v),
                n.total_encirclements, csv::num(n.min_distance).c_str(), n.marginal ? "1" : "0",
                n.marginal ? "withheld" : (n.stable ? "stable" : "unstable"));
  return buf;
}

inline Tf2x2 per_unit(const Tf2x2& z, double z_base) { return to_per_unit(z, z_base); }

inline FrequencyGrid extraction_grid(const FrequencyGrid& g, DomainSel sel) {
  // the sequence-domain exclusions are applied to both domains so outputs share one grid
  const FrequencyGrid s = snap_to_commensurate(g, sel == DomainSel::dq ? Domain::dq : Domain::pn);
  if (s.empty()) throw ConfigError("no commensurate frequencies left in the requested grid");
  return s;
}

inline void note_snapping(const FrequencyGrid& requested, const FrequencyGrid& used) {
  if (requested == used) return;
  std::cerr << "note: grid snapped to multiples of " << commensurate_step_hz << " Hz ("
            << requested.size() << " requested, " << used.size() << " used)\n";
}

} // namespace detail

// ---------------------------------------------------------------------------
// analytic
// ---------------------------------------------------------------------------
inline int cmd_analytic(const Options& o) {
  const LoadedConfig lc = load_config(o.config_path);
  const SystemParams& p = lc.sim.params;
  const FrequencyGrid g = parse_grid(o.grid, p.f_n_hz);
  const OperatingPoint op = solve_operating_point(p);
  OutputDir out(o.out_dir);
  const double zb = p.z_base();
  json summary = json::object();
  for (Domain d : domains_of(o.domain)) {
    const std::string dn = imptk::to_string(d);
    const Tf2x2 zs = detail::per_unit(to_domain(grid_impedance_dq(p, g), d), zb);
    const Tf2x2 zl = detail::per_unit(to_domain(vsc_impedance_dq(p, op, g, p.pll_enabled), d), zb);
    out.write("z_source_" + dn + ".csv", csv::to_csv(zs));
    out.write("z_load_" + dn + ".csv", csv::to_csv(zl));
    for (bool mag : {true, false}) {
      const std::string q = mag ? "mag" : "angle";
      out.plot("z_source_" + dn + "_" + q,
               detail::bode_panel("source impedance, " + dn, "Z_S", zs, mag));
      out.plot("z_load_" + dn + "_" + q, detail::bode_panel("load impedance, " + dn, "Z_L", zl, mag));
    }
    const MfdReport rs = mfd_classify(zs), rl = mfd_classify(zl);
    double ms = 0, ml = 0;
    for (const auto& x : rs.points) ms = std::max(ms, x.ratio);
    for (const auto& x : rl.points) ml = std::max(ml, x.ratio);
    summary[dn] = {{"max_offdiag_ratio_source", ms}, {"max_offdiag_ratio_load", ml}};
    std::printf("%s: max off-diagonal ratio source %.3e, load %.3e\n", dn.c_str(), ms, ml);
  }
  out.manifest("analytic", o, &lc,
               {{"grid", grid_json(g)}, {"units", "per-unit on z_base"}, {"summary", summary}});
  return exit_ok;
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------
namespace detail {

inline std::vector<InjectionKind> injections_for(Domain d, const std::vector<std::string>& req) {
  const auto [k1, k2] = injection_pair(d);
  if (req.empty()) return {k1, k2};
  std::vector<InjectionKind> out;
  for (const auto& r : req) {
    if (r == imptk::to_string(k1)) out.push_back(k1);
    else if (r == imptk::to_string(k2)) out.push_back(k2);
    else if (r != "dq1" && r != "dq2" && r != "pn1" && r != "pn2")
      throw ConfigError("unknown injection kind '" + r + "' (expected dq1, dq2, pn1 or pn2)");
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Decoupled channel from one injection kind: V_k / I_k at the injected component.
struct ChannelResult {
  Tf1x1 source;
  Tf1x1 load;
};

inline ChannelResult extract_channel(const SimConfig& base, const FrequencyGrid& g, Domain d,
                                     InjectionKind kind, const ExtractOptions& eo,
                                     unsigned threads) {
  const auto window = static_cast<std::size_t>(std::llround(eo.window_s / base.dt));
  for (double f : g.points_hz()) require_commensurate(f, base.params.f_n_hz, window, base.dt);
  SimConfig b = base;
  b.injection.reset();
  const SimTrace baseline = simulate(b);
  if (baseline.diverged) throw NumericalError("baseline simulation diverged");
  const bool first = kind == injection_pair(d).first;
  std::vector<cplx> zs(g.size()), zl(g.size());
  const double floor = 1e-6 * eo.amplitude_pu * base.params.i_base_peak();
  parallel_for(g.size(), threads, [&](std::size_t i) {
    SimConfig c = base;
    c.injection = InjectionSpec{kind, g.hz(i), eo.amplitude_pu * base.params.i_base_peak()};
    const SimTrace tr = simulate(c);
    if (tr.diverged) throw NumericalError("simulation diverged at " + std::to_string(g.hz(i)) + " Hz");
    const PhasorSet ph = measure_phasors(tr, baseline, d, g.hz(i), window);
    auto pick = [&](const Phasor2& x) { return first ? x.first : x.second; };
    zs[i] = scalar_ratio(pick(ph.v), pick(ph.i_source), floor);
    zl[i] = scalar_ratio(pick(ph.v), pick(ph.i_load), floor);
  });
  const std::string c = imptk::to_string(kind);
  return {{g, zs, "Z_S_" + c}, {g, zl, "Z_L_" + c}};
}

inline std::string channel_name(Domain d, int ch) {
  return d == Domain::dq ? (ch == 0 ? "d" : "q") : (ch == 0 ? "p" : "n");
}

} // namespace detail

inline int cmd_extract(const Options& o, const ExtractOptions& eo) {
  if (eo.model != "matrix" && eo.model != "dec")
    throw ConfigError("--model must be matrix or dec, got '" + eo.model + "'");
  const LoadedConfig lc = load_config(o.config_path);
  const SimConfig& base = lc.sim;
  const SystemParams& p = base.params;
  const FrequencyGrid requested = parse_grid(o.grid, p.f_n_hz);
  const FrequencyGrid g = detail::extraction_grid(requested, o.domain);
  detail::note_snapping(requested, g);

  // validate the injection set before any simulation runs
  std::map<Domain, std::vector<InjectionKind>> kinds;
  for (Domain d : domains_of(o.domain)) {
    kinds[d] = detail::injections_for(d, eo.injections);
    const auto [k1, k2] = injection_pair(d);
    if (eo.model == "matrix" && kinds[d].size() != 2)
      throw ConfigError(std::string("the matrix model needs two independent injections per "
                                    "frequency: pass both ") +
                        imptk::to_string(k1) + " and " + imptk::to_string(k2) + " for the " +
                        imptk::to_string(d) + " domain");
    if (kinds[d].empty())
      throw ConfigError(std::string("no injection kind selected for the ") + imptk::to_string(d) +
                        " domain");
  }

  OutputDir out(o.out_dir);
  const double zb = p.z_base();
  const OperatingPoint op = solve_operating_point(p);
  json info = json::object();
  for (Domain d : domains_of(o.domain)) {
    const std::string dn = imptk::to_string(d);
    const Tf2x2 zs_ref = to_domain(grid_impedance_dq(p, g), d);
    const Tf2x2 zl_ref = to_domain(vsc_impedance_dq(p, op, g, p.pll_enabled), d);
    const DecoupledChannels dec_ref = decoupled_shunt_channels(zs_ref, zl_ref);

    std::vector<Tf1x1> src_ch, load_ch, src_ref, load_ref;
    std::vector<std::string> ch_names;
    if (kinds[d].size() == 2) {
      ExtractionSettings s;
      s.domain = d;
      s.window_s = eo.window_s;
      s.amplitude_pu = eo.amplitude_pu;
      s.threads = o.threads;
      const ExtractionResult r = extract(base, g, s);
      src_ch = {r.decoupled.source1, r.decoupled.source2};
      load_ch = {r.decoupled.load1, r.decoupled.load2};
      ch_names = {detail::channel_name(d, 0), detail::channel_name(d, 1)};
      src_ref = {dec_ref.source1, dec_ref.source2};
      load_ref = {dec_ref.load1, dec_ref.load2};
      double cmax = 0;
      for (double c : r.cond) cmax = std::max(cmax, c);
      info[dn] = {{"max_cond", cmax},
                  {"flagged", std::count(r.flagged.begin(), r.flagged.end(), true)},
                  {"linearity_rel_change", r.linearity.empty() ? 0.0 : r.linearity[0].relative_change}};
      if (eo.model == "matrix") {
        const Tf2x2 zs = detail::per_unit(r.z_source, zb), zl = detail::per_unit(r.z_load, zb);
        const Tf2x2 zs_a = detail::per_unit(zs_ref, zb), zl_a = detail::per_unit(zl_ref, zb);
        out.write("z_source_" + dn + ".csv", csv::to_csv_with_cond(zs, r.cond));
        out.write("z_load_" + dn + ".csv", csv::to_csv_with_cond(zl, r.cond));
        for (bool mag : {true, false}) {
          const std::string q = mag ? "mag" : "angle";
          out.plot("z_source_" + dn + "_overlay_" + q,
                   detail::bode_panel("source impedance, analytic vs extracted, " + dn, "Z_S",
                                      zs_a, mag, &zs));
          out.plot("z_load_" + dn + "_overlay_" + q,
                   detail::bode_panel("load impedance, analytic vs extracted, " + dn, "Z_L", zl_a,
                                      mag, &zl));
        }
        std::printf("%s: matrix model on %zu points, max cond %.3g, flagged %ld\n", dn.c_str(),
                    g.size(), cmax, static_cast<long>(info[dn]["flagged"].get<long>()));
        continue;
      }
    } else {
      const InjectionKind k = kinds[d].front();
      const int ch = k == injection_pair(d).first ? 0 : 1;
      const auto r = detail::extract_channel(base, g, d, k, eo, o.threads);
      src_ch = {r.source};
      load_ch = {r.load};
      ch_names = {detail::channel_name(d, ch)};
      src_ref = {ch == 0 ? dec_ref.source1 : dec_ref.source2};
      load_ref = {ch == 0 ? dec_ref.load1 : dec_ref.load2};
    }

    // decoupled model: one file per channel, overlays against the analytic shunt channels
    for (std::size_t c = 0; c < ch_names.size(); ++c) {
      const std::string cn = ch_names[c];
      std::string s = "f_hz,re_zs,im_zs,re_zl,im_zl\n";
      for (std::size_t i = 0; i < g.size(); ++i)
        s += csv::num(g.hz(i)) + "," + csv::num(src_ch[c][i].real() / zb) + "," +
             csv::num(src_ch[c][i].imag() / zb) + "," + csv::num(load_ch[c][i].real() / zb) + "," +
             csv::num(load_ch[c][i].imag() / zb) + "\n";
      out.write("dec_" + cn + ".csv", s);
      for (bool mag : {true, false}) {
        out.plot("dec_" + cn + "_overlay_" + (mag ? "mag" : "angle"),
                 detail::channel_panel("decoupled channel " + cn + ", analytic vs extracted",
                                       {&src_ref[c], &src_ch[c], &load_ref[c], &load_ch[c]},
                                       {"Z_S_" + cn + "_analytic", "Z_S_" + cn + "_extracted",
                                        "Z_L_" + cn + "_analytic", "Z_L_" + cn + "_extracted"},
                                       {false, true, false, true}, zb, mag));
      }
    }
    std::printf("%s: decoupled model on %zu points, channels", dn.c_str(), g.size());
    for (const auto& c : ch_names) std::printf(" %s", c.c_str());
    std::printf("\n");
  }
  out.manifest("extract", o, &lc,
               {{"grid", grid_json(g)},
                {"model", eo.model},
                {"units", "per-unit on z_base"},
                {"amplitude_pu", eo.amplitude_pu},
                {"window_s", eo.window_s},
                {"diagnostics", info}});
  return exit_ok;
}

// ---------------------------------------------------------------------------
// stability
// ---------------------------------------------------------------------------
inline int cmd_stability(const Options& o, const StabilityOptions& so) {
  if (so.source != "analytic" && so.source != "extracted")
    throw ConfigError("--source must be analytic or extracted, got '" + so.source + "'");
  const LoadedConfig lc = load_config(o.config_path);
  const SystemParams& p = lc.sim.params;
  FrequencyGrid g = parse_grid(o.grid, p.f_n_hz);
  if (so.source == "extracted") {
    const FrequencyGrid snapped = detail::extraction_grid(g, o.domain);
    detail::note_snapping(g, snapped);
    g = snapped;
  }

  OutputDir out(o.out_dir);
  std::vector<ModelSet> sets;
  for (Domain d : domains_of(o.domain)) {
    if (so.source == "analytic") {
      const OperatingPoint op = solve_operating_point(p);
      const Tf2x2 zs = to_domain(grid_impedance_dq(p, g), d);
      const Tf2x2 zl = to_domain(vsc_impedance_dq(p, op, g, p.pll_enabled), d);
      sets.push_back(build_model_set(zs, zl, decoupled_shunt_channels(zs, zl), so.eps_threshold));
    } else {
      ExtractionSettings s;
      s.domain = d;
      s.threads = o.threads;
      s.amplitude_pu = so.amplitude_pu;
      s.window_s = so.window_s;
      s.linearity_check = false;
      const ExtractionResult r = extract(lc.sim, g, s);
      sets.push_back(build_model_set(r.z_source, r.z_load, r.decoupled, so.eps_threshold));
    }
  }

  std::string verdicts = "domain,variant,encirclements,min_distance,marginal,verdict\n";
  bool marginal = false;
  json vj = json::array();
  std::vector<const EpsilonNorm*> eps;
  std::printf("%-4s %-8s %5s %12s  %s\n", "dom", "variant", "enc", "min|1+l|", "verdict");
  for (const auto& m : sets) {
    const std::string dn = imptk::to_string(m.domain);
    for (int v = 0; v < 3; ++v) {
      const std::string vn = detail::variant_name(v);
      out.write("loop_" + dn + "_" + vn + ".csv", csv::to_csv(detail::variant_loop(m, v)));
      out.write("loci_" + dn + "_" + vn + ".csv", csv::to_csv(detail::variant_loci(m, v)));
      const NyquistVerdict n = v == 0 ? m.verdict : nyquist_verdict(detail::variant_loci(m, v));
      if (v == 0) marginal = marginal || n.marginal;
      verdicts += detail::verdict_row(m.domain, v, n) + "\n";
      vj.push_back({{"domain", dn},
                    {"variant", vn},
                    {"encirclements", n.total_encirclements},
                    {"min_distance", n.min_distance},
                    {"marginal", n.marginal},
                    {"stable", n.stable}});
      std::printf("%-4s %-8s %5d %12.4e  %s\n", dn.c_str(), vn.c_str(), n.total_encirclements,
                  n.min_distance, n.marginal ? "withheld (marginal)" : n.stable ? "stable" : "unstable");
    }
    out.plot("loci_" + dn + "_mag", detail::loci_magnitude_panel(m));
    out.plot("nyquist_" + dn, detail::nyquist_panel(m));
    out.write("epsilon_" + dn + ".csv", csv::to_csv(m.epsilon));
    out.plot("epsilon_" + dn + "_plot", detail::epsilon_panel({&m.epsilon}, so.eps_threshold));
    eps.push_back(&m.epsilon);
    std::printf("%s: eps above %g at %zu of %zu points\n", dn.c_str(), so.eps_threshold,
                m.epsilon.violations_hz.size(), m.epsilon.eps.size());
  }
  if (eps.size() == 2) out.plot("epsilon_both", detail::epsilon_panel(eps, so.eps_threshold));
  out.write("verdicts.csv", verdicts);
  std::printf("%s\n", NyquistVerdict::assumption);
  out.manifest("stability", o, &lc,
               {{"grid", grid_json(g)},
                {"source", so.source},
                {"eps_threshold", so.eps_threshold},
                {"verdicts", vj}});
  if (marginal) {
    std::fprintf(stderr, "exact-loop locus within %g of -1: verdict withheld\n",
                 default_nyquist_margin);
    return exit_marginal;
  }
  return exit_ok;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------
namespace detail {

inline json read_manifest(const std::string& dir) {
  const fs::path m = fs::path(dir) / "manifest.json";
  if (!fs::exists(m)) throw ConfigError(dir + " has no manifest.json");
  try {
    return json::parse(read_file(m.string()));
  } catch (const json::exception& e) {
    throw ConfigError(m.string() + ": " + e.what());
  }
}

inline double rel_diff(double num, double a, double b) {
  const double scale = std::max(a, b);
  return scale == 0.0 ? 0.0 : num / scale;
}

} // namespace detail

inline int cmd_compare(const Options& o, const CompareOptions& co) {
  const json ma = detail::read_manifest(co.dir_a), mb = detail::read_manifest(co.dir_b);
  if (!ma.contains("grid") || !mb.contains("grid"))
    throw ConfigError("both manifests must record a frequency grid");
  if (ma["grid"] != mb["grid"])
    throw MismatchError("grid mismatch between " + co.dir_a + " and " + co.dir_b +
                        " (compare needs identical frequency points)");

  std::vector<std::string> files;
  for (const auto& f : ma["outputs"])
    for (const auto& h : mb["outputs"])
      if (f == h) {
        const std::string name = f.get<std::string>();
        if ((name.rfind("loci_", 0) == 0 || name.rfind("epsilon_", 0) == 0) &&
            name.find("_mag") == std::string::npos && name.find("_plot") == std::string::npos &&
            name.find("_both") == std::string::npos && name.size() > 4 &&
            name.substr(name.size() - 4) == ".csv")
          files.push_back(name);
      }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no common loci or epsilon CSVs to compare");

  OutputDir out(o.out_dir);
  std::string summary = "file,max_rel_diff,f_at_max_hz\n";
  std::printf("%-28s %14s %12s\n", "file", "max rel diff", "at f (Hz)");
  json sj = json::array();
  for (const auto& name : files) {
    const auto ta = csv::read((fs::path(co.dir_a) / name).string());
    const auto tb = csv::read((fs::path(co.dir_b) / name).string());
    if (ta.rows.size() != tb.rows.size() || ta.header != tb.header)
      throw MismatchError(name + ": files differ in shape");
    const bool loci = name.rfind("loci_", 0) == 0;
    std::string s = "f_hz,rel_diff\n";
    double worst = 0, f_worst = ta.rows.empty() ? 0.0 : ta.rows[0][0];
    for (std::size_t i = 0; i < ta.rows.size(); ++i) {
      const auto& a = ta.rows[i];
      const auto& b = tb.rows[i];
      if (a[0] != b[0]) throw MismatchError(name + ": frequency columns differ");
      double d;
      if (loci) {
        const EigPair x{cplx(a[1], a[2]), cplx(a[3], a[4])}, y{cplx(b[1], b[2]), cplx(b[3], b[4])};
        d = detail::rel_diff(multiset_distance(x, y),
                             std::max(std::abs(x[0]), std::abs(x[1])),
                             std::max(std::abs(y[0]), std::abs(y[1])));
      } else {
        const cplx x(a[1], a[2]), y(b[1], b[2]);
        d = detail::rel_diff(std::abs(x - y), std::abs(x), std::abs(y));
      }
      s += csv::num(a[0]) + "," + csv::num(d) + "\n";
      if (d > worst) worst = d, f_worst = a[0];
    }
    const std::string stem = name.substr(0, name.size() - 4);
    out.write("diff_" + stem + ".csv", s);
    summary += stem + "," + csv::num(worst) + "," + csv::num(f_worst) + "\n";
    sj.push_back({{"file", name}, {"max_rel_diff", worst}, {"f_at_max_hz", f_worst}});
    std::printf("%-28s %14.6e %12.6g\n", name.c_str(), worst, f_worst);
  }
  out.write("summary.csv", summary);
  out.manifest("compare", o, nullptr,
               {{"grid", ma["grid"]}, {"inputs", {co.dir_a, co.dir_b}}, {"summary", sj}});
  return exit_ok;
}

// ---------------------------------------------------------------------------
// simulate (single run, trace export)
// ---------------------------------------------------------------------------
inline int cmd_simulate(const Options& o, const SimulateOptions& so) {
  const LoadedConfig lc = load_config(o.config_path);
  SimConfig c = lc.sim;
  c.initial_offset_pu = so.offset_pu;
  const SimTrace tr = simulate(c);
  OutputDir out(o.out_dir);
  out.write("trace.csv", csv::to_csv(tr, so.stride));
  out.manifest("simulate", o, &lc,
               {{"stride", so.stride}, {"diverged", tr.diverged}, {"t_last_s", tr.t.back()}});
  if (tr.diverged) {
    std::fprintf(stderr, "simulation diverged at t = %.6g s\n", tr.t.back());
    return exit_numerical;
  }
  const BoundednessReport b = assess_boundedness(c, so.offset_pu > 0 ? so.offset_pu : 0.01);
  std::printf("boundedness: %s (early %.3e pu, late %.3e pu)\n", imptk::to_string(b.verdict),
              b.early_deviation_pu, b.late_deviation_pu);
  return exit_ok;
}

// Maps toolkit exceptions onto exit codes.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return exit_numerical;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_usage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_usage;
  }
}

} // namespace imptk::cli
