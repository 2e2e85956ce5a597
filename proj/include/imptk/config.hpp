#pragma once

// Line-oriented `key = value` configuration files.
//
//   # comment
//   v_th_volt = 690
//   pll_enabled = true
//
// Keys are validated against a fixed vocabulary; errors carry the line number.

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "imptk/errors.hpp"

namespace imptk {

inline constexpr std::array<std::string_view, 16> system_param_keys = {
    "v_th_volt", "s_base_va", "f_n_hz",  "v_dc_volt", "z_th_pu_re", "z_th_pu_im",
    "z_s_pu_re", "z_s_pu_im", "kp_pu",   "ti_s",      "k_pll",      "t_pll_s",
    "t_d_s",     "id_ref_pu", "iq_ref_pu", "pll_enabled"};

inline constexpr std::array<std::string_view, 6> sim_config_keys = {
    "case", "dt_s", "t_end_s", "inj_kind", "f_inj_hz", "i_inj_pu"};

class Config {
public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(std::istream& in, const std::string& source = "<config>") {
    Config cfg;
    cfg.source_ = source;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string line = raw.substr(0, raw.find('#'));
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (!known(key))
        throw ConfigError(source + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
      if (value.empty())
        throw ConfigError(source + ":" + std::to_string(lineno) + ": empty value for '" + key +
                          "'");
      if (cfg.entries_.count(key))
        throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                          "'");
      cfg.entries_[key] = {value, lineno};
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in, "<string>");
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<double> number(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second.value, &used);
      if (used != it->second.value.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where(it->second) + ": '" + key + "' expects a number, got '" +
                        it->second.value + "'");
    }
  }

  std::optional<bool> boolean(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    std::string v = it->second.value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where(it->second) + ": '" + key + "' expects true/false, got '" +
                      it->second.value + "'");
  }

  std::optional<std::string> text(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.value;
  }

  // Error message prefix pointing at the line that defined `key`.
  std::string where(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? source_ : where(it->second);
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }

private:
  std::string where(const Entry& e) const { return source_ + ":" + std::to_string(e.line); }

  static bool known(const std::string& key) {
    auto in = [&](const auto& list) {
      return std::find(list.begin(), list.end(), key) != list.end();
    };
    return in(system_param_keys) || in(sim_config_keys);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
};

} // namespace imptk
