// svlab - config, CSV/JSON emission, reproducibility manifest
#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace svlab {

using Json = nlohmann::json;

// Shortest round-trip decimal representation (std::to_chars).
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {
    for (std::size_t i = 0; i < header_.size(); ++i)
      os_ << header_[i] << (i + 1 < header_.size() ? "," : "\n");
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      os_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
  }
  std::string str() const { return os_.str(); }

 private:
  std::vector<std::string> header_;
  std::ostringstream os_;
};

// Atomic emission: write to a temp file in the same directory, then rename.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os << content;
    if (!os.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Phase points serialize as (chart, x0..x3, p_r*, p_theta, p_phi, p_t).
template <class PointT, class GeoT, class ChartT>
std::vector<std::string> phase_point_csv_row(const PointT& p, const GeoT& geo, ChartT chart) {
  const auto cp = geo.from_tr(p.t, p.r, p.theta, p.phi, chart);
  return {chart_name(chart),         format_double(cp.x[0]),    format_double(cp.x[1]),
          format_double(cp.x[2]),    format_double(cp.x[3]),    format_double(p.p_rstar),
          format_double(p.p_theta),  format_double(p.p_phi),    format_double(p.p_t)};
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Strict-schema merge: every key in `user` must exist in `defaults` (same
// nesting); values override the defaults. `data.params` is preset-specific
// and deliberately free-form.
inline void merge_strict(Json& defaults, const Json& user, const std::string& where = "") {
  if (!user.is_object()) {
    defaults = user;
    return;
  }
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (key == "data.params") {
      defaults[it.key()] = it.value();
      continue;
    }
    if (!defaults.contains(it.key()))
      throw std::invalid_argument("config: unknown key '" + key + "'");
    if (defaults[it.key()].is_object() && it.value().is_object())
      merge_strict(defaults[it.key()], it.value(), key);
    else
      defaults[it.key()] = it.value();
  }
}

inline Json default_config() {
  return Json{
      {"M", 1.0},
      {"R0", 10.0},
      {"seed", 20250810},
      {"threads", 0},
      {"out", "svlab-out"},
      {"ode", {{"rtol", 1e-11}, {"atol", 1e-13}}},
      {"identities",
       {{"samples", 100000},
        {"r_lo", 2.05},
        {"r_hi", 50.0},
        {"tolerance", 1e-10},
        {"xi_eps", 1e-4},
        {"sign_samples", 200000}}},
      {"trace",
       {{"r", 3.0},
        {"pr", 1e-9},
        {"ell", 0.0},  // 0: circular-photon value sqrt(27) M E
        {"E", 1.0},
        {"span", 120.0},
        {"accumulators", true}}},
      {"data",
       {{"preset", "gaussian-shell"},
        {"expression", ""},
        {"support", {{"r_lo", 0.0}, {"r_hi", 0.0}, {"pr_lo", 0.0}, {"pr_hi", 0.0},
                     {"ell_lo", 0.0}, {"ell_hi", 0.0}}},
        {"params", Json::object()}}},
      {"flux",
       {{"taus", Json::array({0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 200.0})},
        {"derivatives", true},
        {"exp_b", 0.05},
        {"err_est", false},
        {"grid",
         {{"gl_pts", 8},
          {"panels_r_space", 10},
          {"panels_r_cone", 6},
          {"panels_pr", 3},
          {"panels_ell", 3},
          {"panels_tstar", 10}}}}},
      {"balance", {{"tau", 24.0}, {"r_in", 2.6}, {"r_out", 60.0}, {"weight", "number"}}},
      {"iled", {{"tau_max", 200.0}}},
      {"decay", {{"model", "power"}, {"window", Json::array({20.0, 200.0})}, {"norm", "calE"}}},
      {"tnn",
       {{"taus", Json::array({0.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0})},
        {"r_lo", 2.3},
        {"r_hi", 40.0},
        {"n_r", 24}}},
  };
}

struct RunConfig {
  Json j;

  static RunConfig load(const std::string& path) {
    RunConfig c;
    c.j = default_config();
    if (!path.empty()) {
      std::ifstream is(path);
      if (!is) throw std::invalid_argument("config: cannot open " + path);
      Json user;
      try {
        user = Json::parse(is);
      } catch (const Json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
      }
      merge_strict(c.j, user);
    }
    // Environment overrides, documented prefix SVLAB_.
    if (const char* s = std::getenv("SVLAB_SEED")) c.j["seed"] = std::stoull(s);
    if (const char* s = std::getenv("SVLAB_THREADS")) c.j["threads"] = std::stoi(s);
    if (const char* s = std::getenv("SVLAB_OUT")) c.j["out"] = std::string(s);
    return c;
  }

  std::uint64_t hash() const { return fnv1a(j.dump()); }
};

struct RunManifest {
  std::string subcommand;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<std::pair<std::string, bool>> checks;

  Json to_json() const {
    Json checks_j = Json::object();
    bool all = true;
    for (const auto& [k, v] : checks) {
      checks_j[k] = v;
      all = all && v;
    }
    return Json{{"tool", "svlab"},
                {"version", "0.1.0"},
                {"subcommand", subcommand},
                {"config_hash", config_hash},
                {"seed", seed},
                {"wall_seconds", wall_seconds},
                {"checks", checks_j},
                {"pass", all}};
  }
};

class WallTimer {
 public:
  WallTimer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace svlab
