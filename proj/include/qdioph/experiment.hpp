#pragma once

// Experiment driver behind the quadric-dioph tool: validated JSON configs, a
// persistent enumeration cache, one runner per subcommand and the results
// layout <out>/<experiment>/<config-hash>/{data.csv, summary.json, manifest.json}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "qdioph/approx.hpp"
#include "qdioph/dani_flow.hpp"
#include "qdioph/errors.hpp"
#include "qdioph/game.hpp"
#include "qdioph/projective.hpp"
#include "qdioph/quadratic_form.hpp"
#include "qdioph/rational_points.hpp"

#ifndef QDIOPH_VERSION
#define QDIOPH_VERSION "0.0.0"
#endif

namespace qdioph::experiment {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kLibraryVersion = QDIOPH_VERSION;

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"enumerate",   "qrank",         "normalize",
                                              "simplex-verify", "strong-simplex-verify", "dani-verify",
                                              "exponent",    "dirichlet",     "cover-count",
                                              "game"};
  return names;
}

// ---------------------------------------------------------------- formatting

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Integers beyond 2^53 become decimal strings so JSON readers keep them exact.
inline json json_int(Int v) {
  constexpr Int kExact = Int(1) << 53;
  if (v > kExact || v < -kExact) return std::to_string(v);
  return v;
}

inline json json_ints(std::span<const Int> v) {
  json a = json::array();
  for (Int x : v) a.push_back(json_int(x));
  return a;
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string join_ints(std::span<const Int> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::string join_reals(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::string coord_header(const std::string& prefix, std::size_t m) {
  std::string s;
  for (std::size_t i = 0; i < m; ++i) s += (i ? "," : "") + prefix + std::to_string(i);
  return s;
}

// ---------------------------------------------------------------- config

/// 1-based line of the first occurrence of "key" in the config text, or 0.
inline std::size_t key_line(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

/// Parses config text; syntax errors report line and column.
inline json parse_config_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto begin = text.begin(), at = text.begin() + static_cast<std::ptrdiff_t>(byte);
    const std::size_t line = 1 + static_cast<std::size_t>(std::count(begin, at, '\n'));
    const auto nl = text.rfind('\n', byte == 0 ? 0 : byte - 1);
    const std::size_t col = nl == std::string::npos || byte == 0 ? byte + 1 : byte - nl;
    throw Error(ErrorKind::Config, source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                       ": invalid JSON (" + e.what() + ")");
  }
}

enum class ParamType { Int, Real, String, Bool, RealList, StringList, Slice, Point };

struct Param {
  std::string key;
  ParamType type;
  json fallback;  // null: optional without default
  double lo = 0;
  double hi = 0;
  bool open = false;  // (lo, hi) instead of [lo, hi]
  std::vector<std::string> choices;
};

namespace detail {

inline Param int_param(std::string key, Int def, double lo, double hi) {
  return {std::move(key), ParamType::Int, def, lo, hi, false, {}};
}

inline Param real_param(std::string key, json def, double lo, double hi, bool open = false) {
  return {std::move(key), ParamType::Real, std::move(def), lo, hi, open, {}};
}

inline Param seed_param() { return int_param("seed", 1, 0, 9007199254740992.0); }

inline Param slice_param() { return {"slice", ParamType::Slice, nullptr, 0, 0, false, {}}; }

inline Param point_param(std::string key) { return {std::move(key), ParamType::Point, nullptr, 0, 0, false, {}}; }

}  // namespace detail

/// Accepted keys, beyond the form source, for each experiment.
inline std::vector<Param> schema(const std::string& experiment) {
  using namespace detail;
  if (experiment == "enumerate")
    return {int_param("h_max", 100, 1, 1e5),
            {"method", ParamType::String, "both", 0, 0, false, {"bruteforce", "parametrized", "both"}},
            point_param("base_point")};
  if (experiment == "qrank") return {int_param("h_max", 30, 1, 2000), int_param("search_budget", 5000000, 1, 1e9)};
  if (experiment == "normalize") return {point_param("base_point"), int_param("search_height", 64, 1, 1e4)};
  if (experiment == "simplex-verify" || experiment == "strong-simplex-verify")
    return {int_param("samples", 1000, 1, 1e7), real_param("rho_lo", 1e-3, 0, 1, true),
            real_param("rho_hi", 0.1, 0, 1, true), seed_param(),
            {"h_max", ParamType::Int, nullptr, 1, 1e6, false, {}}};
  if (experiment == "dani-verify")
    return {int_param("h_max", 1000, 1, 1e6), int_param("samples", 10000, 1, 1e8), seed_param()};
  if (experiment == "exponent")
    return {int_param("h_max", 10000, 10, 1e7), int_param("points", 100, 1, 1e6), seed_param(), slice_param(),
            real_param("tolerance", 0.2, 0, 1)};
  if (experiment == "dirichlet")
    return {int_param("h_max", 10000, 1, 1e7), int_param("points", 100, 1, 1e6), seed_param(), slice_param()};
  if (experiment == "cover-count")
    return {{"betas", ParamType::RealList, json::array({1.5, 2.0, 3.0}), 1, 100, false, {}},
            int_param("p_lo", 6, 1, 20),
            int_param("p_hi", 12, 1, 20),
            int_param("budget", 4194304, 1, 1e9),
            real_param("tolerance", 0.2, 0, 1)};
  if (experiment == "game")
    return {int_param("h_max", 1000, 1, 1e5),
            real_param("beta", 0.1, 0, 1.0 / 3, true),
            int_param("rounds", 40, 1, 200),
            real_param("rho0", 0.25, 0, 1, true),
            {"strategies", ParamType::StringList, json::array({"stubborn", "random", "greedy"}), 0, 0, false,
             {"stubborn", "random", "greedy"}},
            int_param("games", 100, 1, 1e5),
            seed_param(),
            slice_param(),
            {"save_transcripts", ParamType::Bool, false, 0, 0, false, {}}};
  throw Error(ErrorKind::Config, "unknown experiment '" + experiment + "'");
}

/// A validated configuration: every default filled in and the form inline, so
/// the effective JSON alone reproduces the run.
struct Config {
  std::string experiment;
  json effective;
  QuadraticForm form;

  Int integer(const std::string& k) const { return effective.at(k).get<Int>(); }
  double real(const std::string& k) const { return effective.at(k).get<double>(); }
  std::string text(const std::string& k) const { return effective.at(k).get<std::string>(); }
  bool has(const std::string& k) const { return effective.contains(k); }
  std::uint64_t seed() const { return effective.at("seed").get<std::uint64_t>(); }

  std::optional<SliceSpec> slice() const {
    if (!has("slice")) return std::nullopt;
    return SliceSpec{effective.at("slice").get<std::vector<std::vector<double>>>()};
  }

  std::optional<IntVec> point(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    return effective.at(k).get<IntVec>();
  }
};

namespace detail {

class Validator {
 public:
  Validator(std::string text, std::string source) : text_(std::move(text)), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = source_;
    if (const auto line = key_line(text_, key)) where += ":" + std::to_string(line);
    throw Error(ErrorKind::Config, where + ": key '" + key + "': " + msg);
  }

  json check(const Param& p, const json& v, std::size_t form_size) const {
    auto in_range = [&](double x) { return p.open ? (x > p.lo && x < p.hi) : (x >= p.lo && x <= p.hi); };
    auto range = [&] {
      return std::string(p.open ? "(" : "[") + fmt(p.lo) + ", " + fmt(p.hi) + (p.open ? ")" : "]");
    };
    switch (p.type) {
      case ParamType::Int:
        if (!v.is_number_integer()) fail(p.key, "expected an integer");
        if (!in_range(static_cast<double>(v.get<Int>()))) fail(p.key, "must lie in " + range());
        return v.get<Int>();
      case ParamType::Real:
        if (!v.is_number()) fail(p.key, "expected a number");
        if (!in_range(v.get<double>())) fail(p.key, "must lie in " + range());
        return v.get<double>();
      case ParamType::Bool:
        if (!v.is_boolean()) fail(p.key, "expected true or false");
        return v;
      case ParamType::String:
        if (!v.is_string() ||
            std::find(p.choices.begin(), p.choices.end(), v.get<std::string>()) == p.choices.end())
          fail(p.key, "expected one of " + json(p.choices).dump());
        return v;
      case ParamType::RealList: {
        if (!v.is_array() || v.empty()) fail(p.key, "expected a nonempty array of numbers");
        json out = json::array();
        for (const auto& x : v) {
          if (!x.is_number() || !in_range(x.get<double>())) fail(p.key, "every entry must be a number in " + range());
          out.push_back(x.get<double>());
        }
        return out;
      }
      case ParamType::StringList: {
        if (!v.is_array() || v.empty()) fail(p.key, "expected a nonempty array of strings");
        std::vector<std::string> seen;
        for (const auto& x : v) {
          if (!x.is_string() || std::find(p.choices.begin(), p.choices.end(), x.get<std::string>()) == p.choices.end())
            fail(p.key, "entries must be among " + json(p.choices).dump());
          if (std::find(seen.begin(), seen.end(), x.get<std::string>()) != seen.end())
            fail(p.key, "duplicate entry '" + x.get<std::string>() + "'");
          seen.push_back(x.get<std::string>());
        }
        return v;
      }
      case ParamType::Slice: {
        if (!v.is_array() || v.size() != 3) fail(p.key, "expected three spanning vectors");
        for (const auto& row : v) {
          if (!row.is_array() || row.size() != form_size)
            fail(p.key, "each spanning vector needs " + std::to_string(form_size) + " entries");
          for (const auto& x : row)
            if (!x.is_number()) fail(p.key, "spanning vectors must be numeric");
        }
        return v;
      }
      case ParamType::Point: {
        if (!v.is_array() || v.size() != form_size)
          fail(p.key, "expected an integer vector of length " + std::to_string(form_size));
        for (const auto& x : v)
          if (!x.is_number_integer()) fail(p.key, "entries must be integers");
        return v;
      }
    }
    return v;
  }

 private:
  std::string text_;
  std::string source_;
};

inline QuadraticForm read_form(const Validator& val, const json& raw, const fs::path& base_dir) {
  const bool inline_gram = raw.contains("gram"), file = raw.contains("form_file");
  if (inline_gram == file) val.fail(inline_gram ? "form_file" : "gram", "give exactly one of 'gram' or 'form_file'");
  try {
    if (inline_gram) return form_from_json(json{{"gram", raw.at("gram")}});
    if (!raw.at("form_file").is_string()) val.fail("form_file", "expected a path");
    fs::path p = raw.at("form_file").get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) val.fail("form_file", "cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const json j = parse_config_text(ss.str(), p.string());
    return form_from_json(j.contains("gram") ? json{{"gram", j.at("gram")}} : j);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    val.fail(inline_gram ? "gram" : "form_file", e.what());
  }
}

}  // namespace detail

/// Checks keys, types and ranges, fills defaults and inlines the form.
inline Config validate_config(const std::string& experiment, const json& raw, const std::string& text = "",
                              const std::string& source = "config", const fs::path& base_dir = ".") {
  const auto params = schema(experiment);
  const detail::Validator val(text, source);
  if (!raw.is_object()) throw Error(ErrorKind::Config, source + ": config must be a JSON object");
  for (const auto& [key, value] : raw.items()) {
    if (key == "gram" || key == "form_file") continue;
    if (key == "experiment") {
      if (!value.is_string() || value.get<std::string>() != experiment)
        val.fail(key, "config is for '" + value.dump() + "', not '" + experiment + "'");
      continue;
    }
    if (std::none_of(params.begin(), params.end(), [&](const Param& p) { return p.key == key; }))
      val.fail(key, "unknown key for experiment '" + experiment + "'");
  }
  Config cfg;
  cfg.experiment = experiment;
  cfg.form = detail::read_form(val, raw, base_dir);
  cfg.effective = json::object();
  cfg.effective["experiment"] = experiment;
  json gram = json::array();
  for (const auto& row : cfg.form.gram()) gram.push_back(json_ints(row));
  cfg.effective["gram"] = gram;
  for (const auto& p : params) {
    if (raw.contains(p.key)) {
      cfg.effective[p.key] = val.check(p, raw.at(p.key), cfg.form.size());
    } else if (!p.fallback.is_null()) {
      cfg.effective[p.key] = p.fallback;
    }
  }
  const auto& e = cfg.effective;
  if (e.contains("rho_lo") && e.at("rho_lo").get<double>() > e.at("rho_hi").get<double>())
    val.fail("rho_lo", "must not exceed rho_hi");
  if (e.contains("p_lo") && e.at("p_lo").get<Int>() > e.at("p_hi").get<Int>()) val.fail("p_lo", "must not exceed p_hi");
  if (e.contains("p_hi") && e.at("p_hi").get<Int>() - e.at("p_lo").get<Int>() < 1)
    val.fail("p_hi", "needs at least two levels");
  if (cfg.has("slice")) {
    try {
      SliceConic::of(cfg.form, *cfg.slice());
    } catch (const Error& ex) {
      val.fail("slice", ex.what());
    }
  }
  for (const char* k : {"base_point"})
    if (cfg.has(k)) {
      const auto v = *cfg.point(k);
      if (gcd_of(v) == 0 || evaluate(cfg.form, v) != 0) val.fail(k, "must be a nonzero isotropic vector");
    }
  return cfg;
}

/// A manifest written by a previous run is accepted in place of a config.
inline json unwrap_manifest(const json& raw) {
  if (raw.is_object() && raw.contains("config") && raw.contains("library_version")) return raw.at("config");
  return raw;
}

// ---------------------------------------------------------------- cache

struct EnumerationCache {
  std::string form_hash;
  Int h_max = 0;
  PointSet points;
  bool hit = false;       // served from disk without new enumeration
  bool extended = false;  // disk table extended to a larger h_max
  bool rebuilt = false;   // disk table was corrupt or failed the spot check
};

inline std::string form_hash(const QuadraticForm& form) {
  json gram = json::array();
  for (const auto& row : form.gram()) gram.push_back(row);
  return hex64(fnv1a(gram.dump()));
}

namespace detail {

inline constexpr const char* kCacheFormat = "qdioph-enumeration-1";

inline std::optional<std::pair<Int, PointSet>> load_cache(const fs::path& path, const QuadraticForm& form,
                                                          std::string& why) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  try {
    if (!std::getline(in, line)) throw std::runtime_error("empty file");
    const json header = json::parse(line);
    if (header.at("format") != kCacheFormat) throw std::runtime_error("unknown format");
    if (header.at("gram").get<std::vector<IntVec>>() != form.gram()) throw std::runtime_error("form mismatch");
    const Int h = header.at("h_max").get<Int>();
    const auto count = header.at("count").get<std::size_t>();
    PointSet pts;
    pts.reserve(count);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      IntVec v;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) v.push_back(std::stoll(cell));
      if (v.size() != form.size() || !is_canonical(v) || evaluate(form, v) != 0 || max_abs(v) > h)
        throw std::runtime_error("bad row '" + line + "'");
      pts.push_back(canonicalize(v));
    }
    if (pts.size() != count) throw std::runtime_error("row count mismatch");
    if (!std::is_sorted(pts.begin(), pts.end(), HeightOrder{})) throw std::runtime_error("rows out of order");
    return std::make_pair(h, std::move(pts));
  } catch (const std::exception& e) {
    why = e.what();
    return std::nullopt;
  }
}

inline void store_cache(const fs::path& path, const QuadraticForm& form, Int h_max, const PointSet& pts) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << json{{"format", kCacheFormat}, {"gram", form.gram()}, {"h_max", h_max}, {"count", pts.size()}}.dump()
        << "\n";
    for (const auto& p : pts) out << join_ints(p.coords()) << "\n";
  }
  fs::rename(tmp, path);
}

inline PointSet height_slice(const PointSet& pts, Int lo_exclusive, Int hi) {
  PointSet out;
  for (const auto& p : pts)
    if (p.height() > lo_exclusive && p.height() <= hi) out.push_back(p);
  return out;
}

}  // namespace detail

/// Table of X(Q) up to h_max, read from dir when a table for the same Gram
/// matrix is there (extended incrementally if it is shorter), otherwise
/// enumerated and stored. Each call re-enumerates one random height and
/// rebuilds when it disagrees with the stored rows.
inline EnumerationCache cache_get_or_build(const QuadraticForm& form, Int h_max, const fs::path& dir,
                                           std::ostream& log, std::uint64_t spot_seed = 0) {
  EnumerationCache c;
  c.form_hash = form_hash(form);
  c.h_max = h_max;
  const fs::path path = dir / (c.form_hash + ".csv");
  std::string why;
  auto loaded = detail::load_cache(path, form, why);
  if (!loaded && fs::exists(path)) {
    log << "warning: enumeration cache " << path.string() << " is unusable (" << why << "); rebuilding\n";
    c.rebuilt = true;
  }
  if (loaded && loaded->first >= h_max) {
    c.points = detail::height_slice(loaded->second, 0, h_max);
    c.hit = true;
  } else if (loaded) {
    c.points = std::move(loaded->second);
    auto more = enumerate_bruteforce(form, h_max, loaded->first);
    c.points.insert(c.points.end(), more.begin(), more.end());
    c.extended = true;
    detail::store_cache(path, form, h_max, c.points);
  } else {
    c.points = enumerate_bruteforce(form, h_max);
    detail::store_cache(path, form, h_max, c.points);
  }
  if (c.hit || c.extended) {
    Rng rng(spot_seed, 0x5b07);
    const Int h = rng.integer(1, h_max);
    if (detail::height_slice(c.points, h - 1, h) != enumerate_bruteforce(form, h, h - 1)) {
      log << "warning: enumeration cache disagrees with a fresh scan at height " << h << "; rebuilding\n";
      c.points = enumerate_bruteforce(form, h_max);
      detail::store_cache(path, form, std::max(h_max, loaded ? loaded->first : h_max), c.points);
      c.hit = c.extended = false;
      c.rebuilt = true;
    }
  }
  return c;
}

// ---------------------------------------------------------------- runners

struct Context {
  const Config& cfg;
  fs::path cache_dir;
  std::ostream& log;

  PointTable table(Int h) const {
    auto c = cache_get_or_build(cfg.form, h, cache_dir, log, fnv1a(cfg.effective.dump()));
    return PointTable(std::move(c.points), h);
  }
};

struct Output {
  std::string csv;
  json summary = json::object();
  bool pass = true;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> extra_files;
};

namespace detail {

// Runs f(i) for i < n on all cores; results land at index i.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F f) {
  std::vector<T> out(n);
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), std::max<std::size_t>(n, 1)));
  std::vector<std::future<void>> parts;
  for (unsigned t = 0; t < threads; ++t)
    parts.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, [&, t] {
      for (std::size_t i = t; i < n; i += threads) out[i] = f(i);
    }));
  for (auto& p : parts) p.get();
  return out;
}

inline RealProjectivePoint sample_for(const Config& cfg, std::size_t i) {
  Rng rng(cfg.seed(), i);
  const auto slice = cfg.slice();
  return slice ? sample_on_submanifold(cfg.form, *slice, rng) : sample_point(cfg.form, rng);
}

inline std::vector<ApproxRecord> records_for(const QuadraticForm& form, const RealProjectivePoint& x, Int h,
                                             const PointTable* table) {
  if (!table) return best_records(form, x, h);
  auto r = best_records(*table, x);
  if (r.empty()) throw Error(ErrorKind::NoRationalPoints, "no rational points up to h_max");
  return r;
}

inline std::optional<PointTable> record_table(const Context& ctx, Int h) {
  if (qdioph::detail::is_unit_sphere(ctx.cfg.form)) return std::nullopt;
  return ctx.table(h);
}

}  // namespace detail

inline Output run_enumerate(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Int h = cfg.integer("h_max");
  const std::string method = cfg.text("method");
  Output out;
  PointSet brute, param;
  if (method != "parametrized") brute = ctx.table(h).points();
  if (method != "bruteforce") {
    auto base = cfg.point("base_point");
    if (!base)
      if (const auto b = find_base_point(cfg.form)) base = b->coords();
    if (base) param = enumerate_parametrized(cfg.form, *base, h);
    out.summary["base_point"] = base ? json_ints(*base) : json(nullptr);
    out.summary["parametrized_count"] = param.size();
  }
  if (method != "parametrized") out.summary["bruteforce_count"] = brute.size();
  const PointSet& shown = method == "parametrized" ? param : brute;
  out.csv = coord_header("v", cfg.form.size()) + ",height\n";
  for (const auto& p : shown) out.csv += join_ints(p.coords()) + "," + std::to_string(p.height()) + "\n";
  out.summary["count"] = shown.size();
  out.summary["h_max"] = h;
  out.summary["method"] = method;
  if (method == "both") {
    out.pass = brute == param;
    out.summary["agree"] = out.pass;
  }
  return out;
}

inline Output run_qrank(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Int h = cfg.integer("h_max");
  const auto pts = ctx.table(h).points();
  const auto b = qrank_bounds(cfg.form, pts, static_cast<std::size_t>(cfg.integer("search_budget")));
  const auto in = inertia(cfg.form);
  Output out;
  out.csv = "lower,upper,obstruction_modulus\n" + std::to_string(b.lower) + "," + std::to_string(b.upper) + "," +
            (b.obstruction ? std::to_string(*b.obstruction) : std::string()) + "\n";
  out.summary["lower"] = b.lower;
  out.summary["upper"] = b.upper;
  out.summary["exact"] = b.exact();
  out.summary["obstruction_modulus"] = b.obstruction ? json(*b.obstruction) : json(nullptr);
  json witness = json::array();
  if (b.witness)
    for (const auto& v : b.witness->basis()) witness.push_back(json_ints(v));
  out.summary["witness"] = witness;
  out.summary["signature"] = {{"pos", in.pos}, {"neg", in.neg}, {"zero", in.zero}};
  out.summary["points_searched"] = pts.size();
  return out;
}

inline Output run_normalize(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  auto base = cfg.point("base_point");
  if (!base)
    if (const auto b = find_base_point(cfg.form, cfg.integer("search_height"))) base = b->coords();
  if (!base) throw Error(ErrorKind::NoRationalPoints, "no rational point of X up to search_height");
  const auto hb = hyperbolic_normalize(cfg.form, *base);
  const auto t = hb.transformed_gram(cfg.form);
  auto rat_rows = [](const RatMatrix& m) {
    json a = json::array();
    for (const auto& row : m) {
      json r = json::array();
      for (const auto& x : row) r.push_back(x.str());
      a.push_back(r);
    }
    return a;
  };
  Output out;
  out.csv = "column," + coord_header("c", cfg.form.size()) + "\n";
  for (std::size_t k = 0; k < hb.columns.size(); ++k) {
    out.csv += std::to_string(k);
    for (const auto& x : hb.columns[k]) out.csv += "," + x.str();
    out.csv += "\n";
  }
  const auto consts = constants(cfg.form, hb);
  out.pass = has_hyperbolic_shape(t);
  out.summary["base_point"] = json_ints(*base);
  out.summary["columns"] = rat_rows(hb.columns);
  out.summary["residual"] = rat_rows(hb.residual);
  out.summary["transformed_gram"] = rat_rows(t);
  out.summary["hyperbolic_shape"] = out.pass;
  out.summary["input_is_normal_form"] = is_good_form(cfg.form);
  out.summary["constants"] = {{"c0", consts.c0}, {"c1", consts.c1}, {"c_big", consts.c_big}, {"c_small", consts.c_small}};
  return out;
}

inline Output run_simplex(const Context& ctx, bool strong) {
  const auto& cfg = ctx.cfg;
  const auto consts = working_constants(cfg.form);
  SimplexSweepConfig sc;
  sc.samples = static_cast<std::size_t>(cfg.integer("samples"));
  sc.rho_lo = cfg.real("rho_lo");
  sc.rho_hi = cfg.real("rho_hi");
  sc.seed = cfg.seed();
  sc.strong = strong;
  const Int need = simplex_table_height(consts, sc);
  const Int h = cfg.has("h_max") ? cfg.integer("h_max") : need;
  if (h < need)
    throw Error(ErrorKind::Config, "key 'h_max': must be at least c*rho_lo^-1 = " + std::to_string(need));
  const auto table = ctx.table(h);
  const auto sw = simplex_sweep(cfg.form, table, consts, sc);
  Output out;
  out.seeds = {sc.seed};
  out.csv = "index,rho,members,closure_dim,pass,violation_value," + coord_header("x", cfg.form.size()) + "\n";
  double rho_min = 1, rho_max = 0;
  for (const auto& r : sw.rows) {
    out.csv += std::to_string(r.index) + "," + fmt(r.rho) + "," + std::to_string(r.report.members.size()) + "," +
               std::to_string(r.report.closure_dim) + "," + (r.report.pass ? "1" : "0") + "," +
               (r.report.violation ? std::to_string(r.report.violation->value) : std::string()) + "," +
               join_reals(r.x.coords()) + "\n";
    rho_min = std::min(rho_min, r.rho);
    rho_max = std::max(rho_max, r.rho);
  }
  const auto& s = sw.summary;
  out.pass = s.fail_count == 0;
  out.summary["pass_count"] = s.pass_count;
  out.summary["fail_count"] = s.fail_count;
  out.summary["resampled"] = s.resampled;
  out.summary["extremes"] = {{"max_cluster", s.max_cluster},
                             {"max_closure_dim", s.max_closure_dim},
                             {"rho_min", rho_min},
                             {"rho_max", rho_max}};
  out.summary["c_small"] = consts.c_small;
  out.summary["table_h_max"] = h;
  out.summary["strong"] = strong;
  return out;
}

inline Output run_dani(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const bool good = is_good_form(cfg.form);
  const auto consts = good ? constants(cfg.form) : working_constants(cfg.form);
  const auto sw = dani_sweep(cfg.form, consts, cfg.integer("h_max"), static_cast<std::size_t>(cfg.integer("samples")),
                             cfg.seed());
  Output out;
  out.seeds = {cfg.seed()};
  out.csv = "t,h,dist,lhs,rhs,ratio,mode,dual\n";
  bool all_exact = true;
  for (const auto& r : sw.rows) {
    out.csv += fmt(r.t) + "," + std::to_string(r.h) + "," + fmt(r.dist) + "," + fmt(r.lhs) + "," + fmt(r.rhs) + "," +
               fmt(r.ratio) + "," + to_string(r.mode) + "," + (r.dual ? "1" : "0") + "\n";
    all_exact = all_exact && r.mode == FlowMode::ExactOrthogonal;
  }
  const auto& s = sw.summary;
  // The bound is a theorem for forms already in normal form; elsewhere the
  // empirical constant is reported without a verdict.
  const bool checked = good && all_exact;
  out.pass = !checked || (s.violations == 0 && s.dual_violations == 0);
  out.summary["checked"] = checked;
  out.summary["samples"] = s.samples;
  out.summary["violations"] = s.violations;
  out.summary["max_ratio"] = s.max_ratio;
  out.summary["c_emp"] = s.c_emp;
  out.summary["dual_rows"] = s.dual_rows;
  out.summary["dual_violations"] = s.dual_violations;
  out.summary["max_dual_norm"] = s.max_dual_norm;
  out.summary["constants"] = {{"c0", consts.c0}, {"c1", consts.c1}, {"c_big", consts.c_big}, {"c_small", consts.c_small}};
  return out;
}

inline Output run_exponent(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Int h = cfg.integer("h_max");
  const auto n = static_cast<std::size_t>(cfg.integer("points"));
  const double tol = cfg.real("tolerance");
  const auto table = detail::record_table(ctx, h);
  struct Row {
    RealProjectivePoint x;
    std::string status;
    std::size_t records = 0;
    ExponentEstimate est;
  };
  const auto rows = detail::parallel_map<Row>(n, [&](std::size_t i) {
    Row r{detail::sample_for(cfg, i), "ok", 0, {}};
    try {
      const auto rec = detail::records_for(cfg.form, r.x, h, table ? &*table : nullptr);
      r.records = rec.size();
      r.est = exponent(rec, h);
      if (r.est.infinite) r.status = "infinite";
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::TooFewRecords) r.status = "too-few-records";
      else if (e.kind() == ErrorKind::NoRationalPoints) r.status = "no-records";
      else throw;
    }
    return r;
  });
  Output out;
  out.seeds = {cfg.seed()};
  out.csv = "index,status,records,beta_hat,intercept,sample_count," + coord_header("x", cfg.form.size()) + "\n";
  std::size_t nonempty = 0, fitted = 0, below = 0, too_few = 0;
  double sum = 0, lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = rows[i];
    const bool ok = r.status == "ok";
    out.csv += std::to_string(i) + "," + r.status + "," + std::to_string(r.records) + "," +
               (ok ? fmt(r.est.beta_hat) : "") + "," + (ok ? fmt(r.est.intercept) : "") + "," +
               std::to_string(r.est.sample_count) + "," + join_reals(r.x.coords()) + "\n";
    nonempty += r.records > 0;
    too_few += r.status == "too-few-records";
    if (!ok) continue;
    ++fitted;
    sum += r.est.beta_hat;
    lo = std::min(lo, r.est.beta_hat);
    hi = std::max(hi, r.est.beta_hat);
    below += r.est.beta_hat < 1 - tol;
  }
  const double mean = fitted ? sum / static_cast<double>(fitted) : 0;
  const bool mean_ok = fitted > 0 && mean >= 1 - tol && mean <= 1 + tol;
  out.pass = nonempty == n && mean_ok && below == 0;
  out.summary["points"] = n;
  out.summary["nonempty"] = nonempty;
  out.summary["fitted"] = fitted;
  out.summary["too_few_records"] = too_few;
  out.summary["mean_beta_hat"] = mean;
  out.summary["extremes"] = {{"min_beta_hat", fitted ? lo : 0.0}, {"max_beta_hat", hi}};
  out.summary["window"] = {1 - tol, 1 + tol};
  out.summary["mean_in_window"] = mean_ok;
  out.summary["below_floor"] = below;
  out.summary["pass_count"] = fitted - below;
  out.summary["fail_count"] = below + (n - nonempty);
  return out;
}

inline Output run_dirichlet(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Int h = cfg.integer("h_max");
  const auto n = static_cast<std::size_t>(cfg.integer("points"));
  const auto table = detail::record_table(ctx, h);
  struct Row {
    std::vector<ApproxRecord> records;
    std::optional<double> c;
  };
  const auto rows = detail::parallel_map<Row>(n, [&](std::size_t i) {
    Row r;
    try {
      r.records = detail::records_for(cfg.form, detail::sample_for(cfg, i), h, table ? &*table : nullptr);
      r.c = dirichlet_constant(r.records);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NoRationalPoints && e.kind() != ErrorKind::DegenerateRational) throw;
    }
    return r;
  });
  Output out;
  out.seeds = {cfg.seed()};
  out.csv = "point,k,h,d,quality\n";
  std::vector<double> cs;
  std::size_t nonempty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < rows[i].records.size(); ++k) {
      const auto& r = rows[i].records[k];
      out.csv += std::to_string(i) + "," + std::to_string(k) + "," + std::to_string(r.h) + "," + fmt(r.d) + "," +
                 fmt(r.quality) + "\n";
    }
    nonempty += !rows[i].records.empty();
    if (rows[i].c) cs.push_back(*rows[i].c);
  }
  std::sort(cs.begin(), cs.end());
  double mean = 0;
  for (double c : cs) mean += c;
  if (!cs.empty()) mean /= static_cast<double>(cs.size());
  out.pass = nonempty == n && cs.size() == n;
  out.summary["points"] = n;
  out.summary["nonempty"] = nonempty;
  out.summary["degenerate"] = nonempty - cs.size();
  out.summary["pass_count"] = cs.size();
  out.summary["fail_count"] = n - cs.size();
  out.summary["extremes"] = cs.empty() ? json(nullptr) : json{{"min_c_x", cs.front()}, {"max_c_x", cs.back()}};
  out.summary["c_x"] = cs.empty() ? json(nullptr)
                                  : json{{"min", cs.front()}, {"median", cs[cs.size() / 2]}, {"mean", mean},
                                         {"max", cs.back()}};
  return out;
}

inline Output run_cover(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Int p_lo = cfg.integer("p_lo"), p_hi = cfg.integer("p_hi");
  const double tol = cfg.real("tolerance");
  auto betas = cfg.effective.at("betas").get<std::vector<double>>();
  std::sort(betas.begin(), betas.end());
  const Int h = (Int(1) << (p_hi + 1)) - 1;
  const auto table = ctx.table(h);
  const auto budget = static_cast<std::size_t>(cfg.integer("budget"));
  // The dimension ceiling 1/beta is only claimed for conics.
  const bool ceiling_checked = cfg.form.size() == 3;
  Output out;
  out.csv = "beta,p,points,count,truncated,ratio\n";
  json per = json::array();
  std::vector<double> slopes;
  bool ceiling_ok = true, truncated = false;
  std::size_t under = 0;
  for (double beta : betas) {
    const auto d = cover_diagnostic(cfg.form, table, beta, p_lo, p_hi, budget);
    for (std::size_t i = 0; i < d.levels.size(); ++i) {
      const auto& c = d.levels[i];
      out.csv += fmt(beta) + "," + std::to_string(c.p) + "," + std::to_string(c.points) + "," +
                 std::to_string(c.count) + "," + (c.truncated ? "1" : "0") + "," + fmt(d.ratios[i]) + "\n";
      truncated = truncated || c.truncated;
    }
    const double ceiling = 1 / beta + tol;
    const bool below = !ceiling_checked || d.slope <= ceiling;
    ceiling_ok = ceiling_ok && below;
    under += below;
    slopes.push_back(d.slope);
    per.push_back({{"beta", beta}, {"slope", d.slope}, {"ratios", d.ratios}, {"ceiling", 1 / beta}});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < slopes.size(); ++i) monotone = monotone && slopes[i] <= slopes[i - 1] + 1e-12;
  out.pass = monotone && ceiling_ok;
  out.summary["betas"] = per;
  out.summary["pass_count"] = under;
  out.summary["fail_count"] = betas.size() - under;
  out.summary["extremes"] = {{"min_slope", *std::min_element(slopes.begin(), slopes.end())},
                             {"max_slope", *std::max_element(slopes.begin(), slopes.end())}};
  out.summary["monotone"] = monotone;
  out.summary["ceiling_checked"] = ceiling_checked;
  out.summary["ceiling_ok"] = ceiling_ok;
  out.summary["tolerance"] = tol;
  out.summary["truncated"] = truncated;
  out.summary["table_h_max"] = h;
  return out;
}

inline Output run_game(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto table = ctx.table(cfg.integer("h_max"));
  const auto consts = working_constants(cfg.form);
  GameConfig gc;
  gc.beta = cfg.real("beta");
  gc.rounds = cfg.integer("rounds");
  gc.rho0 = cfg.real("rho0");
  gc.slice = cfg.slice();
  const auto games = static_cast<std::size_t>(cfg.integer("games"));
  const auto strategies = cfg.effective.at("strategies").get<std::vector<std::string>>();
  const bool save = cfg.effective.at("save_transcripts").get<bool>();
  struct Row {
    std::string status = "ok";
    std::string error;
    std::optional<BACertificate> cert;
    TranscriptCheck check;
    std::size_t subspace = 0, ball = 0, closure_dim = 0;
    json transcript;
  };
  Output out;
  for (std::size_t g = 0; g < games; ++g) out.seeds.push_back(cfg.seed() + g);
  out.csv = "strategy,seed,status,valid,min_quality,h_used,branch_checked,branch_violations,nesting_violations,"
            "avoidance_violations,subspace_deletions,ball_deletions,max_closure_dim," +
            coord_header("x", cfg.form.size()) + "\n";
  json per = json::object(), transcripts = json::object();
  std::size_t total_invalid = 0, total_closure = 0, total_branch = 0, total_other = 0;
  for (const auto& name : strategies) {
    gc.strategy = bob_strategy_from_string(name);
    const auto rows = detail::parallel_map<Row>(games, [&](std::size_t g) {
      Row r;
      auto c = gc;
      c.seed = out.seeds[g];
      try {
        const auto res = play(cfg.form, table, consts, c);
        r.cert = certify_ba(res, table, gc.beta, consts);
        r.check = check_transcript(res, table, consts, gc.beta);
        r.subspace = res.subspace_deletions;
        r.ball = res.ball_deletions;
        r.closure_dim = res.max_closure_dim;
        if (save) r.transcript = transcript_to_json(res.transcript);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::ClosureFailure) r.status = "closure-failure";
        else if (e.kind() == ErrorKind::NoFeasibleBall) r.status = "no-feasible-ball";
        else throw;
        r.error = e.what();
      }
      return r;
    });
    std::size_t valid = 0, closure = 0, branch = 0, other = 0;
    double min_q = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < games; ++g) {
      const auto& r = rows[g];
      out.csv += name + "," + std::to_string(out.seeds[g]) + "," + r.status + ",";
      if (r.cert) {
        out.csv += std::string(r.cert->valid ? "1" : "0") + "," + fmt(r.cert->min_quality) + "," +
                   std::to_string(r.cert->h_used) + "," + std::to_string(r.check.branch_checked) + "," +
                   std::to_string(r.check.branch_violations) + "," + std::to_string(r.check.nesting_violations) + "," +
                   std::to_string(r.check.avoidance_violations) + "," + std::to_string(r.subspace) + "," +
                   std::to_string(r.ball) + "," + std::to_string(r.closure_dim) + "," + join_reals(r.cert->x.coords());
        valid += r.cert->valid;
        min_q = std::min(min_q, r.cert->min_quality);
        branch += r.check.branch_violations;
        other += r.check.nesting_violations + r.check.avoidance_violations;
      } else {
        out.csv += "0,,,,,,,,,";
      }
      out.csv += "\n";
      closure += r.status == "closure-failure";
      other += r.status == "no-feasible-ball";
      if (save) transcripts[name][std::to_string(out.seeds[g])] = r.transcript;
    }
    per[name] = {{"games", games},          {"valid", valid},          {"invalid", games - valid},
                 {"closure_failures", closure}, {"branch_violations", branch}, {"other_failures", other},
                 {"min_quality", std::isfinite(min_q) ? json(min_q) : json(nullptr)}};
    total_invalid += games - valid;
    total_closure += closure;
    total_branch += branch;
    total_other += other;
  }
  out.pass = total_invalid == 0 && total_closure == 0 && total_branch == 0 && total_other == 0;
  out.summary["c0"] = consts.c_small * gc.beta * gc.beta;
  out.summary["strategies"] = per;
  out.summary["pass_count"] = games * strategies.size() - total_invalid;
  out.summary["fail_count"] = total_invalid;
  out.summary["closure_failures"] = total_closure;
  out.summary["branch_violations"] = total_branch;
  out.summary["table_h_max"] = table.h_max();
  if (save) out.extra_files["transcripts.json"] = transcripts.dump() + "\n";
  return out;
}

inline Output dispatch(const Context& ctx) {
  const auto& e = ctx.cfg.experiment;
  if (e == "enumerate") return run_enumerate(ctx);
  if (e == "qrank") return run_qrank(ctx);
  if (e == "normalize") return run_normalize(ctx);
  if (e == "simplex-verify") return run_simplex(ctx, false);
  if (e == "strong-simplex-verify") return run_simplex(ctx, true);
  if (e == "dani-verify") return run_dani(ctx);
  if (e == "exponent") return run_exponent(ctx);
  if (e == "dirichlet") return run_dirichlet(ctx);
  if (e == "cover-count") return run_cover(ctx);
  if (e == "game") return run_game(ctx);
  throw Error(ErrorKind::Config, "unknown experiment '" + e + "'");
}

// ---------------------------------------------------------------- run

struct RunOptions {
  fs::path out_dir = "results";
  std::optional<Int> h_max;
  std::optional<Int> seed;
  std::string source = "config";  // name used in diagnostics
  fs::path base_dir = ".";        // for relative form_file paths
};

struct RunResult {
  int exit_code = 0;  // 0 all checks pass, 1 a check failed, 2 usage or config error
  fs::path dir;
  json summary;
  std::string message;
};

namespace detail {

// Exclusive lock file in the results directory, removed on scope exit.
class DirLock {
 public:
  explicit DirLock(fs::path p) : path_(std::move(p)) {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw Error(ErrorKind::Config, "results directory is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

inline bool usage_error(ErrorKind k) {
  return k == ErrorKind::Config || k == ErrorKind::InvalidForm || k == ErrorKind::InvalidArgument ||
         k == ErrorKind::DimensionMismatch || k == ErrorKind::BasePointInvalid || k == ErrorKind::EmptyIntersection;
}

}  // namespace detail

inline std::string config_hash(const Config& cfg) { return hex64(fnv1a(cfg.experiment + "\n" + cfg.effective.dump())); }

/// Validates, runs and persists one experiment. Library errors other than
/// configuration problems count as a failed check.
inline RunResult run(const std::string& experiment, json raw, const std::string& text, const RunOptions& opt,
                     std::ostream& log) {
  RunResult res;
  try {
    raw = unwrap_manifest(raw);
    if (opt.h_max) raw["h_max"] = *opt.h_max;
    if (opt.seed) raw["seed"] = *opt.seed;
    const Config cfg = validate_config(experiment, raw, text, opt.source, opt.base_dir);
    res.dir = opt.out_dir / experiment / config_hash(cfg);
    fs::create_directories(res.dir);
    const detail::DirLock lock(res.dir / ".lock");
    const Context ctx{cfg, opt.out_dir / "cache", log};
    Output out = dispatch(ctx);
    out.summary["experiment"] = experiment;
    out.summary["pass"] = out.pass;
    const json manifest{{"experiment", experiment},
                        {"config", cfg.effective},
                        {"config_hash", config_hash(cfg)},
                        {"library_version", kLibraryVersion},
                        {"seeds", out.seeds},
                        {"outputs", {"data.csv", "summary.json"}}};
    detail::write_file(res.dir / "data.csv", out.csv);
    detail::write_file(res.dir / "summary.json", out.summary.dump(2) + "\n");
    detail::write_file(res.dir / "manifest.json", manifest.dump(2) + "\n");
    for (const auto& [name, body] : out.extra_files) detail::write_file(res.dir / name, body);
    res.summary = out.summary;
    res.exit_code = out.pass ? 0 : 1;
    res.message = std::string(out.pass ? "PASS" : "FAIL") + " " + experiment + " -> " + res.dir.string();
  } catch (const Error& e) {
    res.exit_code = detail::usage_error(e.kind()) ? 2 : 1;
    res.message = e.what();
  } catch (const fs::filesystem_error& e) {
    res.exit_code = 2;
    res.message = e.what();
  }
  return res;
}

/// Reads a config (or manifest) file and runs it.
inline RunResult run_file(const std::string& experiment, const fs::path& config_path, RunOptions opt,
                          std::ostream& log) {
  std::ifstream in(config_path);
  if (!in) return {2, {}, {}, "cannot open config " + config_path.string()};
  std::stringstream ss;
  ss << in.rdbuf();
  opt.source = config_path.string();
  opt.base_dir = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  try {
    return run(experiment, parse_config_text(ss.str(), opt.source), ss.str(), opt, log);
  } catch (const Error& e) {
    return {2, {}, {}, e.what()};
  }
}

}  // namespace qdioph::experiment
