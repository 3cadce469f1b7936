#pragma once

// Command implementations behind the harqir tool. Each command takes a
// parsed RunConfig and writes one table (CSV or JSON) to a stream; the
// return value is the process exit code.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <tuple>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "harqir/channel.hpp"
#include "harqir/error.hpp"
#include "harqir/gammafit.hpp"
#include "harqir/json_io.hpp"
#include "harqir/metrics.hpp"
#include "harqir/montecarlo.hpp"
#include "harqir/optimizer.hpp"

namespace harq::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { ok = 0, config_error = 2, numeric_error = 3, validation_failed = 4, infeasible = 5 };

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct ChannelConfig {
  bool homogeneous = true;
  double rho = 0.5;
  double gamma_t_db = 10.0;
  int rounds = 4;
  double two_sigma_sq = 1.0;
  ChannelSpec spec;  // explicit per-round description when !homogeneous
};

struct NumericsConfig {
  int n_q = 64;
  int n_t = 128;
  int degree_cap = kDegreeCap;
  double epsilon_degree = 0.01;
  double phi2_guard = 30.0;
  double psi2_peak_fraction = 0.4;
};

struct Axis {
  std::string name;
  std::vector<double> values;
};

struct OptimizeConfig {
  double rate_min = 1e-3;
  double rate_max = 20.0;
  double tolerance = 1e-3;
  double baseline_db = 0.0;
};

struct DiversityConfig {
  std::vector<double> snr_db;  // default 20..40 dB in 2 dB steps
};

struct ValidateConfig {
  double z = 3.0;
  double ks_tolerance = 0.01;
  double min_outage = 1e-6;  // analytic outages below this are not compared with MC
  std::uint64_t sampler_samples = 1'000'000;
};

struct RunConfig {
  ChannelConfig channel;
  int k = 0;  // fit: rounds to fit, 0 = all
  double rate = 2.0;
  double epsilon = 0.01;  // outage target when not swept
  NumericsConfig numerics;
  SimConfig mc;
  std::vector<Axis> axes;
  OptimizeConfig optimize;
  DiversityConfig diversity;
  ValidateConfig validate;
  std::string out_path;
  std::string format = "csv";
  json canonical;  // the effective configuration, hashed into the metadata

  AnalysisConfig analysis() const {
    AnalysisConfig a;
    a.moments.n_q = numerics.n_q;
    a.moments.n_t = numerics.n_t;
    a.degree_cap = numerics.degree_cap;
    a.epsilon = numerics.epsilon_degree;
    a.limits.phi2_max_argument = numerics.phi2_guard;
    a.limits.psi2_peak_fraction = numerics.psi2_peak_fraction;
    return a;
  }
};

// ---------------------------------------------------------------- parsing

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ParameterError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config key '") + key + "': " + e.what());
  }
}

inline std::vector<double> axis_values(const json& a, const std::string& name) {
  if (a.contains("values")) {
    std::vector<double> v;
    read(a, "values", v);
    if (v.empty()) throw ParameterError("axis '" + name + "': values must not be empty");
    return v;
  }
  double start = 0.0, stop = 0.0;
  int steps = 0;
  std::string scale = "linear";
  if (!a.contains("start") || !a.contains("stop") || !a.contains("steps"))
    throw ParameterError("axis '" + name + "': need either values or start/stop/steps");
  read(a, "start", start);
  read(a, "stop", stop);
  read(a, "steps", steps);
  read(a, "scale", scale);
  if (steps < 2) throw ParameterError("axis '" + name + "': steps must be >= 2");
  std::vector<double> v;
  if (scale == "linear") {
    for (int i = 0; i < steps; ++i) v.push_back(start + (stop - start) * i / (steps - 1));
  } else if (scale == "log") {
    if (!(start > 0.0 && stop > 0.0)) throw ParameterError("axis '" + name + "': log scale needs positive bounds");
    for (int i = 0; i < steps; ++i) v.push_back(start * std::pow(stop / start, double(i) / (steps - 1)));
  } else {
    throw ParameterError("axis '" + name + "': scale must be linear or log");
  }
  return v;
}

}  // namespace detail

/// Builds a RunConfig from the JSON config file contents. Unknown keys are
/// rejected so that typos do not silently fall back to defaults.
inline RunConfig parse_config(const json& j) {
  RunConfig c;
  detail::check_keys(j, {"channel", "K", "rate", "epsilon", "numerics", "mc", "sweep", "optimize", "diversity",
                         "validate", "output"},
                     "config");
  if (j.contains("channel")) {
    const auto& ch = j.at("channel");
    detail::check_keys(ch, {"rho", "gamma_t_db", "M", "two_sigma_sq", "sigma", "lambda", "snr_db"}, "channel");
    if (ch.contains("sigma") || ch.contains("lambda") || ch.contains("snr_db")) {
      c.channel.homogeneous = false;
      c.channel.spec = channel_from_json(ch);
      c.channel.rounds = c.channel.spec.rounds;
    } else {
      detail::read(ch, "rho", c.channel.rho);
      detail::read(ch, "gamma_t_db", c.channel.gamma_t_db);
      detail::read(ch, "M", c.channel.rounds);
      detail::read(ch, "two_sigma_sq", c.channel.two_sigma_sq);
      harq::detail::require(c.channel.rho >= 0.0 && c.channel.rho <= 1.0, "channel.rho must be in [0, 1]");
      harq::detail::require(c.channel.rounds >= 1 && c.channel.rounds <= kMaxCompositionParts,
                            "channel.M must be in [1, 8]");
      harq::detail::require(c.channel.two_sigma_sq > 0.0, "channel.two_sigma_sq must be > 0");
    }
  }
  detail::read(j, "K", c.k);
  detail::read(j, "rate", c.rate);
  detail::read(j, "epsilon", c.epsilon);
  harq::detail::require(c.rate > 0.0, "rate must be > 0");
  harq::detail::require(c.epsilon > 0.0 && c.epsilon <= 1.0, "epsilon must be in (0, 1]");
  harq::detail::require(c.k >= 0 && c.k <= c.channel.rounds, "K must be in [0, M]");
  if (j.contains("numerics")) {
    const auto& n = j.at("numerics");
    detail::check_keys(n, {"n_q", "n_t", "degree_cap", "epsilon_degree", "phi2_guard", "psi2_peak_fraction"},
                       "numerics");
    detail::read(n, "n_q", c.numerics.n_q);
    detail::read(n, "n_t", c.numerics.n_t);
    detail::read(n, "degree_cap", c.numerics.degree_cap);
    detail::read(n, "epsilon_degree", c.numerics.epsilon_degree);
    detail::read(n, "phi2_guard", c.numerics.phi2_guard);
    detail::read(n, "psi2_peak_fraction", c.numerics.psi2_peak_fraction);
  }
  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    detail::check_keys(m, {"samples", "seed", "batch", "lanes", "cdf_cap"}, "mc");
    detail::read(m, "samples", c.mc.samples);
    detail::read(m, "seed", c.mc.seed);
    detail::read(m, "batch", c.mc.batch);
    detail::read(m, "lanes", c.mc.lanes);
    detail::read(m, "cdf_cap", c.mc.cdf_cap);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::check_keys(s, {"axes"}, "sweep");
    if (s.contains("axes")) {
      if (!s.at("axes").is_array()) throw ParameterError("sweep.axes must be an array");
      std::set<std::string> seen;
      for (const auto& a : s.at("axes")) {
        detail::check_keys(a, {"name", "values", "start", "stop", "steps", "scale"}, "sweep axis");
        std::string name;
        detail::read(a, "name", name);
        static const std::set<std::string> known{"gamma_t_db", "rho", "M", "rate", "epsilon"};
        if (!known.count(name)) throw ParameterError("sweep axis '" + name + "' is not a known parameter");
        if (!seen.insert(name).second) throw ParameterError("sweep axis '" + name + "' given twice");
        c.axes.push_back({name, detail::axis_values(a, name)});
      }
    }
  }
  if (j.contains("optimize")) {
    const auto& o = j.at("optimize");
    detail::check_keys(o, {"rate_min", "rate_max", "tolerance", "baseline_db"}, "optimize");
    detail::read(o, "rate_min", c.optimize.rate_min);
    detail::read(o, "rate_max", c.optimize.rate_max);
    detail::read(o, "tolerance", c.optimize.tolerance);
    detail::read(o, "baseline_db", c.optimize.baseline_db);
  }
  if (j.contains("diversity")) {
    const auto& d = j.at("diversity");
    detail::check_keys(d, {"snr_db"}, "diversity");
    if (d.contains("snr_db")) {
      detail::check_keys(d.at("snr_db"), {"values", "start", "stop", "steps", "scale"}, "diversity.snr_db");
      c.diversity.snr_db = detail::axis_values(d.at("snr_db"), "snr_db");
    }
  }
  if (c.diversity.snr_db.empty())
    for (int db = 20; db <= 40; db += 2) c.diversity.snr_db.push_back(db);
  if (j.contains("validate")) {
    const auto& v = j.at("validate");
    detail::check_keys(v, {"z", "ks_tolerance", "min_outage", "sampler_samples"}, "validate");
    detail::read(v, "z", c.validate.z);
    detail::read(v, "ks_tolerance", c.validate.ks_tolerance);
    detail::read(v, "min_outage", c.validate.min_outage);
    detail::read(v, "sampler_samples", c.validate.sampler_samples);
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    detail::check_keys(o, {"path", "format"}, "output");
    detail::read(o, "path", c.out_path);
    detail::read(o, "format", c.format);
  }
  c.canonical = j;
  c.canonical.erase("output");
  return c;
}

/// Command-line overrides, applied on top of the file.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  int jobs = 1;
};

inline void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.out) c.out_path = *o.out;
  if (o.format) c.format = *o.format;
  if (o.seed) {
    c.mc.seed = *o.seed;
    c.canonical["mc"]["seed"] = *o.seed;
  }
  if (o.samples) {
    c.mc.samples = *o.samples;
    c.canonical["mc"]["samples"] = *o.samples;
  }
  c.mc.jobs = std::max(o.jobs, 1);
  if (c.format != "csv" && c.format != "json") throw ParameterError("format must be csv or json");
  c.mc.validate();
}

// ---------------------------------------------------------------- output

using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<std::pair<std::string, std::string>> metadata(const RunConfig& c, const std::string& command) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(c.canonical.dump())));
  std::ostringstream num;
  num << "n_q=" << c.numerics.n_q << " n_t=" << c.numerics.n_t << " degree_cap=" << c.numerics.degree_cap
      << " epsilon_degree=" << c.numerics.epsilon_degree << " phi2_guard=" << c.numerics.phi2_guard;
  return {{"tool", std::string("harqir ") + kVersion},
          {"command", command},
          {"seed", std::to_string(c.mc.seed)},
          {"samples", std::to_string(c.mc.samples)},
          {"rng", kRngName},
          {"lanes", std::to_string(c.mc.lanes)},
          {"numerics", num.str()},
          {"config_hash", hash}};
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

inline void write_table(std::ostream& os, const Table& t, const RunConfig& c, const std::string& command) {
  const auto meta = metadata(c, command);
  if (c.format == "json") {
    ordered_json j;
    ordered_json m = ordered_json::object();
    for (const auto& [k, v] : meta) m[k] = v;
    j["metadata"] = m;
    j["columns"] = t.columns;
    ordered_json rows = ordered_json::array();
    for (const auto& r : t.rows) {
      ordered_json o = ordered_json::object();
      for (std::size_t i = 0; i < t.columns.size(); ++i) {
        const auto& cell = r[i];
        if (std::holds_alternative<double>(cell)) {
          const double v = std::get<double>(cell);
          o[t.columns[i]] = std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
        } else if (std::holds_alternative<long long>(cell)) {
          o[t.columns[i]] = std::get<long long>(cell);
        } else if (std::holds_alternative<std::string>(cell)) {
          o[t.columns[i]] = std::get<std::string>(cell);
        } else {
          o[t.columns[i]] = nullptr;
        }
      }
      rows.push_back(o);
    }
    j["rows"] = rows;
    os << j.dump(2) << "\n";
    return;
  }
  for (const auto& [k, v] : meta) os << "# " << k << ": " << v << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) os << ",";
      const auto& cell = r[i];
      if (std::holds_alternative<double>(cell))
        os << format_double(std::get<double>(cell));
      else if (std::holds_alternative<long long>(cell))
        os << std::get<long long>(cell);
      else if (std::holds_alternative<std::string>(cell))
        os << csv_escape(std::get<std::string>(cell));
    }
    os << "\n";
  }
}

/// Runs f(0..n-1) on `jobs` threads; results come back in index order.
template <class F>
auto parallel_map(std::size_t n, int jobs, F&& f) {
  using R = decltype(f(std::size_t{0}));
  std::vector<R> out(n);
  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) out[i] = f(i);
    });
  for (auto& th : pool) th.join();
  return out;
}

// Cartesian grid over the configured axes; the first axis varies slowest.
// Parameters that are not swept take their scalar config value.
inline std::vector<std::map<std::string, double>> grid(const RunConfig& c, const std::set<std::string>& allowed) {
  std::map<std::string, double> base{{"gamma_t_db", c.channel.gamma_t_db},
                                     {"rho", c.channel.rho},
                                     {"M", static_cast<double>(c.channel.rounds)},
                                     {"rate", c.rate},
                                     {"epsilon", c.epsilon}};
  for (const auto& a : c.axes)
    if (!allowed.count(a.name)) throw ParameterError("axis '" + a.name + "' does not apply to this command");
  if (!c.channel.homogeneous)
    for (const auto& a : c.axes)
      if (a.name == "rho" || a.name == "gamma_t_db" || a.name == "M")
        throw ParameterError("axis '" + a.name + "' needs the homogeneous channel shorthand");
  std::vector<std::map<std::string, double>> cells{base};
  for (const auto& a : c.axes) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& cell : cells)
      for (double v : a.values) {
        auto x = cell;
        x[a.name] = v;
        next.push_back(x);
      }
    cells = std::move(next);
  }
  return cells;
}

// M = 1 makes both bounds equal to the exact outage; they come out of
// different formulas, so allow for rounding.
inline constexpr double kBoundSlack = 1e-9;

inline bool within_bounds(double p, const OutageBounds& b) {
  return b.lower.value <= p * (1.0 + kBoundSlack) && p <= b.upper.value * (1.0 + kBoundSlack);
}

inline int cell_rounds(double m) {
  const int r = static_cast<int>(std::lround(m));
  if (r < 1 || r > kMaxCompositionParts || std::abs(m - r) > 1e-9)
    throw ParameterError("M must be an integer in [1, 8]");
  return r;
}

inline LinkAnalyzer make_link(const RunConfig& c, const std::map<std::string, double>& cell) {
  if (!c.channel.homogeneous) return LinkAnalyzer(c.channel.spec, c.analysis());
  return LinkAnalyzer::homogeneous(cell.at("rho"), cell.at("gamma_t_db"), cell_rounds(cell.at("M")), c.analysis(),
                                   c.channel.two_sigma_sq);
}

// ---------------------------------------------------------------- commands

/// Fit artifact for rounds 1..K: per-K mixture plus diagnostics.
inline int cmd_fit(const RunConfig& c, std::ostream& os) {
  if (c.channel.homogeneous && c.channel.rho >= 1.0)
    throw ParameterError("fit: rho = 1 has no fitted approximation; use 'sweep' with rho = 1, which applies the "
                         "fully correlated closed form");
  const ChannelSpec spec = c.channel.homogeneous
                               ? ChannelSpec::homogeneous(c.channel.rho, c.channel.gamma_t_db, c.channel.rounds,
                                                          c.channel.two_sigma_sq)
                               : c.channel.spec;
  const int top = c.k == 0 ? spec.rounds : c.k;
  const auto a = c.analysis();
  ordered_json doc;
  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : metadata(c, "fit")) meta[k] = v;
  doc["metadata"] = meta;
  doc["channel"] = channel_to_json(spec);
  ordered_json fits = ordered_json::array();
  auto per_k = parallel_map(static_cast<std::size_t>(top), c.mc.jobs, [&](std::size_t i) {
    const int k = static_cast<int>(i) + 1;
    MomentConfig mc = a.moments;
    MomentEngine engine(spec, k, mc);
    DegreeSelection info;
    const auto fit = fit_mutual_info(engine, a.degree_cap, a.epsilon, &info);
    ordered_json f;
    f["K"] = k;
    f["fit"] = approx_to_json(fit);
    ordered_json d;
    d["moments"] = std::vector<double>(engine.moments().begin(), engine.moments().end());
    d["delta"] = info.delta;
    d["r"] = info.ratio;
    d["selected_N"] = fit.degree;
    d["degree_cap_used"] = info.cap_used;
    d["orthogonality_residual"] = fit.ortho.orthogonality_residual;
    d["kappa_sum"] = fit.kappa_sum;
    d["lagrange_multiplier"] = fit.lagrange;
    f["diagnostics"] = d;
    return f;
  });
  for (auto& f : per_k) fits.push_back(std::move(f));
  doc["fits"] = fits;
  os << doc.dump(2) << "\n";
  return ok;
}

inline int cmd_sweep(const RunConfig& c, std::ostream& os) {
  const auto cells = grid(c, {"gamma_t_db", "rho", "M", "rate"});
  Table t;
  t.columns = {"gamma_t_db", "rho", "M", "rate", "outage", "avg_n", "ltat", "lower_bound", "upper_bound", "error"};
  // Fits do not depend on the rate: build each distinct link once.
  std::map<std::tuple<double, double, double>, std::size_t> link_index;
  std::vector<std::map<std::string, double>> link_cells;
  for (const auto& cell : cells) {
    const auto key = std::make_tuple(cell.at("gamma_t_db"), cell.at("rho"), cell.at("M"));
    if (link_index.emplace(key, link_cells.size()).second) link_cells.push_back(cell);
  }
  struct Built {
    std::optional<LinkAnalyzer> link;
    std::string error;
  };
  auto links = parallel_map(link_cells.size(), c.mc.jobs, [&](std::size_t i) {
    Built b;
    try {
      b.link.emplace(make_link(c, link_cells[i]));
    } catch (const std::exception& e) {
      b.error = e.what();
    }
    return b;
  });
  SimConfig fallback = c.mc;
  fallback.jobs = 1;
  auto rows = parallel_map(cells.size(), c.mc.jobs, [&](std::size_t i) {
    const auto& cell = cells[i];
    const auto& b = links[link_index.at(std::make_tuple(cell.at("gamma_t_db"), cell.at("rho"), cell.at("M")))];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<Cell> r{cell.at("gamma_t_db"), cell.at("rho"), static_cast<long long>(std::lround(cell.at("M"))),
                        cell.at("rate")};
    if (!b.link) {
      r.insert(r.end(), {nan, nan, nan, nan, nan, b.error});
      return r;
    }
    try {
      const auto m = b.link->metrics(cell.at("rate"));
      const auto bd = b.link->bounds(cell.at("rate"), fallback);
      std::string note;
      for (const auto& w : m.warnings) note += (note.empty() ? "" : "; ") + w;
      const double p = m.outage_per_round.back();
      if (!within_bounds(p, bd))
        note += std::string(note.empty() ? "" : "; ") + "approximation outside the outage bounds";
      if (bd.lower.monte_carlo || bd.upper.monte_carlo)
        note += std::string(note.empty() ? "" : "; ") + "bounds from Monte-Carlo (series guard)";
      r.insert(r.end(), {m.outage_per_round.back(), m.avg_transmissions, m.ltat, bd.lower.value, bd.upper.value,
                         note});
    } catch (const std::exception& e) {
      r.insert(r.end(), {nan, nan, nan, nan, nan, std::string(e.what())});
    }
    return r;
  });
  t.rows = std::move(rows);
  write_table(os, t, c, "sweep");
  return ok;
}

inline int cmd_optimize(const RunConfig& c, std::ostream& os) {
  const auto cells = grid(c, {"gamma_t_db", "rho", "M", "epsilon"});
  Table t;
  t.columns = {"gamma_t_db", "rho", "M", "epsilon", "rate_opt", "ltat_opt", "outage_at_opt", "feasible_boundary",
               "baseline_rate", "ltat_baseline", "error"};
  RateDesignProblem base;
  base.rate_min = c.optimize.rate_min;
  base.rate_max = c.optimize.rate_max;
  base.tolerance = c.optimize.tolerance;
  struct Out {
    std::vector<Cell> row;
    bool infeasible = false;
  };
  auto solve = [&](const std::map<std::string, double>& cell) {
    RateDesignProblem p = base;
    p.epsilon = cell.at("epsilon");
    return optimize_rate(p, make_link(c, cell));
  };
  auto results = parallel_map(cells.size(), c.mc.jobs, [&](std::size_t i) {
    const auto& cell = cells[i];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Out o;
    o.row = {cell.at("gamma_t_db"), cell.at("rho"), static_cast<long long>(std::lround(cell.at("M"))),
             cell.at("epsilon")};
    try {
      const auto s = solve(cell);
      // Constant-rate reference: the optimum found at the baseline SNR.
      auto base_cell = cell;
      base_cell["gamma_t_db"] = c.optimize.baseline_db;
      double base_rate = nan, base_ltat = nan;
      std::string note;
      try {
        base_rate = solve(base_cell).rate_opt;
        const auto bm = make_link(c, cell).metrics(base_rate);
        base_ltat = bm.ltat;
        if (bm.outage_per_round.back() > cell.at("epsilon")) note = "baseline rate violates the outage target here";
      } catch (const InfeasibleError& e) {
        note = std::string("baseline infeasible: ") + e.what();
      }
      o.row.insert(o.row.end(), {s.rate_opt, s.ltat_opt, s.outage_at_opt, s.feasible_boundary, base_rate, base_ltat,
                                 note});
    } catch (const InfeasibleError& e) {
      o.infeasible = true;
      o.row.insert(o.row.end(), {nan, nan, e.min_outage(), nan, nan, nan,
                                 std::string("infeasible: ") + e.what()});
    } catch (const std::exception& e) {
      o.row.insert(o.row.end(), {nan, nan, nan, nan, nan, nan, std::string(e.what())});
    }
    return o;
  });
  bool any_infeasible = false;
  for (auto& r : results) {
    any_infeasible = any_infeasible || r.infeasible;
    t.rows.push_back(std::move(r.row));
  }
  write_table(os, t, c, "optimize");
  return any_infeasible ? infeasible : ok;
}

inline int cmd_diversity(const RunConfig& c, std::ostream& os) {
  if (!c.channel.homogeneous) throw ParameterError("diversity: needs the homogeneous channel shorthand");
  const auto cells = grid(c, {"rho", "M", "rate"});
  Table t;
  t.columns = {"M", "rho", "rate", "snr_db_min", "snr_db_max", "method", "lower_slope", "upper_slope", "diversity",
               "expected", "error"};
  const auto a = c.analysis();
  auto rows = parallel_map(cells.size(), c.mc.jobs, [&](std::size_t i) {
    const auto& cell = cells[i];
    const int m = cell_rounds(cell.at("M"));
    const double rho = cell.at("rho");
    std::vector<Cell> r{static_cast<long long>(m), rho, cell.at("rate"), c.diversity.snr_db.front(),
                        c.diversity.snr_db.back(), std::string(rho >= 1.0 ? "closed_form" : "bounds")};
    try {
      const auto d = homogeneous_diversity(rho, m, cell.at("rate"), c.diversity.snr_db, c.channel.two_sigma_sq,
                                           a.limits);
      std::string note;
      for (const auto& w : d.warnings) note += (note.empty() ? "" : "; ") + w;
      r.insert(r.end(), {d.lower_slope, d.upper_slope, d.slope, static_cast<long long>(rho >= 1.0 ? 1 : m), note});
    } catch (const std::exception& e) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      r.insert(r.end(), {nan, nan, nan, static_cast<long long>(rho >= 1.0 ? 1 : m), std::string(e.what())});
    }
    return r;
  });
  t.rows = std::move(rows);
  write_table(os, t, c, "diversity");
  return ok;
}

/// Analytic results against the Monte-Carlo oracle for one link and rate.
inline int cmd_validate(const RunConfig& c, std::ostream& os) {
  if (c.channel.homogeneous && c.channel.rho >= 1.0)
    throw ParameterError("validate: rho = 1 is not representable by the sampler; use rho < 1");
  const ChannelSpec spec = c.channel.homogeneous
                               ? ChannelSpec::homogeneous(c.channel.rho, c.channel.gamma_t_db, c.channel.rounds,
                                                          c.channel.two_sigma_sq)
                               : c.channel.spec;
  const LinkAnalyzer link(spec, c.analysis());
  const int m = spec.rounds;
  const double z = c.validate.z;
  Table t;
  t.columns = {"check", "K", "analytic", "empirical", "std_error", "z_score", "tolerance", "verdict"};
  bool all_ok = true;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto add = [&](const std::string& name, int k, double analytic, double empirical, double se, double tol, bool pass) {
    const double zs = se > 0.0 ? (analytic - empirical) / se : nan;
    t.rows.push_back({name, static_cast<long long>(k), analytic, empirical, se, zs, tol,
                      std::string(pass ? "pass" : "fail")});
    all_ok = all_ok && pass;
  };

  SimConfig scfg = c.mc;
  scfg.samples = std::min<std::uint64_t>(c.validate.sampler_samples, 20'000'000);
  const auto sv = validate_sampler(spec, scfg);
  for (const auto& mg : sv.marginals)
    add("sampler_marginal_ks_pvalue", mg.round, nan, mg.pvalue, nan, 0.01, mg.pvalue > 0.01);
  for (const auto& p : sv.pairs)
    add("sampler_rho_" + std::to_string(p.k) + std::to_string(p.l), 0, p.expected, p.estimate, p.std_error, z,
        std::abs(p.estimate - p.expected) <= z * p.std_error);
  if (sv.chi2_dof > 0) add("sampler_joint_chi2_pvalue", 2, nan, sv.chi2_pvalue, nan, 0.001, sv.joint_ok());

  const auto scan = scan_mutual_info(spec, c.mc, 4);
  for (int k = 1; k <= m; ++k) {
    const auto& fit = link.approx(k);
    std::optional<MomentEngine> engine;
    for (int i = 1; i <= 4; ++i) {
      if (i > fit.degree && !engine) engine.emplace(spec, k, c.analysis().moments);
      const double analytic = i <= fit.degree ? fit.moments[static_cast<std::size_t>(i)] : engine->moment(i);
      const auto e = scan.moment(k, i);
      add("moment_" + std::to_string(i), k, analytic, e.value, e.std_error, z,
          std::abs(analytic - e.value) <= z * e.std_error);
    }
    const auto ks = scan.cdf[static_cast<std::size_t>(k) - 1].ks_distance([&](double x) { return fit.cdf(x); });
    add("cdf_ks_distance", k, nan, ks.distance, nan, c.validate.ks_tolerance, ks.distance <= c.validate.ks_tolerance);
  }
  for (int k = 1; k <= m; ++k) {
    const double p = link.outage(k, c.rate);
    const auto e = empirical_outage(spec, c.rate, k, c.mc);
    if (k == 1) {
      const double exact = exponential_outage(spec.mean_snr(0), c.rate);
      add("outage_single_round_exact", 1, p, exact, 0.0, 1e-6, std::abs(p - exact) <= 1e-6);
    }
    if (p < c.validate.min_outage) {
      t.rows.push_back({std::string("outage"), static_cast<long long>(k), p, e.value, e.std_error, nan, z,
                        std::string("skipped (below min_outage)")});
      continue;
    }
    add("outage", k, p, e.value, e.std_error, z, std::abs(p - e.value) <= z * e.std_error);
  }
  const auto h = empirical_harq_run(spec, c.rate, c.mc);
  const auto met = link.metrics(c.rate);
  add("avg_transmissions", m, met.avg_transmissions, h.avg_transmissions.value, h.avg_transmissions.std_error, z,
      std::abs(met.avg_transmissions - h.avg_transmissions.value) <= z * h.avg_transmissions.std_error);
  add("ltat", m, met.ltat, h.ltat.value, h.ltat.std_error, z, std::abs(met.ltat - h.ltat.value) <= z * h.ltat.std_error);
  const auto bd = link.bounds(c.rate, c.mc);
  const double pm = link.outage(m, c.rate);
  add("sandwich_lower<=analytic", m, pm, bd.lower.value, bd.lower.std_error, 0.0,
      bd.lower.value <= pm * (1.0 + kBoundSlack));
  add("sandwich_analytic<=upper", m, pm, bd.upper.value, bd.upper.std_error, 0.0,
      pm <= bd.upper.value * (1.0 + kBoundSlack));

  write_table(os, t, c, "validate");
  return all_ok ? ok : validation_failed;
}

/// Maps an exception raised by a command to an exit code.
inline int exit_code_for(const std::exception& e) {
  if (const auto* he = dynamic_cast<const Error*>(&e)) {
    switch (he->kind()) {
      case ErrorKind::parameter: return config_error;
      case ErrorKind::infeasible: return infeasible;
      default: return numeric_error;
    }
  }
  if (dynamic_cast<const json::exception*>(&e)) return config_error;
  return numeric_error;
}

}  // namespace harq::cli
