// Command-line front end: config parsing, experiment orchestration, parallel
// trajectory dispatch, and result serialization. Exit codes: 0 success,
// 2 config error, 3 runtime error. Every run writes its data files plus a
// manifest.json (config echo, code version, wall time, output checksums)
// sufficient to re-launch the job; data files are byte-deterministic in
// (config, seed) regardless of worker count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "unravel/analysis.hpp"
#include "unravel/io.hpp"
#include "unravel/mfim.hpp"
#include "unravel/mps.hpp"
#include "unravel/rng.hpp"
#include "unravel/runner.hpp"
#include "unravel/spin_model.hpp"
#include "unravel/statevector.hpp"
#include "unravel/version.hpp"

namespace {

using nlohmann::json;
using namespace unravel;
namespace fs = std::filesystem;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- config plumbing -------------------------------------------------------

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw config_error("config parse failed: " + std::string(e.what()));
  }
  if (!j.is_object()) throw config_error("config root must be a JSON object");
  return j;
}

void check_keys(const json& cfg, std::initializer_list<const char*> allowed) {
  std::set<std::string> ok;
  for (const char* k : allowed) ok.insert(k);
  for (const char* k : {"seed", "trajectories", "workers", "out", "log_bits"})
    ok.insert(k);
  for (auto it = cfg.begin(); it != cfg.end(); ++it)
    if (!ok.count(it.key()))
      throw config_error("unknown config key: '" + it.key() + "'");
}

bool is_intlike(const json& v) {
  return v.is_number_integer() || v.is_number_unsigned();
}

long long get_int(const json& cfg, const std::string& key, long long def,
                  long long lo, long long hi) {
  long long v = def;
  if (cfg.contains(key)) {
    if (!is_intlike(cfg.at(key)))
      throw config_error("config key '" + key + "' must be an integer");
    v = cfg.at(key).get<long long>();
  }
  if (v < lo || v > hi)
    throw config_error("config key '" + key + "' = " + std::to_string(v) +
                       " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
  return v;
}

std::uint64_t get_u64(const json& cfg, const std::string& key,
                      std::uint64_t def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0)
    return static_cast<std::uint64_t>(v.get<long long>());
  throw config_error("config key '" + key +
                     "' must be a non-negative integer");
}

double get_double(const json& cfg, const std::string& key, double def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  if (!v.is_number())
    throw config_error("config key '" + key + "' must be a number");
  return v.get<double>();
}

bool get_bool(const json& cfg, const std::string& key, bool def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  if (!v.is_boolean())
    throw config_error("config key '" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const json& cfg, const std::string& key,
                       const std::string& def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  if (!v.is_string())
    throw config_error("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<long long> get_int_array(const json& cfg, const std::string& key,
                                     std::vector<long long> def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  std::vector<long long> out;
  if (is_intlike(v)) {
    out.push_back(v.get<long long>());
    return out;
  }
  if (!v.is_array() || v.empty())
    throw config_error("config key '" + key +
                       "' must be an integer or non-empty integer array");
  for (const auto& e : v) {
    if (!is_intlike(e))
      throw config_error("config key '" + key + "' has a non-integer entry");
    out.push_back(e.get<long long>());
  }
  return out;
}

std::vector<double> get_num_array(const json& cfg, const std::string& key,
                                  std::vector<double> def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
    return out;
  }
  if (!v.is_array() || v.empty())
    throw config_error("config key '" + key +
                       "' must be a number or non-empty numeric array");
  for (const auto& e : v) {
    if (!e.is_number())
      throw config_error("config key '" + key + "' has a non-numeric entry");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::string> get_str_array(const json& cfg, const std::string& key,
                                       std::vector<std::string> def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
    return out;
  }
  if (!v.is_array() || v.empty())
    throw config_error("config key '" + key +
                       "' must be a string or non-empty string array");
  for (const auto& e : v) {
    if (!e.is_string())
      throw config_error("config key '" + key + "' has a non-string entry");
    out.push_back(e.get<std::string>());
  }
  return out;
}

// Renyi indices appear in configs as positive numbers or the string "inf".
std::string renyi_label(double n) {
  return std::isinf(n) ? "inf" : format_double(n);
}

double renyi_from_label(const std::string& s, const std::string& where) {
  if (s == "inf") return kRenyiInf;
  const double v = parse_double(s, where);
  if (!(v > 0.0)) throw config_error(where + ": index must be positive");
  return v;
}

std::vector<double> get_renyi(const json& cfg, const std::string& key,
                              std::vector<double> def) {
  if (!cfg.contains(key)) return def;
  const json& v = cfg.at(key);
  if (!v.is_array() || v.empty())
    throw config_error("config key '" + key + "' must be a non-empty array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (e.is_string()) {
      out.push_back(renyi_from_label(e.get<std::string>(), key));
    } else if (e.is_number()) {
      const double d = e.get<double>();
      if (!(d > 0.0))
        throw config_error("config key '" + key +
                           "' entries must be positive (or \"inf\")");
      out.push_back(d);
    } else {
      throw config_error("config key '" + key +
                         "' entries must be numbers or \"inf\"");
    }
  }
  return out;
}

json renyi_echo(const std::vector<double>& renyi) {
  json a = json::array();
  for (double n : renyi) {
    if (std::isinf(n))
      a.push_back("inf");
    else
      a.push_back(n);
  }
  return a;
}

std::vector<ChannelKind> get_kinds(const json& cfg, const std::string& key) {
  const auto names = get_str_array(
      cfg, key, {"dephasing", "amplitude_damping", "depolarizing"});
  std::vector<ChannelKind> out;
  for (const auto& s : names) out.push_back(kind_from_name(s));
  return out;
}

double entropy_scale(bool log_bits) {
  return log_bits ? 1.0 / std::log(2.0) : 1.0;
}

std::string fixed4(double x) {
  char b[32];
  std::snprintf(b, sizeof(b), "%.4f", x);
  return std::string(b);
}

// Mean and standard error of the mean (zero for a single sample).
std::pair<double, double> mean_se(const std::vector<double>& v) {
  const auto n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  if (v.size() < 2) return {m, 0.0};
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  var /= (n - 1.0);
  return {m, std::sqrt(var / n)};
}

// ---- output helper ---------------------------------------------------------

struct OutputSink {
  fs::path dir;
  std::map<std::string, std::string> checksums;

  explicit OutputSink(std::string d) : dir(std::move(d)) {}

  void write(const std::string& name, const std::string& content) {
    atomic_write_text(dir / name, content);
    checksums[name] = fnv1a64_hex(content);
    std::cout << "wrote " << (dir / name).string() << "\n";
  }

  void write_table(const std::string& name, const CsvTable& t) {
    write(name, render_csv(t));
  }

  void finish(const std::string& command, const json& echo, double wall_s) {
    write_manifest(dir, command, echo, checksums, wall_s);
    std::cout << "wrote " << (dir / "manifest.json").string() << "\n";
  }
};

// ---- common flags ----------------------------------------------------------

struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  long long trajectories = 0;
  long long workers = 0;
  std::string out;
  bool log_bits = false;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_traj = nullptr;
  CLI::Option* o_workers = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_log = nullptr;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "JSON config; CLI flags override top-level keys");
    o_seed = sub->add_option("--seed", seed, "master seed");
    o_traj = sub->add_option("--trajectories", trajectories,
                             "number of trajectories");
    o_workers = sub->add_option("--workers", workers, "worker threads");
    o_out = sub->add_option("--out", out, "output directory");
    o_log = sub->add_flag("--log-bits", log_bits,
                          "report entropies in log-2 units");
  }

  json merged() const {
    json cfg = load_config_file(config_path);
    if (o_seed->count()) cfg["seed"] = seed;
    if (o_traj->count()) cfg["trajectories"] = trajectories;
    if (o_workers->count()) cfg["workers"] = workers;
    if (o_out->count()) cfg["out"] = out;
    if (o_log->count()) cfg["log_bits"] = log_bits;
    return cfg;
  }
};

// ---- pc2 -------------------------------------------------------------------

int cmd_pc2(const json& cfg) {
  check_keys(cfg, {"kinds", "bases"});
  const auto kinds = get_kinds(cfg, "kinds");
  const auto bases =
      get_str_array(cfg, "bases", {"conventional", "optimized"});
  for (const auto& b : bases)
    if (b != "conventional" && b != "optimized")
      throw config_error("bases entries must be conventional or optimized");
  const std::string out = get_string(cfg, "out", "out/pc2");

  const auto t0 = Clock::now();
  CsvTable t;
  t.header = {"kind", "basis", "pc2"};
  for (ChannelKind kind : kinds) {
    for (const auto& basis : bases) {
      const double pc2 =
          basis == "conventional"
              ? solve_pc2_conventional(kind, 2)
              : solve_pc2(
                    [kind](double p) { return spin_optimized_kraus({kind, p}); },
                    2);
      t.rows.push_back({kind_name(kind), basis, fixed4(pc2)});
    }
  }
  std::cout << render_csv(t);

  OutputSink sink(out);
  sink.write_table("pc2.csv", t);
  json echo;
  echo["kinds"] = json::array();
  for (ChannelKind k : kinds) echo["kinds"].push_back(kind_name(k));
  echo["bases"] = bases;
  echo["out"] = out;
  sink.finish("pc2", echo, seconds_since(t0));
  return 0;
}

// ---- optimize-spin ---------------------------------------------------------

int cmd_optimize_spin(const json& cfg) {
  check_keys(cfg, {"kinds", "n_starts"});
  const auto kinds = get_kinds(cfg, "kinds");
  const auto n_starts = get_int(cfg, "n_starts", 16, 1, 4096);
  const std::uint64_t seed = get_u64(cfg, "seed", 1);
  const std::string out = get_string(cfg, "out", "out/optimize_spin");

  const auto t0 = Clock::now();
  OutputSink sink(out);
  CsvTable t;
  t.header = {"kind", "n_params", "n_starts", "pc2", "reference_pc2"};
  for (ChannelKind kind : kinds) {
    const int n_params = kind == ChannelKind::Depolarizing ? 15 : 3;
    const std::uint64_t kseed =
        trajectory_seed(seed, static_cast<std::uint64_t>(kind));
    const double reference = solve_pc2(
        [kind](double p) { return spin_optimized_kraus({kind, p}); }, 2);
    try {
      const OptimizationResult r = optimize_basis_spin(
          kind, 2, n_params, kseed, static_cast<int>(n_starts));
      if (std::abs(r.pc2 - reference) > 1e-3)
        std::cerr << "warning: " << kind_name(kind) << " optimum " << r.pc2
                  << " differs from the stored-basis value " << reference
                  << " by more than 1e-3\n";
      const BasisRotation rot = rotation_from_params(kind, r.params);
      sink.write(std::string("rotation_") + kind_name(kind) + ".json",
                 basis_rotation_json(kind, rot).dump(2) + "\n");
      t.rows.push_back({kind_name(kind), std::to_string(n_params),
                        std::to_string(n_starts), format_double(r.pc2),
                        format_double(reference)});
    } catch (const no_root_error& e) {
      // Optimizer stall is reported, not fatal: the row and rotation file
      // for this kind are omitted.
      std::cerr << "optimizer stall for " << kind_name(kind) << ": "
                << e.what() << "\n";
    }
  }
  sink.write_table("optimize_spin.csv", t);
  json echo;
  echo["kinds"] = json::array();
  for (ChannelKind k : kinds) echo["kinds"].push_back(kind_name(k));
  echo["n_starts"] = n_starts;
  echo["seed"] = seed;
  echo["out"] = out;
  sink.finish("optimize-spin", echo, seconds_since(t0));
  return 0;
}

// ---- ruc -------------------------------------------------------------------

int cmd_ruc(const json& cfg) {
  check_keys(cfg, {"sizes", "p_values", "kind", "unraveling", "steps",
                   "boundary", "renyi_indices", "record_i3"});
  const auto sizes = get_int_array(cfg, "sizes", {8});
  const auto p_values = get_num_array(cfg, "p_values", {0.1});
  const ChannelKind kind =
      kind_from_name(get_string(cfg, "kind", "dephasing"));
  const Unraveling unr =
      unraveling_from_name(get_string(cfg, "unraveling", "conventional"));
  const auto steps = get_int(cfg, "steps", 0, 0, 100000);
  const Boundary boundary =
      boundary_from_name(get_string(cfg, "boundary", "periodic"));
  const auto renyi = get_renyi(cfg, "renyi_indices", kDefaultRenyiIndices);
  const bool record_i3 = get_bool(cfg, "record_i3", true);
  const auto n_traj = get_int(cfg, "trajectories", 100, 1, 10000000);
  const auto workers = get_int(cfg, "workers", 1, 1, 4096);
  const std::uint64_t seed = get_u64(cfg, "seed", 1);
  const bool log_bits = get_bool(cfg, "log_bits", false);
  const std::string out = get_string(cfg, "out", "out/ruc");

  for (long long L : sizes) {
    if (L < 2 || L > 26 || L % 2 != 0)
      throw config_error("sizes entries must be even and within [2, 26]");
    if (record_i3 && L % 4 != 0)
      throw config_error(
          "tripartite mutual information needs L divisible by 4; "
          "set record_i3 to false or change sizes");
  }
  for (double p : p_values)
    if (p < 0.0 || p > 1.0)
      throw config_error("p_values entries must lie in [0, 1]");

  const auto t0 = Clock::now();
  struct Combo {
    int L;
    double p;
  };
  std::vector<Combo> combos;
  for (long long L : sizes)
    for (double p : p_values) combos.push_back({static_cast<int>(L), p});
  const int per = static_cast<int>(n_traj);
  const int total = static_cast<int>(combos.size()) * per;

  // Trajectory seeds depend only on the trajectory index, so every (L, p)
  // combination sees the same circuit/outcome streams: sweeps are paired,
  // which sharpens crossings without biasing the per-point averages.
  auto results = run_indexed(total, static_cast<int>(workers), [&](int j) {
    const Combo& c = combos[static_cast<std::size_t>(j / per)];
    const int tidx = j % per;
    RucConfig rc;
    rc.L = c.L;
    rc.T = static_cast<int>(steps);
    rc.p = c.p;
    rc.kind = kind;
    rc.unraveling = unr;
    rc.boundary = boundary;
    rc.renyi_indices = renyi;
    rc.record_outcomes = false;
    try {
      return run_ruc_trajectory(rc, trajectory_seed(seed, tidx), record_i3);
    } catch (const std::exception& e) {
      throw std::runtime_error("trajectory " + std::to_string(tidx) + " (L=" +
                               std::to_string(c.L) + ", p=" +
                               format_double(c.p) + "): " + e.what());
    }
  });

  const double scale = entropy_scale(log_bits);
  CsvTable traj;
  traj.header = {"L",          "p",    "kind",  "unraveling",
                 "trajectory", "seed", "renyi", "half_chain_entropy"};
  if (record_i3) traj.header.push_back("i3");
  CsvTable summary;
  summary.header = {"L",     "p",      "kind", "unraveling",
                    "renyi", "n_traj", "half_chain_entropy_mean",
                    "half_chain_entropy_se"};
  if (record_i3) {
    summary.header.push_back("i3_mean");
    summary.header.push_back("i3_se");
  }

  for (std::size_t c = 0; c < combos.size(); ++c) {
    for (std::size_t k = 0; k < renyi.size(); ++k) {
      std::vector<double> s_vals, i3_vals;
      for (int tidx = 0; tidx < per; ++tidx) {
        const TrajectoryRecord& rec = results[c * per + tidx];
        const double s = rec.half_chain[k] * scale;
        s_vals.push_back(s);
        std::vector<std::string> row = {
            std::to_string(combos[c].L), format_double(combos[c].p),
            kind_name(kind),             unraveling_name(unr),
            std::to_string(tidx),        std::to_string(rec.seed),
            renyi_label(renyi[k]),       format_double(s)};
        if (record_i3) {
          const double v = rec.i3[k] * scale;
          i3_vals.push_back(v);
          row.push_back(format_double(v));
        }
        traj.rows.push_back(std::move(row));
      }
      const auto [sm, sse] = mean_se(s_vals);
      std::vector<std::string> row = {
          std::to_string(combos[c].L), format_double(combos[c].p),
          kind_name(kind),             unraveling_name(unr),
          renyi_label(renyi[k]),       std::to_string(per),
          format_double(sm),           format_double(sse)};
      if (record_i3) {
        const auto [im, ise] = mean_se(i3_vals);
        row.push_back(format_double(im));
        row.push_back(format_double(ise));
      }
      summary.rows.push_back(std::move(row));
    }
  }

  OutputSink sink(out);
  sink.write_table("trajectories.csv", traj);
  sink.write_table("summary.csv", summary);
  json echo;
  echo["sizes"] = sizes;
  echo["p_values"] = p_values;
  echo["kind"] = kind_name(kind);
  echo["unraveling"] = unraveling_name(unr);
  echo["steps"] = steps;
  echo["boundary"] = boundary_name(boundary);
  echo["renyi_indices"] = renyi_echo(renyi);
  echo["record_i3"] = record_i3;
  echo["trajectories"] = n_traj;
  echo["workers"] = workers;
  echo["seed"] = seed;
  echo["log_bits"] = log_bits;
  echo["out"] = out;
  sink.finish("ruc", echo, seconds_since(t0));
  return 0;
}

// ---- mfim ------------------------------------------------------------------

int cmd_mfim(const json& cfg) {
  check_keys(cfg, {"L", "dt", "gamma", "total_time", "J", "hx", "hz",
                   "boundary", "engine", "unraveling", "renyi_indices", "chi",
                   "cutoff"});
  MFIMConfig mc;
  mc.L = static_cast<int>(get_int(cfg, "L", 8, 2, 4096));
  mc.dt = get_double(cfg, "dt", 0.05);
  mc.gamma = get_double(cfg, "gamma", 0.0);
  mc.total_time = get_double(cfg, "total_time", 1.0);
  mc.J = get_double(cfg, "J", -1.0);
  mc.hx = get_double(cfg, "hx", 1.05);
  mc.hz = get_double(cfg, "hz", -0.5);
  mc.boundary = boundary_from_name(get_string(cfg, "boundary", "open"));
  const std::string engine = get_string(cfg, "engine", "mps");
  const Unraveling unr =
      unraveling_from_name(get_string(cfg, "unraveling", "conventional"));
  const auto renyi = get_renyi(cfg, "renyi_indices", {1.0});
  const auto chis = get_int_array(cfg, "chi", {64});
  const double cutoff = get_double(cfg, "cutoff", 1e-12);
  const auto n_traj = get_int(cfg, "trajectories", 4, 1, 1000000);
  const auto workers = get_int(cfg, "workers", 1, 1, 4096);
  const std::uint64_t seed = get_u64(cfg, "seed", 1);
  const bool log_bits = get_bool(cfg, "log_bits", false);
  const std::string out = get_string(cfg, "out", "out/mfim");

  if (engine != "dense" && engine != "mps")
    throw config_error("engine must be dense or mps");
  if (engine == "dense") {
    if (mc.L > 24)
      throw config_error("dense engine supports L <= 24; use engine=mps");
    if (cfg.contains("chi"))
      throw config_error("chi applies to the mps engine only");
  } else {
    if (mc.boundary != Boundary::Open)
      throw config_error("mps engine supports open boundaries only");
    for (long long c : chis)
      if (c < 0)
        throw config_error("chi entries must be >= 0 (0 = untruncated)");
  }
  if (!(cutoff >= 0.0)) throw config_error("cutoff must be >= 0");
  try {
    mc.validate();
  } catch (const std::exception& e) {
    throw config_error(e.what());
  }

  const auto t0 = Clock::now();
  OutputSink sink(out);
  const double scale = entropy_scale(log_bits);
  const int per = static_cast<int>(n_traj);
  const int steps = mc.n_steps();

  CsvTable summary;
  summary.header = {"engine", "chi", "n_traj", "saturation_mean",
                    "discarded_mean"};
  for (double n : renyi) {
    const std::string l = renyi_label(n);
    summary.header.push_back("entropy_n" + l + "_final_mean");
    summary.header.push_back("entropy_n" + l + "_final_se");
    summary.header.push_back("entropy_n" + l + "_lasthalf_mean");
    summary.header.push_back("entropy_n" + l + "_lasthalf_se");
  }

  const std::vector<long long> runs =
      engine == "dense" ? std::vector<long long>{0} : chis;
  for (long long chi : runs) {
    auto results = run_indexed(per, static_cast<int>(workers), [&](int tidx) {
      const std::uint64_t tseed = trajectory_seed(seed, tidx);
      try {
        if (engine == "dense")
          return run_mfim_trajectory_exact(mc, unr, renyi, tseed);
        TruncationPolicy pol{static_cast<int>(chi), cutoff};
        return run_mfim_mps_trajectory(mc, unr, renyi, tseed, pol);
      } catch (const std::exception& e) {
        throw std::runtime_error("trajectory " + std::to_string(tidx) + ": " +
                                 e.what());
      }
    });

    const std::string tag =
        engine == "dense" ? "" : "_chi" + std::to_string(chi);
    CsvTable series;
    series.header = {"run_id", "seed", "step", "time", "chi_max"};
    for (double n : renyi)
      series.header.push_back("entropy_n" + renyi_label(n));
    series.header.push_back("discarded_weight");
    CsvTable traj;
    traj.header = {"run_id", "seed", "max_chi", "saturation"};
    for (double n : renyi)
      traj.header.push_back("entropy_n" + renyi_label(n) + "_final");
    traj.header.push_back("total_discarded");

    std::vector<double> sats, discs;
    std::vector<std::vector<double>> finals(renyi.size()),
        lasthalf(renyi.size());
    for (int tidx = 0; tidx < per; ++tidx) {
      const MFIMSeries& s = results[static_cast<std::size_t>(tidx)];
      int max_chi = 0;
      double total_disc = 0.0;
      for (int st = 0; st < steps; ++st) {
        std::vector<std::string> row = {
            std::to_string(tidx), std::to_string(s.seed),
            std::to_string(st + 1),
            format_double(s.times[static_cast<std::size_t>(st)]),
            std::to_string(s.chi[static_cast<std::size_t>(st)])};
        for (std::size_t k = 0; k < renyi.size(); ++k)
          row.push_back(format_double(
              s.entropy[static_cast<std::size_t>(st)][k] * scale));
        row.push_back(
            format_double(s.discarded[static_cast<std::size_t>(st)]));
        series.rows.push_back(std::move(row));
        max_chi = std::max(max_chi, s.chi[static_cast<std::size_t>(st)]);
        total_disc += s.discarded[static_cast<std::size_t>(st)];
      }
      sats.push_back(s.saturation);
      discs.push_back(total_disc);
      std::vector<std::string> row = {
          std::to_string(tidx), std::to_string(s.seed),
          std::to_string(max_chi), format_double(s.saturation)};
      for (std::size_t k = 0; k < renyi.size(); ++k) {
        const double fin = s.entropy.back()[k] * scale;
        finals[k].push_back(fin);
        row.push_back(format_double(fin));
        double acc = 0.0;
        int cnt = 0;
        for (int st = steps / 2; st < steps; ++st, ++cnt)
          acc += s.entropy[static_cast<std::size_t>(st)][k] * scale;
        lasthalf[k].push_back(cnt > 0 ? acc / cnt : fin);
      }
      row.push_back(format_double(total_disc));
      traj.rows.push_back(std::move(row));
    }
    sink.write_table("series" + tag + ".csv", series);
    sink.write_table("trajectories" + tag + ".csv", traj);

    std::vector<std::string> row = {engine, std::to_string(chi),
                                    std::to_string(per),
                                    format_double(mean_se(sats).first),
                                    format_double(mean_se(discs).first)};
    for (std::size_t k = 0; k < renyi.size(); ++k) {
      const auto [fm, fs] = mean_se(finals[k]);
      const auto [lm, ls] = mean_se(lasthalf[k]);
      row.push_back(format_double(fm));
      row.push_back(format_double(fs));
      row.push_back(format_double(lm));
      row.push_back(format_double(ls));
    }
    summary.rows.push_back(std::move(row));
  }
  sink.write_table("summary.csv", summary);

  json echo;
  echo["L"] = mc.L;
  echo["dt"] = mc.dt;
  echo["gamma"] = mc.gamma;
  echo["total_time"] = mc.total_time;
  echo["J"] = mc.J;
  echo["hx"] = mc.hx;
  echo["hz"] = mc.hz;
  echo["boundary"] = boundary_name(mc.boundary);
  echo["engine"] = engine;
  echo["unraveling"] = unraveling_name(unr);
  echo["renyi_indices"] = renyi_echo(renyi);
  if (engine == "mps") {
    echo["chi"] = chis;
    echo["cutoff"] = cutoff;
  }
  echo["trajectories"] = n_traj;
  echo["workers"] = workers;
  echo["seed"] = seed;
  echo["log_bits"] = log_bits;
  echo["out"] = out;
  sink.finish("mfim", echo, seconds_since(t0));
  return 0;
}

// ---- collapse --------------------------------------------------------------

int cmd_collapse(const json& cfg) {
  check_keys(cfg, {"inputs", "observable", "renyi_indices", "nu_min", "nu_max",
                   "grid", "n_boot"});
  const auto inputs = get_str_array(cfg, "inputs", {});
  if (inputs.empty())
    throw config_error("collapse requires 'inputs': a list of summary CSVs");
  const std::string observable = get_string(cfg, "observable", "i3");
  if (observable != "i3" && observable != "half_chain_entropy")
    throw config_error("observable must be i3 or half_chain_entropy");
  FssOptions opts;
  opts.nu_min = get_double(cfg, "nu_min", opts.nu_min);
  opts.nu_max = get_double(cfg, "nu_max", opts.nu_max);
  opts.grid = static_cast<int>(get_int(cfg, "grid", opts.grid, 10, 2000));
  opts.n_boot = static_cast<int>(get_int(cfg, "n_boot", opts.n_boot, 2,
                                         100000));
  opts.seed = get_u64(cfg, "seed", opts.seed);
  if (!(opts.nu_min > 0.0 && opts.nu_min < opts.nu_max))
    throw config_error("need 0 < nu_min < nu_max");
  const std::string out = get_string(cfg, "out", "out/collapse");

  const auto t0 = Clock::now();
  std::map<std::string, DataTable> by_label;
  for (const auto& path : inputs) {
    const CsvTable t = read_csv(path);
    const int cL = t.column("L");
    const int cp = t.column("p");
    const int cr = t.column("renyi");
    const int cn = t.column("n_traj");
    const int cm = t.column(observable + "_mean");
    const int cs = t.column(observable + "_se");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const auto& row = t.rows[i];
      const std::string where = path + " row " + std::to_string(i + 2);
      DataRow r;
      r.L = static_cast<int>(parse_int(row[cL], where));
      r.p = parse_double(row[cp], where);
      r.renyi = renyi_from_label(row[cr], where);
      r.n_traj = static_cast<int>(parse_int(row[cn], where));
      r.mean = parse_double(row[cm], where);
      r.se = parse_double(row[cs], where);
      by_label[renyi_label(r.renyi)].push_back(r);
    }
  }
  if (cfg.contains("renyi_indices")) {
    const auto want = get_renyi(cfg, "renyi_indices", {});
    std::set<std::string> keep;
    for (double n : want) keep.insert(renyi_label(n));
    for (auto it = by_label.begin(); it != by_label.end();)
      it = keep.count(it->first) ? std::next(it) : by_label.erase(it);
    for (const auto& l : keep)
      if (!by_label.count(l))
        throw config_error("no input rows for renyi index " + l);
  }
  if (by_label.empty()) throw config_error("inputs contain no data rows");

  json results = json::object();
  for (const auto& [label, table] : by_label) {
    std::set<int> sizes;
    for (const auto& r : table) sizes.insert(r.L);
    if (sizes.size() < 3)
      throw config_error("collapse for renyi " + label + " has " +
                         std::to_string(sizes.size()) +
                         " system sizes; need at least 3");
    CollapseResult res;
    try {
      res = fss_collapse(table, opts);
    } catch (const degenerate_collapse_error& e) {
      throw std::runtime_error("collapse failed for renyi " + label + ": " +
                               e.what());
    } catch (const std::invalid_argument& e) {
      throw config_error("collapse for renyi " + label + ": " + e.what());
    }
    json r;
    r["p_c"] = res.p_c;
    r["nu"] = res.nu;
    r["quality"] = res.quality;
    r["p_c_err"] = res.p_c_err;
    r["nu_err"] = res.nu_err;
    r["n_boot"] = res.n_boot;
    results[label] = r;
    std::cout << "renyi " << label << ": p_c=" << format_double(res.p_c)
              << " +- " << format_double(res.p_c_err)
              << ", nu=" << format_double(res.nu) << " +- "
              << format_double(res.nu_err)
              << ", quality=" << format_double(res.quality) << "\n";
  }

  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["observable"] = observable;
  doc["results"] = results;
  OutputSink sink(out);
  sink.write("collapse.json", doc.dump(2) + "\n");
  json echo;
  echo["inputs"] = inputs;
  echo["observable"] = observable;
  if (cfg.contains("renyi_indices"))
    echo["renyi_indices"] = cfg.at("renyi_indices");
  echo["nu_min"] = opts.nu_min;
  echo["nu_max"] = opts.nu_max;
  echo["grid"] = opts.grid;
  echo["n_boot"] = opts.n_boot;
  echo["seed"] = opts.seed;
  echo["out"] = out;
  sink.finish("collapse", echo, seconds_since(t0));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajectory-unraveling workbench for noisy quantum dynamics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Common c_pc2, c_opt, c_ruc, c_mfim, c_col;
  int rc = 0;

  auto* s_pc2 = app.add_subcommand(
      "pc2", "critical decoherence rates of the effective spin model");
  c_pc2.attach(s_pc2);
  s_pc2->callback([&] { rc = cmd_pc2(c_pc2.merged()); });

  auto* s_opt = app.add_subcommand(
      "optimize-spin", "optimize the unraveling basis against the spin model");
  c_opt.attach(s_opt);
  s_opt->callback([&] { rc = cmd_optimize_spin(c_opt.merged()); });

  auto* s_ruc = app.add_subcommand(
      "ruc", "random-circuit trajectories with mid-circuit channels");
  c_ruc.attach(s_ruc);
  s_ruc->callback([&] { rc = cmd_ruc(c_ruc.merged()); });

  auto* s_mfim = app.add_subcommand(
      "mfim", "mixed-field Ising trajectories (dense or MPS engine)");
  c_mfim.attach(s_mfim);
  s_mfim->callback([&] { rc = cmd_mfim(c_mfim.merged()); });

  auto* s_col = app.add_subcommand(
      "collapse", "finite-size scaling collapse of summary tables");
  c_col.attach(s_col);
  s_col->callback([&] { rc = cmd_collapse(c_col.merged()); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return rc;
}
