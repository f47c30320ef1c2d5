#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>  // nlohmann/json, vendored

#include "aggnash/error.hpp"
#include "aggnash/game.hpp"
#include "aggnash/graph.hpp"
#include "aggnash/privacy.hpp"
#include "aggnash/rng.hpp"
#include "aggnash/scenarios.hpp"

namespace aggnash {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

struct IntegratorSettings {
  double dt = 1e-3;
  double t_end = 200.0;
  std::size_t stride = 100;
};

struct IssSettings {
  double kappa_frac = 0.5;
  double beta = 0.5;
  double envelope_shrink = 100.0;  ///< negative control divides the envelope by this
};

enum class TransformMode { explicit_values, random, identity };

struct PrivacySettings {
  TransformMode mode = TransformMode::random;
  std::vector<double> r;
  std::vector<double> s;
  std::array<double, 2> r_range{0.5, 2.0};
  std::array<double, 2> s_range{0.8, 1.25};
  double public_tol = 1e-8;
};

/// Game given inline in a config.
struct CustomGameSpec {
  std::size_t n = 1;
  std::vector<QuadraticPlayer> players;
  std::vector<BoxSet> boxes;
  Vec weights;
  Vec gains;
  std::vector<std::pair<long long, long long>> edges;
  Vec x0;
  Vec budgets;
};

struct RunConfig {
  std::string scenario = "hvac";
  std::string variant = "unconstrained";
  std::uint64_t seed = 2026;
  double init_range = 1.0;
  IntegratorSettings integrator;
  HvacParams hvac;
  PevParams pev;
  std::optional<CustomGameSpec> custom;
  HvacDisturbanceParams disturbance;
  PrivacySettings privacy;
  IssSettings iss;
  std::string output_dir;
  Json canonical;    ///< parsed document, comments stripped
  std::string hash;  ///< FNV-1a of the canonical dump
};

namespace config_detail {

inline std::string line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw Error(Errc::config_error, "field '" + path + "': " + msg);
}

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline void check_keys(const Json& obj, const std::string& path,
                       std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || item.key() == a;
    if (!ok) fail(join(path, item.key()), "unknown field");
  }
}

/// Numbers may be JSON numbers or decimal strings ("1e-3", "inf", "-inf").
inline double to_number(const Json& v, const std::string& path) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) fail(path, "expected a number or a decimal string");
  const std::string s = v.get<std::string>();
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || !std::isfinite(out)) {
    fail(path, "'" + s + "' is not a decimal number");
  }
  return out;
}

inline std::uint64_t to_uint(const Json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return v.get<std::uint64_t>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec == std::errc() && ptr == s.data() + s.size()) return out;
  }
  fail(path, "expected a non-negative integer");
}

inline std::vector<double> to_numbers(const Json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(to_number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline Vec to_vec(const Json& v, const std::string& path) {
  const std::vector<double> xs = to_numbers(v, path);
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline std::array<double, 2> to_range(const Json& v, const std::string& path) {
  const std::vector<double> xs = to_numbers(v, path);
  if (xs.size() != 2 || !(xs[0] <= xs[1])) fail(path, "expected [lo, hi] with lo <= hi");
  return {xs[0], xs[1]};
}

/// Dense row-major n x n matrix.
inline Mat to_matrix(const Json& v, std::size_t n, const std::string& path) {
  const std::vector<double> xs = to_numbers(v, path);
  if (xs.size() != n * n) {
    fail(path, "expected " + std::to_string(n * n) + " entries (row-major " + std::to_string(n) +
                   "x" + std::to_string(n) + ")");
  }
  Mat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = xs[r * n + c];
    }
  }
  return m;
}

inline std::vector<std::pair<long long, long long>> to_edges(const Json& v,
                                                             const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of [i, j] pairs");
  std::vector<std::pair<long long, long long>> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string p = path + "[" + std::to_string(k) + "]";
    if (!v[k].is_array() || v[k].size() != 2 || !v[k][0].is_number_integer() ||
        !v[k][1].is_number_integer()) {
      fail(p, "expected [i, j] with 1-based integer player indices");
    }
    out.emplace_back(v[k][0].get<long long>(), v[k][1].get<long long>());
  }
  return out;
}

inline GainRule to_gain_rule(const Json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  const std::string s = v.get<std::string>();
  if (s == "log_uniform") return GainRule::log_uniform;
  if (s == "log_midpoint") return GainRule::log_midpoint;
  if (s == "formula") return GainRule::formula;
  if (s == "explicit") return GainRule::explicit_values;
  fail(path, "unknown gain rule '" + s + "' (log_uniform, log_midpoint, formula, explicit)");
}

inline std::string to_choice(const Json& v, const std::string& path,
                             std::initializer_list<std::string_view> choices) {
  if (!v.is_string()) fail(path, "expected a string");
  const std::string s = v.get<std::string>();
  for (std::string_view c : choices) {
    if (s == c) return s;
  }
  std::string list;
  for (std::string_view c : choices) list += (list.empty() ? "" : ", ") + std::string(c);
  fail(path, "'" + s + "' is not one of: " + list);
}

inline void parse_hvac(const Json& j, HvacParams& p) {
  const std::string base = "hvac";
  check_keys(j, base, {"theta_gamma2", "a", "b", "x_hat", "x_lower", "x_upper", "edges",
                       "gain_rule", "gains"});
  if (j.contains("theta_gamma2")) p.theta_gamma2 = to_number(j["theta_gamma2"], base + ".theta_gamma2");
  if (j.contains("a")) p.a = to_number(j["a"], base + ".a");
  if (j.contains("b")) p.b = to_number(j["b"], base + ".b");
  if (j.contains("x_hat")) p.x_hat = to_numbers(j["x_hat"], base + ".x_hat");
  if (j.contains("x_lower")) p.x_lower = to_numbers(j["x_lower"], base + ".x_lower");
  if (j.contains("x_upper")) p.x_upper = to_numbers(j["x_upper"], base + ".x_upper");
  if (j.contains("edges")) p.edges = to_edges(j["edges"], base + ".edges");
  if (j.contains("gain_rule")) p.gain_rule = to_gain_rule(j["gain_rule"], base + ".gain_rule");
  if (j.contains("gains")) p.gains = to_numbers(j["gains"], base + ".gains");
  if (p.gain_rule == GainRule::explicit_values && p.gains.size() != p.x_hat.size()) {
    fail(base + ".gains", "explicit gain rule needs one gain per player");
  }
}

inline void parse_pev(const Json& j, PevParams& p) {
  const std::string base = "pev";
  check_keys(j, base, {"players", "a", "b", "q", "c", "capacity", "soc0_mean", "soc0_variance",
                       "soc0_max", "soc_final", "x_max", "demand", "edge_probability",
                       "gain_rule"});
  if (j.contains("players")) {
    p.players = static_cast<std::size_t>(to_uint(j["players"], base + ".players"));
    if (p.players == 0) fail(base + ".players", "must be >= 1");
  }
  if (j.contains("a")) p.a = to_number(j["a"], base + ".a");
  if (j.contains("b")) p.b = to_number(j["b"], base + ".b");
  const auto nominal_spread = [&](const char* key, double& nominal, double& spread) {
    if (!j.contains(key)) return;
    const std::string path = join(base, key);
    const Json& v = j[key];
    check_keys(v, path, {"nominal", "spread"});
    if (v.contains("nominal")) nominal = to_number(v["nominal"], path + ".nominal");
    if (v.contains("spread")) spread = to_number(v["spread"], path + ".spread");
  };
  nominal_spread("q", p.q_nominal, p.q_spread);
  nominal_spread("c", p.c_nominal, p.c_spread);
  nominal_spread("capacity", p.capacity_nominal, p.capacity_spread);
  nominal_spread("x_max", p.x_max_nominal, p.x_max_spread);
  if (j.contains("soc0_mean")) p.soc0_mean = to_number(j["soc0_mean"], base + ".soc0_mean");
  if (j.contains("soc0_variance")) p.soc0_variance = to_number(j["soc0_variance"], base + ".soc0_variance");
  if (j.contains("soc0_max")) p.soc0_max = to_number(j["soc0_max"], base + ".soc0_max");
  if (j.contains("soc_final")) p.soc_final = to_number(j["soc_final"], base + ".soc_final");
  if (j.contains("demand")) p.demand = to_numbers(j["demand"], base + ".demand");
  if (j.contains("edge_probability")) {
    p.edge_probability = to_number(j["edge_probability"], base + ".edge_probability");
    if (!(p.edge_probability > 0.0 && p.edge_probability <= 1.0)) {
      fail(base + ".edge_probability", "must lie in (0, 1]");
    }
  }
  if (j.contains("gain_rule")) p.gain_rule = to_gain_rule(j["gain_rule"], base + ".gain_rule");
  if (p.gain_rule == GainRule::explicit_values) {
    fail(base + ".gain_rule", "explicit gains are not supported for this scenario");
  }
}

inline CustomGameSpec parse_custom(const Json& j) {
  const std::string base = "game";
  check_keys(j, base, {"n", "players", "weights", "gains", "edges", "x0", "budgets"});
  CustomGameSpec g;
  if (!j.contains("players") || !j["players"].is_array() || j["players"].empty()) {
    fail(base + ".players", "expected a non-empty array of players");
  }
  g.n = j.contains("n") ? static_cast<std::size_t>(to_uint(j["n"], base + ".n")) : 1;
  if (g.n == 0) fail(base + ".n", "must be >= 1");
  const auto nn = static_cast<Eigen::Index>(g.n);
  for (std::size_t i = 0; i < j["players"].size(); ++i) {
    const std::string p = base + ".players[" + std::to_string(i) + "]";
    const Json& pj = j["players"][i];
    check_keys(pj, p, {"Q", "D", "d", "lower", "upper"});
    for (const char* key : {"Q", "D", "d"}) {
      if (!pj.contains(key)) fail(join(p, key), "missing");
    }
    QuadraticPlayer pl{to_matrix(pj["Q"], g.n, p + ".Q"), to_matrix(pj["D"], g.n, p + ".D"),
                       to_vec(pj["d"], p + ".d")};
    if (pl.d.size() != nn) fail(p + ".d", "expected " + std::to_string(g.n) + " entries");
    g.players.push_back(std::move(pl));
    Vec lo = pj.contains("lower") ? to_vec(pj["lower"], p + ".lower") : Vec::Constant(nn, -kInf);
    Vec hi = pj.contains("upper") ? to_vec(pj["upper"], p + ".upper") : Vec::Constant(nn, kInf);
    if (lo.size() != nn || hi.size() != nn) fail(p, "box bounds need n entries");
    g.boxes.push_back({lo, hi});
  }
  const auto big_n = static_cast<Eigen::Index>(g.players.size());
  g.weights = j.contains("weights") ? to_vec(j["weights"], base + ".weights") : Vec::Ones(big_n);
  g.gains = j.contains("gains") ? to_vec(j["gains"], base + ".gains") : Vec::Ones(big_n);
  if (g.weights.size() != big_n) fail(base + ".weights", "need one entry per player");
  if (g.gains.size() != big_n) fail(base + ".gains", "need one entry per player");
  if (!j.contains("edges")) fail(base + ".edges", "missing");
  g.edges = to_edges(j["edges"], base + ".edges");
  if (j.contains("x0")) {
    g.x0 = to_vec(j["x0"], base + ".x0");
    if (g.x0.size() != big_n * nn) fail(base + ".x0", "expected N*n entries");
  } else {
    g.x0 = Vec::Zero(big_n * nn);
  }
  if (j.contains("budgets")) {
    g.budgets = to_vec(j["budgets"], base + ".budgets");
    if (g.budgets.size() != big_n) fail(base + ".budgets", "need one entry per player");
  }
  return g;
}

}  // namespace config_detail

/// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Parses a config document (JSON with // and /* */ comments).
inline RunConfig parse_config(std::string_view text) {
  using namespace config_detail;
  Json j;
  try {
    j = Json::parse(text, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::config_error,
                "syntax error at " + line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
  check_keys(j, "", {"schema_version", "rng", "scenario", "variant", "seed", "initial",
                     "integrator", "hvac", "pev", "game", "disturbance", "privacy", "iss",
                     "output"});
  RunConfig cfg;
  if (!j.contains("schema_version")) fail("schema_version", "missing");
  if (to_uint(j["schema_version"], "schema_version") != kConfigSchemaVersion) {
    fail("schema_version", "unsupported version (this build reads version " +
                               std::to_string(kConfigSchemaVersion) + ")");
  }
  if (j.contains("rng") && j["rng"] != std::string(Philox4x32::kGeneratorName)) {
    fail("rng", "this build only provides " + std::string(Philox4x32::kGeneratorName));
  }
  if (j.contains("scenario")) cfg.scenario = to_choice(j["scenario"], "scenario", {"hvac", "pev", "custom"});
  if (j.contains("variant")) {
    cfg.variant = to_choice(j["variant"], "variant",
                            {"unconstrained", "disturbed", "projected", "lagrangian"});
  } else if (cfg.scenario == "pev") {
    cfg.variant = "lagrangian";
  }
  if (cfg.scenario == "pev" && cfg.variant != "lagrangian") {
    fail("variant", "scenario 'pev' has budget constraints and runs only the 'lagrangian' variant");
  }
  if (j.contains("seed")) cfg.seed = to_uint(j["seed"], "seed");
  if (j.contains("initial")) {
    check_keys(j["initial"], "initial", {"range"});
    if (j["initial"].contains("range")) cfg.init_range = to_number(j["initial"]["range"], "initial.range");
    if (!(cfg.init_range >= 0.0)) fail("initial.range", "must be >= 0");
  }
  if (j.contains("integrator")) {
    const Json& it = j["integrator"];
    check_keys(it, "integrator", {"dt", "t_end", "stride"});
    if (it.contains("dt")) cfg.integrator.dt = to_number(it["dt"], "integrator.dt");
    if (it.contains("t_end")) cfg.integrator.t_end = to_number(it["t_end"], "integrator.t_end");
    if (it.contains("stride")) {
      cfg.integrator.stride = static_cast<std::size_t>(to_uint(it["stride"], "integrator.stride"));
    }
    if (!(cfg.integrator.dt > 0.0)) fail("integrator.dt", "must be positive");
    if (!(cfg.integrator.t_end >= 0.0)) fail("integrator.t_end", "must be >= 0");
    if (cfg.integrator.stride == 0) fail("integrator.stride", "must be >= 1");
  }
  if (j.contains("hvac")) parse_hvac(j["hvac"], cfg.hvac);
  if (j.contains("pev")) parse_pev(j["pev"], cfg.pev);
  if (j.contains("game")) cfg.custom = parse_custom(j["game"]);
  if (cfg.scenario == "custom" && !cfg.custom) fail("game", "scenario 'custom' needs an inline game");
  if (j.contains("disturbance")) {
    const Json& d = j["disturbance"];
    check_keys(d, "disturbance", {"zoh_amplitude", "zoh_hold", "sin_amplitude", "sin_frequency"});
    if (d.contains("zoh_amplitude")) cfg.disturbance.zoh_amplitude = to_number(d["zoh_amplitude"], "disturbance.zoh_amplitude");
    if (d.contains("zoh_hold")) cfg.disturbance.zoh_hold = to_number(d["zoh_hold"], "disturbance.zoh_hold");
    if (d.contains("sin_amplitude")) cfg.disturbance.sin_amplitude = to_range(d["sin_amplitude"], "disturbance.sin_amplitude");
    if (d.contains("sin_frequency")) cfg.disturbance.sin_frequency = to_range(d["sin_frequency"], "disturbance.sin_frequency");
    if (!(cfg.disturbance.zoh_hold > 0.0)) fail("disturbance.zoh_hold", "must be positive");
  }
  if (j.contains("privacy")) {
    const Json& p = j["privacy"];
    check_keys(p, "privacy", {"transform", "r", "s", "r_range", "s_range", "public_tol"});
    if (p.contains("transform")) {
      const std::string m = to_choice(p["transform"], "privacy.transform", {"explicit", "random", "identity"});
      cfg.privacy.mode = m == "explicit" ? TransformMode::explicit_values
                         : m == "random" ? TransformMode::random
                                         : TransformMode::identity;
    }
    if (p.contains("r")) cfg.privacy.r = to_numbers(p["r"], "privacy.r");
    if (p.contains("s")) cfg.privacy.s = to_numbers(p["s"], "privacy.s");
    if (p.contains("r_range")) cfg.privacy.r_range = to_range(p["r_range"], "privacy.r_range");
    if (p.contains("s_range")) cfg.privacy.s_range = to_range(p["s_range"], "privacy.s_range");
    if (p.contains("public_tol")) cfg.privacy.public_tol = to_number(p["public_tol"], "privacy.public_tol");
    if (cfg.privacy.mode == TransformMode::explicit_values &&
        (cfg.privacy.r.empty() || cfg.privacy.r.size() != cfg.privacy.s.size())) {
      fail("privacy", "explicit transform needs r and s with one entry per player");
    }
  }
  if (j.contains("iss")) {
    const Json& s = j["iss"];
    check_keys(s, "iss", {"kappa_frac", "beta", "envelope_shrink"});
    if (s.contains("kappa_frac")) cfg.iss.kappa_frac = to_number(s["kappa_frac"], "iss.kappa_frac");
    if (s.contains("beta")) cfg.iss.beta = to_number(s["beta"], "iss.beta");
    if (s.contains("envelope_shrink")) cfg.iss.envelope_shrink = to_number(s["envelope_shrink"], "iss.envelope_shrink");
  }
  if (j.contains("output")) {
    check_keys(j["output"], "output", {"dir"});
    if (j["output"].contains("dir")) {
      if (!j["output"]["dir"].is_string()) fail("output.dir", "expected a string");
      cfg.output_dir = j["output"]["dir"].get<std::string>();
    }
  }
  cfg.hvac.seed = cfg.seed;
  cfg.pev.seed = cfg.seed;
  cfg.hvac.init_range = cfg.init_range;
  cfg.pev.init_range = cfg.init_range;
  cfg.canonical = j;
  cfg.hash = fnv1a_hex(j.dump());
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::config_error, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

/// Game, graph and initial state described by a config. For the HVAC
/// scenario the boxes are kept only by the projected variant.
inline ScenarioInstance build_instance(const RunConfig& cfg) {
  if (cfg.scenario == "hvac") {
    ScenarioInstance inst = build_hvac(cfg.hvac);
    if (cfg.variant != "projected" && cfg.variant != "lagrangian") {
      inst.game = inst.game.with_boxes({});
    }
    return inst;
  }
  if (cfg.scenario == "pev") return build_pev(cfg.pev);
  const CustomGameSpec& g = *cfg.custom;
  QuadraticGame game(g.players, g.weights, g.gains, g.boxes);
  GraphTopology graph = GraphTopology::build(g.players.size(), edges_from_one_based(g.edges));
  SimState init;
  init.x = g.x0;
  randomize_estimates(init, g.players.size(), cfg.seed, cfg.init_range, cfg.variant == "lagrangian");
  std::vector<GainInterval> intervals;
  for (std::size_t i = 0; i < game.players(); ++i) {
    const PlayerConstants c = mu_ell(game, i);
    try {
      intervals.push_back(gain_interval(c.mu, c.ell, game.weight(i)));
    } catch (const Error&) {
      intervals.push_back({0.0, 0.0});
    }
  }
  return {std::move(game), std::move(graph), std::move(init), std::move(intervals), g.budgets};
}

/// Replica transform selected by the privacy settings.
inline ReplicaTransform make_transform(const PrivacySettings& p, std::size_t players,
                                       std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(players);
  switch (p.mode) {
    case TransformMode::identity: return ReplicaTransform::identity(players);
    case TransformMode::explicit_values: {
      if (p.r.size() != players || p.s.size() != players) {
        throw Error(Errc::config_error, "field 'privacy': r and s need one entry per player");
      }
      ReplicaTransform t{Vec(n), Vec(n)};
      for (Eigen::Index i = 0; i < n; ++i) {
        t.r(i) = p.r[static_cast<std::size_t>(i)];
        t.s(i) = p.s[static_cast<std::size_t>(i)];
      }
      return t;
    }
    case TransformMode::random: break;
  }
  RandomStream rng(seed, streams::privacy);
  ReplicaTransform t{Vec(n), Vec(n)};
  for (Eigen::Index i = 0; i < n; ++i) t.r(i) = rng.log_uniform(p.r_range[0], p.r_range[1]);
  for (Eigen::Index i = 0; i < n; ++i) t.s(i) = rng.log_uniform(p.s_range[0], p.s_range[1]);
  return t;
}

}  // namespace aggnash
