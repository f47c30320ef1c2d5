#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aggnash/experiments.hpp"

namespace fs = std::filesystem;
using namespace aggnash;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;

struct CommonArgs {
  std::string config;
  std::string out;
  bool gnuplot = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "run configuration file")->required();
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_flag("--emit-gnuplot", a.gnuplot, "write gnuplot scripts next to the CSV files");
}

// --out, then the config, then AGGNASH_OUT_DIR, then ./out.
fs::path output_dir(const CommonArgs& a, const RunConfig& cfg) {
  if (!a.out.empty()) return a.out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("AGGNASH_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "out";
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_trace(const fs::path& dir, const std::string& name, const Trace& tr, bool gnuplot,
                 const std::string& title, const std::vector<double>* envelope = nullptr) {
  write_text_file(dir / name, trace_to_csv(tr, envelope));
  if (gnuplot) {
    const std::string stem = name.substr(0, name.rfind('.'));
    write_text_file(dir / (stem + ".gp"), gnuplot_script(name, tr.players * tr.dim, title));
  }
}

int cmd_simulate(const CommonArgs& a) {
  const RunConfig cfg = load_config(a.config);
  const fs::path dir = output_dir(a, cfg);
  const SimulationOutcome out = run_simulation(cfg);
  write_trace(dir, "trace.csv", out.trace, a.gnuplot, cfg.scenario + " " + cfg.variant);
  write_json(dir / "summary.json", out.summary);
  std::cout << "wrote " << (dir / "trace.csv").string() << " and "
            << (dir / "summary.json").string() << "\n";
  if (out.summary.contains("ne_error")) {
    std::cout << "ne_error " << out.summary["ne_error"].get<double>() << "\n";
  }
  if (out.summary.contains("kkt_residual")) {
    std::cout << "kkt_residual " << out.summary["kkt_residual"].get<double>() << "\n";
  }
  return kExitOk;
}

int cmd_ne_oracle(const CommonArgs& a) {
  const RunConfig cfg = load_config(a.config);
  const fs::path dir = output_dir(a, cfg);
  const nlohmann::json j = run_ne_oracle(cfg);
  write_json(dir / "ne.json", j);
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_privacy_check(const CommonArgs& a) {
  const RunConfig cfg = load_config(a.config);
  const fs::path dir = output_dir(a, cfg);
  const PrivacyOutcome out = run_privacy_check(cfg);
  write_trace(dir, "trace.csv", out.original, a.gnuplot, "original");
  write_trace(dir, "trace_replica.csv", out.replica, a.gnuplot, "replica");
  write_json(dir / "privacy.json", out.report);
  std::cout << "verdict " << out.report["verdict"].get<std::string>() << "\n";
  return out.gaps.verdict == PrivacyVerdict::distinguishable ? kExitNumeric : kExitOk;
}

int cmd_iss_check(const CommonArgs& a) {
  const RunConfig cfg = load_config(a.config);
  const fs::path dir = output_dir(a, cfg);
  const IssOutcome out = run_iss_check(cfg);
  write_trace(dir, "trace.csv", out.trace, a.gnuplot, "disturbed", &out.report.envelope);
  write_json(dir / "iss.json", out.json);
  std::cout << "violations " << out.report.violations << " (negative control "
            << out.negative.violations << ")\n";
  return out.report.violations == 0 ? kExitOk : kExitNumeric;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::non_finite_state:
    case Errc::certificate_failure:
    case Errc::singular_system:
    case Errc::not_strongly_monotone:
      return kExitNumeric;
    default:
      return kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Nash equilibrium seeking for aggregative games"};
  app.require_subcommand(1);
  CommonArgs args;
  CLI::App* sim = app.add_subcommand("simulate", "integrate a flow and write trace.csv, summary.json");
  CLI::App* ne = app.add_subcommand("ne-oracle", "solve for the Nash equilibrium centrally");
  CLI::App* priv = app.add_subcommand("privacy-check", "paired simulation against a replica game");
  CLI::App* iss = app.add_subcommand("iss-check", "ISS certificate and envelope check");
  for (CLI::App* c : {sim, ne, priv, iss}) add_common(c, args);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (sim->parsed()) return cmd_simulate(args);
    if (ne->parsed()) return cmd_ne_oracle(args);
    if (priv->parsed()) return cmd_privacy_check(args);
    return cmd_iss_check(args);
  } catch (const Error& e) {
    std::cerr << "aggnash: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "aggnash: " << e.what() << "\n";
    return kExitUsage;
  }
}
