// harqir: command-line front end. See README.md for the config format.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "harqir/cli.hpp"

namespace {

using namespace harq::cli;

int run(const std::string& command, const std::string& config_path, const Overrides& ov) {
  RunConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) throw harq::ParameterError("cannot open config file '" + config_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw harq::ParameterError(std::string("config is not valid JSON: ") + e.what());
    }
    cfg = parse_config(j);
    apply_overrides(cfg, ov);
  } catch (const std::exception& e) {
    std::cerr << "harqir: " << e.what() << "\n";
    return config_error;
  }

  // Write into a buffer first so a failing command leaves no partial file.
  std::ostringstream buf;
  int code = ok;
  try {
    if (command == "fit")
      code = cmd_fit(cfg, buf);
    else if (command == "sweep")
      code = cmd_sweep(cfg, buf);
    else if (command == "validate")
      code = cmd_validate(cfg, buf);
    else if (command == "optimize")
      code = cmd_optimize(cfg, buf);
    else
      code = cmd_diversity(cfg, buf);
  } catch (const std::exception& e) {
    std::cerr << "harqir " << command << ": " << e.what() << "\n";
    return exit_code_for(e);
  }

  if (cfg.out_path.empty() || cfg.out_path == "-") {
    std::cout << buf.str();
  } else {
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) {
      std::cerr << "harqir: cannot write '" << cfg.out_path << "'\n";
      return config_error;
    }
    out << buf.str();
  }
  if (code == validation_failed) std::cerr << "harqir validate: at least one check failed\n";
  if (code == infeasible) std::cerr << "harqir optimize: at least one cell is infeasible\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HARQ-IR outage and throughput analysis over time-correlated Rayleigh fading"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string out, format;
  std::uint64_t seed = 0, samples = 0;
  int jobs = 1;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"fit", "fit the mutual-information approximation and print it as JSON"},
      {"sweep", "outage, average transmissions, LTAT and bounds over a grid"},
      {"validate", "compare analytic results with Monte-Carlo"},
      {"optimize", "throughput-optimal rate under an outage constraint"},
      {"diversity", "diversity order from the high-SNR outage slope"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config,-c", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", out, "output path ('-' for stdout)");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", seed, "Monte-Carlo seed");
    sub->add_option("--samples", samples, "Monte-Carlo samples")->check(CLI::PositiveNumber);
    sub->add_option("--jobs,-j", jobs, "worker threads (results do not depend on this)")->check(CLI::PositiveNumber);
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : config_error;
  }

  Overrides ov;
  ov.jobs = jobs;
  for (auto* sub : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--out")) ov.out = out;
    if (sub->count("--format")) ov.format = format;
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--samples")) ov.samples = samples;
    return run(sub->get_name(), config_path, ov);
  }
  return config_error;
}
