#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "quasicontact/config.hpp"
#include "quasicontact/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quasispecies continuous contact model: eigendata, pair correlations, hierarchy and simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t replicas = 0;

  for (auto sub : {qc::Subcommand::Spectrum, qc::Subcommand::Pair, qc::Subcommand::Evolve,
                   qc::Subcommand::Simulate, qc::Subcommand::Validate}) {
    auto* cmd = app.add_subcommand(qc::to_string(sub));
    cmd->add_option("--config", config_path, "JSON configuration")->required();
    cmd->add_option("--out", out_dir, "output root (default: config output_directory)");
    cmd->add_option("--seed", seed, "base seed for simulation replicas");
    cmd->add_option("--replicas", replicas, "number of simulation replicas");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qc::exit_code::config_error;
  }

  const auto* chosen = app.get_subcommands().front();
  const auto sub = *qc::parse_subcommand(chosen->get_name());

  qc::Overrides overrides;
  if (chosen->count("--out")) overrides.out_dir = out_dir;
  if (chosen->count("--seed")) overrides.seed = seed;
  if (chosen->count("--replicas")) overrides.replicas = replicas;

  try {
    auto config = qc::parse_config(config_path);
    qc::apply_overrides(config, overrides);
    const auto result = qc::dispatch(config, sub, std::cout);
    std::cout << "wrote " << result.directory.string() << "\n";
    return result.exit_code;
  } catch (const qc::ConfigError& e) {
    for (const auto& v : e.violations()) std::cerr << "config error: " << v << "\n";
    return qc::exit_code::config_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return qc::exit_code::config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qc::exit_code::validation_failure;
  }
}
