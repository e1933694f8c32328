// Command line front end: `msle check <config.json>` and `msle sweep <config.json>`.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "msle/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multiple backward/forward SLE numerical checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MSLE_VERSION);

  std::string config_path;
  std::string out_dir;

  auto* check = app.add_subcommand("check", "Run one check described by a JSON config");
  check->add_option("config", config_path, "Experiment config (JSON)")->required();
  check->add_option("--out", out_dir, "Output directory (overrides out_path)");

  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep over array-valued fields");
  sweep->add_option("config", config_path, "Sweep config (JSON)")->required();
  sweep->add_option("--out", out_dir, "Output directory (overrides out_path)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : msle::exit_config;
  }

  const std::optional<std::filesystem::path> out =
      out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir);
  try {
    if (check->parsed()) return msle::run_config_file(config_path, out, std::cerr);
    return msle::run_sweep_file(config_path, out, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return msle::exit_numerical;
  }
}
