#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Conserved quantities of training dynamics"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  for (const char* name : {"run", "check", "ntk"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "TOML config file")->required();
    sub->add_option("--out", out, "Output directory (default: [run].output)");
    sub->add_option("--seed-override", seed, "Replace [run].seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : noether::app::kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return noether::app::dispatch(command, config, out, seed, std::cout, std::cerr);
}
