#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ppgta/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ppgta: desk-scale automated game-testing agent"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--set", overrides, "override one key (key=value); repeatable")->take_all();
  for (const auto& name : ppgta::command_names()) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ppgta::RunConfig config;
    if (!config_path.empty()) config.load(config_path);
    for (const auto& kv : overrides) config.assign(kv);
    ppgta::run_command(app.get_subcommands().front()->get_name(), config, std::cout);
  } catch (...) {
    return ppgta::exit_code_for_current_exception(std::cerr);
  }
  return 0;
}
