// Copyright 2026 The mepq authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mepq/scenario.hpp"

namespace {

struct CliArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CliArgs& args) {
  cmd->add_option("--config", args.config_path, "Scenario JSON file")
      ->required();
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed,
                  "Override every seed in the configuration");
  cmd->add_flag("--quiet", args.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mepq: nonlinear maximal-entropy-production density-matrix dynamics"};
  app.require_subcommand(1);

  CliArgs args;
  for (const char* name : {"evolve", "equilibrium", "linearize", "compare",
                           "contact"}) {
    add_common(app.add_subcommand(name), args);
  }
  app.get_subcommand("evolve")->description(
      "Integrate the full nonlinear trajectory");
  app.get_subcommand("equilibrium")
      ->description("Solve the Gibbs distribution from energy or beta");
  app.get_subcommand("linearize")
      ->description("Emit near-equilibrium relaxation rates");
  app.get_subcommand("compare")
      ->description("Overlay nonlinear and linearized relaxation");
  app.get_subcommand("contact")
      ->description("Evolve two noninteracting factors in product form");

  CLI11_PARSE(app, argc, argv);
  const std::string subcommand = app.get_subcommands().front()->get_name();

  mepq::Json config;
  {
    std::ifstream in(args.config_path);
    if (!in) {
      std::cerr << "error: cannot read config file '" << args.config_path
                << "'\n";
      return 2;
    }
    try {
      in >> config;
    } catch (const mepq::Json::exception& e) {
      std::cerr << "error: config is not valid JSON: " << e.what() << '\n';
      return 2;
    }
  }

  const mepq::RunResult result =
      mepq::run_scenario(subcommand, config, args.out_dir, args.seed,
                         args.quiet);
  if (result.exit_code != 0) {
    std::cerr << "error: " << result.message << '\n';
  }
  return result.exit_code;
}
