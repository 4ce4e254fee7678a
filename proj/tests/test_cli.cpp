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

// Process-level checks of the installed command line surface.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#ifndef MEPQ_CLI_PATH
#error "MEPQ_CLI_PATH must point at the mepq binary"
#endif

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "mepq_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MEPQ_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_config(const fs::path& file, const Json& j) {
  std::ofstream out(file);
  out << j.dump(2);
}

}  // namespace

TEST_CASE("cli evolve succeeds and honors --out") {
  const fs::path dir = work_dir();
  const Json cfg{
      {"hamiltonian", {{"type", "two_level"}, {"e1", 0.0}, {"e2", 1.0}}},
      {"initial_state", {{"type", "gibbs"}, {"beta", 1.0}}},
      {"integrator",
       {{"rel_tol", 1e-8}, {"abs_tol", 1e-10}, {"t_end", 1.0},
        {"record_every", 0.25}}}};
  write_config(dir / "cfg.json", cfg);
  const int code = run_cli("evolve --config " + (dir / "cfg.json").string() +
                           " --out " + (dir / "out").string() + " --quiet");
  CHECK(code == 0);
  CHECK(fs::exists(dir / "out" / "trajectory.csv"));
  CHECK(fs::exists(dir / "out" / "summary.json"));
}

TEST_CASE("cli exit codes") {
  const fs::path dir = work_dir();
  SUBCASE("missing config file exits 2") {
    CHECK(run_cli("evolve --config " + (dir / "nope.json").string()) == 2);
  }
  SUBCASE("schema violation exits 2") {
    write_config(dir / "bad.json", Json{{"hamiltonian", {{"type", "?"}}}});
    CHECK(run_cli("evolve --config " + (dir / "bad.json").string() +
                  " --out " + dir.string()) == 2);
  }
  SUBCASE("integration failure exits 3") {
    Json cfg{
        {"hamiltonian", {{"type", "two_level"}, {"e1", 0.0}, {"e2", 1.0}}},
        {"initial_state",
         {{"type", "random_mixed"}, {"rank", 2}, {"seed", 4}}},
        {"integrator",
         {{"rel_tol", 1e-10}, {"abs_tol", 1e-12}, {"t_end", 10.0},
          {"record_every", 1.0}, {"max_steps", 2}}}};
    write_config(dir / "stiff.json", cfg);
    CHECK(run_cli("evolve --config " + (dir / "stiff.json").string() +
                  " --out " + dir.string() + " --quiet") == 3);
  }
}

TEST_CASE("cli equilibrium prints json on stdout") {
  const fs::path dir = work_dir();
  const Json cfg{{"equilibrium",
                  {{"energies", {0.0, 1.0}}, {"energy", 0.25}}}};
  write_config(dir / "eq.json", cfg);
  const std::string cmd = std::string(MEPQ_CLI_PATH) + " equilibrium --config " +
                          (dir / "eq.json").string() + " --out " +
                          dir.string() + " --quiet > " +
                          (dir / "stdout.txt").string() + " 2> /dev/null";
  REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  std::ifstream in(dir / "stdout.txt");
  Json out;
  in >> out;
  CHECK(out.at("beta").get<double>() == doctest::Approx(std::log(3.0)));
}

TEST_CASE("cli seed override changes outputs deterministically") {
  const fs::path dir = work_dir();
  const Json cfg{
      {"hamiltonian", {{"type", "two_level"}, {"e1", 0.0}, {"e2", 1.0}}},
      {"initial_state", {{"type", "random_mixed"}, {"rank", 2}, {"seed", 1}}},
      {"integrator",
       {{"rel_tol", 1e-8}, {"abs_tol", 1e-10}, {"t_end", 0.5},
        {"record_every", 0.25}}}};
  write_config(dir / "cfg.json", cfg);
  auto run_into = [&](const std::string& sub, const std::string& extra) {
    REQUIRE(run_cli("evolve --config " + (dir / "cfg.json").string() +
                    " --out " + (dir / sub).string() + " --quiet " + extra) ==
            0);
    std::ifstream in(dir / sub / "trajectory.csv", std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  const std::string a = run_into("a", "");
  const std::string b = run_into("b", "");
  const std::string c = run_into("c", "--seed 2");
  CHECK(a == b);
  CHECK(a != c);
}
