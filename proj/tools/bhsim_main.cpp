#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "bhc/config.hpp"
#include "bhc/runner.hpp"

namespace {

int fail_json(const char* kind, const std::string& message) {
  std::cerr << "{\"error\":\"" << kind << "\",\"message\":\"" << message
            << "\"}\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Batch simulator for a semiclassical bosonic chain: trajectories, "
      "Lyapunov spectra, occupation-moment ladders, thermodynamic series"};
  std::string config_path;
  std::string out_dir;
  std::string command;
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", config_path, "run configuration file (key = value)")
      ->required();
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--threads", threads, "worker threads; never changes results")
      ->check(CLI::PositiveNumber);
  auto* cmd_opt = app.add_option("--command", command,
                                 "simulate|lyapunov|diffuse|thermo (overrides config)");
  CLI11_PARSE(app, argc, argv);

  std::ifstream in(config_path);
  if (!in) return fail_json("ConfigError", "cannot read config file " + config_path);
  std::stringstream buffer;
  buffer << in.rdbuf();

  bhc::RunConfig cfg;
  try {
    cfg = bhc::parse_config(buffer.str());
  } catch (const bhc::ParseError& e) {
    return fail_json("ParseError", e.what());
  } catch (const bhc::Error& e) {
    return fail_json("ValidationError", e.what());
  }

  if (*seed_opt) cfg.seed = seed;
  if (*out_opt) cfg.out_dir = out_dir;
  if (*cmd_opt) {
    if (command == "simulate") cfg.command = bhc::Command::Simulate;
    else if (command == "lyapunov") cfg.command = bhc::Command::Lyapunov;
    else if (command == "diffuse") cfg.command = bhc::Command::Diffuse;
    else if (command == "thermo") cfg.command = bhc::Command::Thermo;
    else return fail_json("ConfigError", "--command must be simulate|lyapunov|diffuse|thermo");
  }

  return bhc::run(cfg, threads);
}
