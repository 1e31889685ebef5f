#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "dkf/cli/commands.hpp"
#include "dkf/cli/presets.hpp"

namespace {

using namespace dkf::cli;

// A path to a scenario file, or the name of a built-in scenario.
Scenario resolve(const std::string& what) {
  if (std::filesystem::exists(what)) {
    auto sc = load_scenario(what);
    if (sc.name.empty()) sc.name = std::filesystem::path(what).stem().string();
    return sc;
  }
  for (const auto& name : builtin_names())
    if (name == what) return builtin_scenario(name);
  throw ParseError("", 0, "no such scenario file or built-in: " + what);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus distributed Kalman-Bucy filtering under modeling errors"};
  app.require_subcommand(1);

  std::string scenario_arg, out_dir, gamma_spec;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  bool simulate = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", scenario_arg, "scenario file or built-in name")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "Monte Carlo seed");
    sub->add_option("--trials", trials, "Monte Carlo trial count");
    sub->add_option("--gamma", gamma_spec,
                    "consensus parameters: 10 | 1,2,5 | log:FROM:TO:N, optional rel: prefix");
  };
  auto* validate = app.add_subcommand("validate", "check the standing assumptions");
  auto* sweep = app.add_subcommand("sweep", "steady-state indices and bounds over gamma");
  auto* divergence = app.add_subcommand("divergence", "divergence certificates");
  auto* relations = app.add_subcommand("relations", "ordering of nominal and true covariances");
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo mean squared error");
  for (auto* s : {validate, sweep, divergence, relations, simulate_cmd}) add_common(s);
  sweep->add_flag("--simulate", simulate, "add Monte Carlo MSE columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_parse;
  }

  Scenario sc;
  try {
    sc = resolve(scenario_arg);
    if (seed) sc.sim.seed = *seed;
    if (trials) sc.sim.trials = *trials;
    if (!gamma_spec.empty()) sc.gamma = parse_gamma_spec(gamma_spec);
    sc.validate();
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_parse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_parse;
  }

  CommandOptions opt;
  opt.out_dir = out_dir.empty() ? sc.output_dir : out_dir;
  opt.simulate = simulate;
  try {
    if (*validate) return cmd_validate(sc, std::cout);
    if (*sweep) return cmd_sweep(sc, opt, std::cout);
    if (*divergence) return cmd_divergence(sc, opt, std::cout);
    if (*relations) return cmd_relations(sc, opt, std::cout);
    return cmd_simulate(sc, opt, std::cout);
  } catch (const dkf::HypothesisError& e) {
    std::cerr << "hypothesis violated: " << e.what() << '\n';
    return exit_hypothesis;
  } catch (const dkf::SingularEquationError& e) {
    std::cerr << "hypothesis violated: " << e.what() << '\n';
    return exit_hypothesis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_parse;
  }
}
