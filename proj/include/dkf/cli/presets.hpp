#pragma once

// Built-in scenarios mirroring scenarios/*.yaml.

#include "dkf/cli/scenario.hpp"
#include "dkf/presets.hpp"

namespace dkf::cli {

inline std::vector<std::string> builtin_names() {
  return {"baseline", "case1", "case2", "case3"};
}

inline Scenario builtin_scenario(const std::string& name) {
  presets::CaseModels m;
  Scenario sc;
  sc.name = name;
  sc.topology = Topology::ring(6);
  sc.sim.dt = 1e-3;
  sc.sim.trials = 200;
  sc.sim.seed = 1;
  sc.sim.record_stride = 100;
  sc.analysis.grid = TimeGrid{1e-3, 10.0, 100};
  if (name == "baseline") {
    m = presets::baseline();
    sc.sim.horizon = 20.0;
  } else if (name == "case1") {
    m = presets::case1();
    sc.gamma = parse_gamma_spec("rel:log:1.05:100:20");
    // Past about 10 gamma_bar explicit Euler is no longer accurate at any
    // affordable dt.
    sc.sim.scheme = SimScheme::exponential;
    sc.sim.dt = 2e-3;
    sc.sim.horizon = 30.0;
    sc.sim.record_stride = 50;
  } else if (name == "case2") {
    m = presets::case2();
    sc.gamma = parse_gamma_spec("10");
    sc.sim.horizon = 50.0;
    sc.sim.record_stride = 2500;
    sc.analysis.grid = TimeGrid{1e-3, 50.0, 500};
  } else if (name == "case3") {
    m = presets::case3();
    sc.sim.init = InitialMode::independent;
    sc.sim.horizon = 10.0;
  } else {
    throw ParseError("", 0, "no built-in scenario named '" + name + "'");
  }
  sc.truth = m.truth;
  sc.nominal = m.nominal;
  sc.validate();
  return sc;
}

}  // namespace dkf::cli
