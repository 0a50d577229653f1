#pragma once

#include <stdexcept>
#include <vector>

#include "topogrid/action_space.hpp"
#include "topogrid/grid.hpp"
#include "topogrid/power_flow.hpp"
#include "topogrid/scenario.hpp"

namespace test_support {

inline topogrid::GridModel shipped_grid() {
  return topogrid::load_grid(TOPOGRID_DATA_DIR "/grid_ieee14.json");
}

// The published 14-bus operating point (loads in MW/MVAr, machine schedules
// in MW and pu volts), in this grid's element order.
inline topogrid::InjectionSet nominal_injections() {
  topogrid::InjectionSet inj;
  inj.load_p.resize(11);
  inj.load_q.resize(11);
  inj.load_p << 21.7, 94.2, 47.8, 7.6, 11.2, 29.5, 9.0, 3.5, 6.1, 13.5, 14.9;
  inj.load_q << 12.7, 19.0, -3.9, 1.6, 7.5, 16.6, 5.8, 1.8, 1.6, 5.8, 5.0;
  inj.gen_p.resize(5);
  inj.gen_p << 40.0, 0.0, 0.0, 0.0, 0.0;
  inj.gen_v.resize(5);
  inj.gen_v << 1.045, 1.01, 1.07, 1.09, 1.06;
  return inj;
}

// A two-substation grid with one line; handy for closed-form checks.
inline topogrid::GridModel two_bus_grid(double r, double x, double b) {
  topogrid::GridModel g;
  g.name = "two-bus";
  g.base_mva = 100.0;
  g.voltage_kv = {138.0, 138.0};
  g.lines.push_back({0, 0, 1, r, x, b, 1000.0, false});
  g.loads.push_back({0, 1});
  g.generators.push_back({0, 0, topogrid::GenKind::thermal, true});
  g.reindex();
  return g;
}

inline std::vector<int> zero_cooldowns(const topogrid::GridModel& grid) {
  return std::vector<int>(grid.n_substations(), 0);
}

// Two substations joined by two parallel lines of unequal reactance and
// rating. Under the linearized solve the stiffer line (x=0.1, 1000 A)
// carries exactly 2/3 of the transfer and the softer one (x=0.2, 2000 A)
// 1/3, so scripted load values place each line at an exact loading.
inline topogrid::GridModel parallel_grid() {
  topogrid::GridModel g;
  g.name = "parallel-pair";
  g.base_mva = 100.0;
  g.voltage_kv = {138.0, 138.0};
  g.lines.push_back({0, 0, 1, 0.0, 0.1, 0.0, 1000.0, false});
  g.lines.push_back({1, 0, 1, 0.0, 0.2, 0.0, 2000.0, false});
  g.loads.push_back({0, 1});
  g.generators.push_back({0, 0, topogrid::GenKind::thermal, true});
  g.reindex();
  return g;
}

// Three substations in a line-plus-spur shape: the middle substation can be
// split so that its spur line and local load leave the slack's component,
// and the spur end can be cut off by tripping the spur line. `tail_gen`
// swaps the tail-end load for a wind machine.
inline topogrid::GridModel forked_grid(bool tail_gen = false) {
  topogrid::GridModel g;
  g.name = "forked";
  g.base_mva = 100.0;
  g.voltage_kv = {138.0, 138.0, 138.0};
  g.lines.push_back({0, 0, 1, 0.0, 0.1, 0.0, 1000.0, false});
  g.lines.push_back({1, 0, 1, 0.0, 0.1, 0.0, 1000.0, false});
  g.lines.push_back({2, 1, 2, 0.0, 0.1, 0.0, 1000.0, false});
  g.loads.push_back({0, 1});
  g.generators.push_back({0, 0, topogrid::GenKind::thermal, true});
  if (tail_gen) {
    g.generators.push_back({1, 2, topogrid::GenKind::wind, false});
  } else {
    g.loads.push_back({1, 2});
  }
  g.reindex();
  return g;
}

// A scenario holding every load at `load_mw` (unity power factor), every
// machine at zero output and 1.0 pu voltage. Individual rows can then be
// edited to script overload episodes.
inline topogrid::Scenario flat_scenario(const topogrid::GridModel& grid,
                                        int n_steps, double load_mw) {
  topogrid::Scenario sc;
  sc.id = "script";
  sc.load_p = Eigen::MatrixXd::Constant(n_steps, grid.n_loads(), load_mw);
  sc.load_q = Eigen::MatrixXd::Zero(n_steps, grid.n_loads());
  sc.gen_p = Eigen::MatrixXd::Zero(n_steps, grid.n_generators());
  sc.gen_v = Eigen::MatrixXd::Ones(n_steps, grid.n_generators());
  return sc;
}

inline int find_action_id(const topogrid::ActionCatalog& catalog,
                          int substation,
                          const std::vector<std::uint8_t>& config) {
  for (int i = 0; i < catalog.size(); ++i) {
    const topogrid::CatalogEntry& entry = catalog.entries[i];
    if (entry.substation == substation &&
        entry.action.kind == topogrid::Action::reconfigure &&
        entry.action.config == config) {
      return i;
    }
  }
  throw std::logic_error("no catalog entry for that configuration");
}

}  // namespace test_support
