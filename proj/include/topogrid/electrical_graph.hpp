#pragma once

#include <cstdint>
#include <vector>

#include "topogrid/grid.hpp"

namespace topogrid {

// Electrical node view of a topology: one node per occupied busbar (a busbar
// counts as occupied when any slot is assigned to it, service state aside),
// edges from in-service lines only.
struct ElectricalGraph {
  std::vector<int> node_sub;
  std::vector<std::uint8_t> node_busbar;
  std::vector<std::uint8_t> node_has_load_or_gen;

  std::vector<int> slot_node;  // grid slot -> node
  std::vector<int> line_or_node, line_ex_node;  // -1 when out of service

  std::vector<int> node_component;
  int n_components = 0;
  int slack_node = -1;

  int n_nodes() const { return static_cast<int>(node_sub.size()); }
};

ElectricalGraph electrical_graph(const GridModel& grid, const Topology& topology);

// True when load or generation is spread over more than one component, i.e.
// some consumer or machine can no longer reach the rest of the system.
bool detect_islands(const ElectricalGraph& graph);

}  // namespace topogrid
