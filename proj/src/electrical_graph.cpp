#include "topogrid/electrical_graph.hpp"

#include <queue>

#include "topogrid/errors.hpp"

namespace topogrid {

ElectricalGraph electrical_graph(const GridModel& grid, const Topology& topo) {
  if (topo.busbar.size() != static_cast<std::size_t>(grid.n_slots()) ||
      topo.line_in_service.size() != static_cast<std::size_t>(grid.n_lines()))
    throw ContractViolation("topology does not match grid");

  ElectricalGraph g;
  // busbar -> node, allocated in (substation, busbar) order
  std::vector<int> busbar_node(2 * grid.n_substations(), -1);
  for (int sub = 0; sub < grid.n_substations(); ++sub) {
    for (int bb = 1; bb <= 2; ++bb) {
      bool occupied = false;
      for (int slot : grid.substation_slots(sub))
        if (topo.busbar[slot] == bb) {
          occupied = true;
          break;
        }
      if (!occupied) continue;
      busbar_node[2 * sub + bb - 1] = g.n_nodes();
      g.node_sub.push_back(sub);
      g.node_busbar.push_back(static_cast<std::uint8_t>(bb));
      g.node_has_load_or_gen.push_back(0);
    }
  }

  g.slot_node.resize(grid.n_slots());
  for (int slot = 0; slot < grid.n_slots(); ++slot) {
    int sub = grid.slot_substation(slot);
    g.slot_node[slot] = busbar_node[2 * sub + topo.busbar[slot] - 1];
    if (!grid.slot_is_line_end(slot))
      g.node_has_load_or_gen[g.slot_node[slot]] = 1;
  }

  g.line_or_node.assign(grid.n_lines(), -1);
  g.line_ex_node.assign(grid.n_lines(), -1);
  std::vector<std::vector<int>> adj(g.n_nodes());
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (!topo.line_in_service[l]) continue;
    int a = g.slot_node[grid.slot_index({ElementRef::line_or, l})];
    int b = g.slot_node[grid.slot_index({ElementRef::line_ex, l})];
    g.line_or_node[l] = a;
    g.line_ex_node[l] = b;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }

  g.node_component.assign(g.n_nodes(), -1);
  for (int start = 0; start < g.n_nodes(); ++start) {
    if (g.node_component[start] >= 0) continue;
    int comp = g.n_components++;
    std::queue<int> q;
    q.push(start);
    g.node_component[start] = comp;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (g.node_component[v] < 0) {
          g.node_component[v] = comp;
          q.push(v);
        }
    }
  }

  int slack = grid.slack_generator();
  if (slack >= 0)
    g.slack_node = g.slot_node[grid.slot_index({ElementRef::gen, slack})];
  return g;
}

bool detect_islands(const ElectricalGraph& graph) {
  int components_with_injection = 0;
  std::vector<char> seen(graph.n_components, 0);
  for (int n = 0; n < graph.n_nodes(); ++n) {
    if (!graph.node_has_load_or_gen[n]) continue;
    int c = graph.node_component[n];
    if (!seen[c]) {
      seen[c] = 1;
      ++components_with_injection;
    }
  }
  return components_with_injection > 1;
}

}  // namespace topogrid
