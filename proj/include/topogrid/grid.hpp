#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace topogrid {

enum class GenKind { wind, solar, nuclear, thermal };

GenKind gen_kind_from_string(const std::string& s);
std::string to_string(GenKind k);

struct Line {
  int id = -1;
  int sub_or = -1;  // origin substation
  int sub_ex = -1;  // extremity substation
  double r = 0.0;   // series resistance, pu on the system MVA base
  double x = 0.0;   // series reactance, pu
  double b = 0.0;   // total charging susceptance, pu (half at each end)
  double limit_a = 0.0;  // thermal limit, amperes
  bool transformer = false;
};

struct Load {
  int id = -1;
  int substation = -1;
};

struct Generator {
  int id = -1;
  int substation = -1;
  GenKind kind = GenKind::thermal;
  bool slack = false;
};

// Every connectable element end ("slot"): line endpoints first (origins, then
// extremities, each in line order), then loads, then generators. This is also
// the layout of Topology::busbar and of the observation's topology slice.
struct ElementRef {
  enum Kind : std::uint8_t { line_or, line_ex, load, gen };
  Kind kind;
  int id;
};

struct GridModel {
  std::string name;
  double base_mva = 100.0;
  std::vector<double> voltage_kv;  // line-to-line base per substation
  std::vector<Line> lines;
  std::vector<Load> loads;
  std::vector<Generator> generators;

  int n_substations() const { return static_cast<int>(voltage_kv.size()); }
  int n_lines() const { return static_cast<int>(lines.size()); }
  int n_loads() const { return static_cast<int>(loads.size()); }
  int n_generators() const { return static_cast<int>(generators.size()); }
  int n_slots() const { return 2 * n_lines() + n_loads() + n_generators(); }

  ElementRef slot_ref(int slot) const;
  int slot_index(ElementRef ref) const;
  int slot_substation(int slot) const;
  bool slot_is_line_end(int slot) const { return slot < 2 * n_lines(); }

  // Slots hosted by a substation, ordered: line endpoints by line id, then
  // loads, then generators. Filled by reindex().
  const std::vector<int>& substation_slots(int sub) const;

  int slack_generator() const;  // index into generators

  // Rebuilds the per-substation slot table. Call after editing the topology
  // description by hand; load_grid() does it for you.
  void reindex();

 private:
  std::vector<std::vector<int>> sub_slots_;
};

// Structural sanity: sequential ids, endpoints at distinct substations,
// positive limits and bases, exactly one slack. Throws DomainError.
void validate_grid(const GridModel& grid);

// Reads the JSON grid description (sections: bases, substations, lines,
// loads, generators; schema_version required). Validates and reindexes.
GridModel load_grid(const std::string& path);

// Hash of the electrical content (independent of file formatting); stamped
// into episode records so replays can refuse a mismatched grid.
std::uint64_t grid_fingerprint(const GridModel& grid);

// Busbar assignment for every slot (values 1 or 2) plus line service flags.
struct Topology {
  std::vector<std::uint8_t> busbar;
  std::vector<std::uint8_t> line_in_service;

  bool operator==(const Topology&) const = default;
};

Topology base_topology(const GridModel& grid);

// A config is the busbar pattern for one substation's slots, in
// substation_slots() order. Valid when each non-empty busbar hosts at least
// two elements and at least one line endpoint; the busbar of the first slot
// is pinned to 1 so mirrored patterns collapse to one.
bool validate_config(std::span<const std::uint8_t> config,
                     std::span<const std::uint8_t> is_line_end);
bool validate_config(const GridModel& grid, int substation,
                     std::span<const std::uint8_t> config);

struct Action {
  enum Kind : std::uint8_t { do_nothing, reconfigure };
  Kind kind = do_nothing;
  int substation = -1;
  std::vector<std::uint8_t> config;  // busbar per substation slot

  static Action nothing() { return {}; }
};

struct ApplyResult {
  Topology topology;
  bool applied = false;
};

// One action per step. A reconfigure on a substation whose cooldown counter
// is zero rewrites that substation's slots and arms the cooldown; during a
// cooldown the action degrades to do-nothing (applied=false). Counters are
// decremented by the environment, not here.
ApplyResult apply_action(const GridModel& grid, const Topology& topology,
                         const Action& action, std::vector<int>& cooldowns,
                         int cooldown_steps = 3);

}  // namespace topogrid
