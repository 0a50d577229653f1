#include "topogrid/grid.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "topogrid/csv.hpp"
#include "topogrid/errors.hpp"
#include "topogrid/rng.hpp"

namespace topogrid {

GenKind gen_kind_from_string(const std::string& s) {
  if (s == "wind") return GenKind::wind;
  if (s == "solar") return GenKind::solar;
  if (s == "nuclear") return GenKind::nuclear;
  if (s == "thermal") return GenKind::thermal;
  throw ParseError("unknown generator kind '" + s + "'");
}

std::string to_string(GenKind k) {
  switch (k) {
    case GenKind::wind: return "wind";
    case GenKind::solar: return "solar";
    case GenKind::nuclear: return "nuclear";
    case GenKind::thermal: return "thermal";
  }
  return "?";
}

ElementRef GridModel::slot_ref(int slot) const {
  const int nl = n_lines();
  if (slot < 0 || slot >= n_slots()) throw ContractViolation("slot out of range");
  if (slot < nl) return {ElementRef::line_or, slot};
  if (slot < 2 * nl) return {ElementRef::line_ex, slot - nl};
  if (slot < 2 * nl + n_loads()) return {ElementRef::load, slot - 2 * nl};
  return {ElementRef::gen, slot - 2 * nl - n_loads()};
}

int GridModel::slot_index(ElementRef ref) const {
  const int nl = n_lines();
  switch (ref.kind) {
    case ElementRef::line_or: return ref.id;
    case ElementRef::line_ex: return nl + ref.id;
    case ElementRef::load: return 2 * nl + ref.id;
    case ElementRef::gen: return 2 * nl + n_loads() + ref.id;
  }
  throw ContractViolation("bad element ref");
}

int GridModel::slot_substation(int slot) const {
  ElementRef ref = slot_ref(slot);
  switch (ref.kind) {
    case ElementRef::line_or: return lines[ref.id].sub_or;
    case ElementRef::line_ex: return lines[ref.id].sub_ex;
    case ElementRef::load: return loads[ref.id].substation;
    case ElementRef::gen: return generators[ref.id].substation;
  }
  throw ContractViolation("bad element ref");
}

const std::vector<int>& GridModel::substation_slots(int sub) const {
  if (sub < 0 || sub >= static_cast<int>(sub_slots_.size()))
    throw ContractViolation("substation_slots: call reindex() first / sub out of range");
  return sub_slots_[sub];
}

int GridModel::slack_generator() const {
  for (const auto& g : generators)
    if (g.slack) return g.id;
  return -1;
}

void GridModel::reindex() {
  sub_slots_.assign(n_substations(), {});
  // Line endpoints in line-id order (a line never has both ends at one
  // substation), then loads, then generators.
  for (const auto& l : lines) {
    sub_slots_[l.sub_or].push_back(slot_index({ElementRef::line_or, l.id}));
    sub_slots_[l.sub_ex].push_back(slot_index({ElementRef::line_ex, l.id}));
  }
  for (auto& slots : sub_slots_)
    std::sort(slots.begin(), slots.end(), [this](int a, int b) {
      return slot_ref(a).id < slot_ref(b).id;
    });
  for (const auto& d : loads)
    sub_slots_[d.substation].push_back(slot_index({ElementRef::load, d.id}));
  for (const auto& g : generators)
    sub_slots_[g.substation].push_back(slot_index({ElementRef::gen, g.id}));
}

void validate_grid(const GridModel& grid) {
  if (grid.base_mva <= 0) throw DomainError("base_mva must be positive");
  if (grid.n_substations() < 1) throw DomainError("no substations");
  for (int s = 0; s < grid.n_substations(); ++s)
    if (grid.voltage_kv[s] <= 0) throw DomainError("voltage base must be positive");

  for (int i = 0; i < grid.n_lines(); ++i) {
    const Line& l = grid.lines[i];
    if (l.id != i) throw DomainError("line ids must be sequential from 0");
    if (l.sub_or < 0 || l.sub_or >= grid.n_substations() || l.sub_ex < 0 ||
        l.sub_ex >= grid.n_substations())
      throw DomainError("line endpoint substation out of range");
    if (l.sub_or == l.sub_ex)
      throw DomainError("line " + std::to_string(i) + " endpoints coincide");
    if (l.x == 0.0) throw DomainError("line " + std::to_string(i) + " has zero reactance");
    if (l.limit_a <= 0) throw DomainError("line " + std::to_string(i) + " has no thermal limit");
  }
  for (int i = 0; i < grid.n_loads(); ++i) {
    if (grid.loads[i].id != i) throw DomainError("load ids must be sequential from 0");
    if (grid.loads[i].substation < 0 || grid.loads[i].substation >= grid.n_substations())
      throw DomainError("load substation out of range");
  }
  int slacks = 0;
  for (int i = 0; i < grid.n_generators(); ++i) {
    if (grid.generators[i].id != i) throw DomainError("generator ids must be sequential from 0");
    if (grid.generators[i].substation < 0 ||
        grid.generators[i].substation >= grid.n_substations())
      throw DomainError("generator substation out of range");
    slacks += grid.generators[i].slack ? 1 : 0;
  }
  if (slacks != 1) throw DomainError("grid needs exactly one slack generator");
}

GridModel load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open grid file " + path);

  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  try {
    if (!doc.contains("schema_version"))
      throw ParseError(path + ": missing schema_version");
    if (doc["schema_version"].get<int>() != 1)
      throw ParseError(path + ": unsupported schema_version");
    for (const char* key : {"bases", "substations", "lines", "loads", "generators"})
      if (!doc.contains(key))
        throw ParseError(path + ": missing section '" + std::string(key) + "'");

    GridModel grid;
    grid.name = doc.value("name", std::string("grid"));
    const auto& bases = doc["bases"];
    grid.base_mva = bases.at("power_mva").get<double>();
    grid.voltage_kv = bases.at("voltage_kv").get<std::vector<double>>();
    if (grid.voltage_kv.size() != doc["substations"].size())
      throw ParseError(path + ": voltage_kv length != substation count");

    for (const auto& j : doc["lines"]) {
      Line l;
      l.id = j.at("id").get<int>();
      l.sub_or = j.at("from").get<int>();
      l.sub_ex = j.at("to").get<int>();
      l.r = j.at("r").get<double>();
      l.x = j.at("x").get<double>();
      l.b = j.value("b", 0.0);
      l.limit_a = j.at("limit_a").get<double>();
      l.transformer = j.value("transformer", false);
      grid.lines.push_back(l);
    }
    for (const auto& j : doc["loads"])
      grid.loads.push_back({j.at("id").get<int>(), j.at("substation").get<int>()});
    for (const auto& j : doc["generators"]) {
      Generator g;
      g.id = j.at("id").get<int>();
      g.substation = j.at("substation").get<int>();
      g.kind = gen_kind_from_string(j.at("kind").get<std::string>());
      g.slack = j.value("slack", false);
      grid.generators.push_back(g);
    }

    validate_grid(grid);
    grid.reindex();
    return grid;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::uint64_t grid_fingerprint(const GridModel& grid) {
  std::ostringstream ss;
  ss << grid.base_mva;
  for (double v : grid.voltage_kv) ss << '|' << format_double(v);
  for (const auto& l : grid.lines)
    ss << "|L" << l.sub_or << ',' << l.sub_ex << ',' << format_double(l.r) << ','
       << format_double(l.x) << ',' << format_double(l.b) << ','
       << format_double(l.limit_a) << ',' << l.transformer;
  for (const auto& d : grid.loads) ss << "|D" << d.substation;
  for (const auto& g : grid.generators)
    ss << "|G" << g.substation << ',' << to_string(g.kind) << ',' << g.slack;
  return fnv1a64(ss.str());
}

Topology base_topology(const GridModel& grid) {
  Topology t;
  t.busbar.assign(grid.n_slots(), 1);
  t.line_in_service.assign(grid.n_lines(), 1);
  return t;
}

bool validate_config(std::span<const std::uint8_t> config,
                     std::span<const std::uint8_t> is_line_end) {
  if (config.size() != is_line_end.size() || config.empty()) return false;
  if (config[0] != 1) return false;  // canonical orientation
  int count[2] = {0, 0};
  int lines[2] = {0, 0};
  for (std::size_t i = 0; i < config.size(); ++i) {
    if (config[i] != 1 && config[i] != 2) return false;
    count[config[i] - 1] += 1;
    lines[config[i] - 1] += is_line_end[i] ? 1 : 0;
  }
  for (int b = 0; b < 2; ++b) {
    if (count[b] == 0) continue;
    if (count[b] < 2) return false;   // no lone element on a busbar
    if (lines[b] == 0) return false;  // every live busbar needs a line end
  }
  return true;
}

bool validate_config(const GridModel& grid, int substation,
                     std::span<const std::uint8_t> config) {
  const auto& slots = grid.substation_slots(substation);
  std::vector<std::uint8_t> is_line(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i)
    is_line[i] = grid.slot_is_line_end(slots[i]) ? 1 : 0;
  if (config.size() != slots.size()) return false;
  return validate_config(config, is_line);
}

ApplyResult apply_action(const GridModel& grid, const Topology& topology,
                         const Action& action, std::vector<int>& cooldowns,
                         int cooldown_steps) {
  if (topology.busbar.size() != static_cast<std::size_t>(grid.n_slots()) ||
      topology.line_in_service.size() != static_cast<std::size_t>(grid.n_lines()))
    throw ContractViolation("topology does not match grid");
  if (cooldowns.size() != static_cast<std::size_t>(grid.n_substations()))
    throw ContractViolation("cooldown vector does not match grid");

  ApplyResult res{topology, false};
  if (action.kind == Action::do_nothing) {
    res.applied = true;  // a no-op always "succeeds" and never arms a cooldown
    return res;
  }

  if (action.substation < 0 || action.substation >= grid.n_substations())
    throw ContractViolation("action substation out of range");
  if (!validate_config(grid, action.substation, action.config))
    throw RejectedAction("invalid configuration for substation " +
                         std::to_string(action.substation));

  if (cooldowns[action.substation] > 0) return res;  // degraded to do-nothing

  const auto& slots = grid.substation_slots(action.substation);
  for (std::size_t i = 0; i < slots.size(); ++i)
    res.topology.busbar[slots[i]] = action.config[i];
  cooldowns[action.substation] = cooldown_steps;
  res.applied = true;
  return res;
}

}  // namespace topogrid
