#include "topogrid/action_space.hpp"

#include "topogrid/errors.hpp"

namespace topogrid {

std::int64_t count_configs(int n, int n_prime) {
  if (n < 2 || n > 62) throw DomainError("count_configs: n out of range");
  if (n_prime < 0 || n_prime >= n)
    throw DomainError("count_configs: n_prime out of range");

  const std::int64_t alpha = std::int64_t{1} << (n - 1);
  const std::int64_t beta = n - (n == 2 ? 1 : 0);
  const std::int64_t gamma = (std::int64_t{1} << n_prime) - 1 - n_prime;
  // With a single line end and two or more non-line elements, the state
  // "line alone vs. everything else" is removed both as a one-element busbar
  // and as a line-less busbar; give it back once.
  const std::int64_t overlap = (n - n_prime == 1 && n_prime >= 2) ? 1 : 0;
  return alpha - beta - gamma + overlap;
}

std::vector<std::vector<std::uint8_t>> enumerate_configs(
    std::span<const std::uint8_t> is_line_end) {
  const int n = static_cast<int>(is_line_end.size());
  std::vector<std::vector<std::uint8_t>> configs;
  if (n < 1 || n > 30) return configs;

  std::vector<std::uint8_t> cfg(n);
  for (std::uint32_t mask = 0; mask < (1u << n); mask += 2) {
    // even masks keep element 0 on busbar 1: one representative per mirror pair
    for (int i = 0; i < n; ++i) cfg[i] = (mask >> i) & 1 ? 2 : 1;
    if (validate_config(cfg, is_line_end)) configs.push_back(cfg);
  }
  return configs;
}

const Action& ActionCatalog::action(int id) const {
  if (id < 0 || id >= size()) throw ContractViolation("action id out of range");
  return entries[id].action;
}

std::int64_t ActionCatalog::total_configs() const {
  std::int64_t total = 0;
  for (const auto& c : counts) total += c.n_configs;
  return total;
}

ActionCatalog build_action_catalog(const GridModel& grid) {
  validate_grid(grid);
  ActionCatalog catalog;
  for (int sub = 0; sub < grid.n_substations(); ++sub) {
    const auto& slots = grid.substation_slots(sub);
    std::vector<std::uint8_t> is_line(slots.size());
    int non_line = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      is_line[i] = grid.slot_is_line_end(slots[i]) ? 1 : 0;
      non_line += is_line[i] ? 0 : 1;
    }

    auto configs = enumerate_configs(is_line);
    for (std::size_t k = 0; k < configs.size(); ++k) {
      CatalogEntry entry;
      entry.substation = sub;
      entry.config_index = static_cast<int>(k);
      if (sub == 0 && k == 0) {
        entry.action = Action::nothing();  // global do-nothing alias
      } else {
        entry.action.kind = Action::reconfigure;
        entry.action.substation = sub;
        entry.action.config = configs[k];
      }
      catalog.entries.push_back(std::move(entry));
    }
    catalog.counts.push_back({sub, static_cast<int>(slots.size()), non_line,
                              static_cast<std::int64_t>(configs.size())});
  }
  return catalog;
}

std::string action_label(const CatalogEntry& entry) {
  if (entry.action.kind == Action::do_nothing) return "nothing";
  std::string s = "s" + std::to_string(entry.substation) + ":";
  for (auto b : entry.action.config) s += static_cast<char>('0' + b);
  return s;
}

}  // namespace topogrid
