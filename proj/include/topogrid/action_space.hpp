#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "topogrid/grid.hpp"

namespace topogrid {

// Closed-form count of valid two-busbar configurations for a substation with
// n elements, n_prime of them non-line (loads/generators). Mirror images
// count once. Throws DomainError outside n >= 2, 0 <= n_prime < n.
std::int64_t count_configs(int n, int n_prime);

// All valid configurations for the given element kinds, mirror-deduplicated
// by pinning the first element to busbar 1. Ordered with the all-on-busbar-1
// identity first, then ascending by assignment pattern.
std::vector<std::vector<std::uint8_t>> enumerate_configs(
    std::span<const std::uint8_t> is_line_end);

struct CatalogEntry {
  Action action;
  int substation = -1;
  int config_index = -1;  // position within the substation's config list
};

struct SubstationCount {
  int substation = 0;
  int n_elements = 0;
  int n_non_line = 0;
  std::int64_t n_configs = 0;
};

// Flat, deterministic action list: substation 0's configs first, then 1, ...
// Each substation lists its identity configuration first. Entry 0 doubles as
// the global do-nothing (it aliases substation 0's identity and never arms a
// cooldown); identity entries of the other substations stay selectable.
struct ActionCatalog {
  std::vector<CatalogEntry> entries;
  std::vector<SubstationCount> counts;

  int size() const { return static_cast<int>(entries.size()); }
  const Action& action(int id) const;
  std::int64_t total_configs() const;
};

ActionCatalog build_action_catalog(const GridModel& grid);

// Compact label, e.g. "nothing" or "s8:12211" (busbar per slot).
std::string action_label(const CatalogEntry& entry);

}  // namespace topogrid
