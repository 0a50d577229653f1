#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "topogrid/action_space.hpp"
#include "topogrid/cem.hpp"
#include "topogrid/environment.hpp"
#include "topogrid/policy_net.hpp"
#include "topogrid/scenario.hpp"

namespace topogrid {

struct TopologyRun {
  int topology = 0;  // index into TopologySequence::topologies
  int dwell = 0;     // consecutive rows spent in this configuration
};

// Run-length view of the busbar assignments an episode moved through.
// Identity is the canonical busbar vector alone: line trips and reconnections
// never open a new run, only applied reconfigurations do. The reset row
// counts as the first dwell row, so dwells sum to the step count plus one.
struct TopologySequence {
  std::vector<std::vector<std::uint8_t>> topologies;  // distinct, first-visit order
  std::vector<TopologyRun> runs;
  bool revisit = false;  // some topology occupies two non-adjacent runs

  int total_rows() const;
};

TopologySequence topology_sequence(const GridModel& grid,
                                   const ActionCatalog& catalog,
                                   const EpisodeRecord& episode);

// H = -sum p_k ln(p_k) in nats, where p_k is the fraction of rows spent in
// topology k, aggregated across revisited runs. Zero for a single topology.
double topological_entropy(const TopologySequence& sequence);

// "B" for the all-on-busbar-1 base and "T1", "T2", ... by first appearance,
// joined with "->" in run order, e.g. "B->T1->B->T2".
std::string sequence_signature(const TopologySequence& sequence);

struct EpisodeAnalysis {
  std::string scenario_id;
  std::uint64_t seed = 0;
  double total_reward = 0.0;
  bool success = false;
  TopologySequence sequence;
  std::string signature;
  double entropy = 0.0;
  bool revisit = false;
};

EpisodeAnalysis analyze_episode(const GridModel& grid, const ActionCatalog& catalog,
                                const EpisodeRecord& episode);

struct ScenarioEvaluation {
  std::string scenario_id;
  std::vector<EpisodeAnalysis> episodes;
  int best_episode = 0;  // index of the highest-reward episode
  bool success = false;  // any episode ran the scenario to completion
};

struct EvaluationSummary {
  std::vector<ScenarioEvaluation> scenarios;
  int episodes_total = 0;
  double success_fraction = 0.0;  // successful scenarios / scenarios
};

// Rolls episodes_per_scenario stochastic episodes on every scenario with the
// activity threshold active (quiet states are forced do-nothing), scoring and
// sequencing each one. Episode seeds derive from the master seed and the
// (scenario, episode) position, so runs are reproducible and job-count
// independent.
EvaluationSummary evaluate_agent(const PolicyNet& net, const GridModel& grid,
                                 const ActionCatalog& catalog,
                                 const std::vector<Scenario>& scenarios,
                                 int episodes_per_scenario, std::uint64_t seed,
                                 const EnvConfig& env_config,
                                 double activity_threshold = 0.95, int jobs = 1);

// Writes scenario_scatter.csv (per-scenario stress scores with the trained
// agent's outcome where evaluated), training_curve.csv (per-batch mean and
// boundary), and topology_table.csv (best-reward episodes grouped by
// signature with counts and entropy ranges). Every file starts with the given
// comment lines.
void emit_reports(const std::vector<ScenarioScore>& scores,
                  const std::vector<BatchStats>& history,
                  const EvaluationSummary& summary, const std::string& out_dir,
                  const std::vector<std::string>& comments = {});

}  // namespace topogrid
