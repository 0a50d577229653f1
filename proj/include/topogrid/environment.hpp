#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topogrid/action_space.hpp"
#include "topogrid/electrical_graph.hpp"
#include "topogrid/grid.hpp"
#include "topogrid/power_flow.hpp"
#include "topogrid/scenario.hpp"

namespace topogrid {

enum class EndCause {
  none,
  demand_not_served,
  generator_disconnected,
  islanding,
  divergence,
  scenario_complete,
};

std::string to_string(EndCause cause);
EndCause end_cause_from_string(const std::string& text);

struct EnvConfig {
  SolverMode mode = SolverMode::ac;
  int horizon = kStepsPerWeek;   // episode rows, including the reset row
  int cooldown_steps = 3;        // substation lockout after a reconfiguration
  int reconnect_steps = 10;      // outage length of a tripped line
  double instant_trip = 1.5;     // loading that disconnects a line immediately
  double sustained_trip = 1.0;   // loading that accumulates the overload counter
  int overload_grace = 2;        // consecutive overloaded steps survived before a trip
};

struct StepResult {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;
  EndCause cause = EndCause::none;
  bool applied = false;   // whether the requested action changed (or kept) the topology
  double max_loading = 0.0;
};

// Fixed 324-value observation layout. Each block is contiguous, one value per
// element, in element-id order:
//   [0,15)    generator V (pu), P (MW), Q (MVAr), 5 each
//   [15,48)   load P (MW), Q (MVAr), V (pu), 11 each
//   [48,208)  line origin P (MW), Q (MVAr), V (pu), I (A), then the same four
//             blocks for the extremity end, 20 each
//   [208,228) line loading ratios
//   [228,284) busbar assignment of all 56 connection slots
//   [284,304) line in-service flags
//   [304,324) per-line consecutive-overload counts
struct ObservationLayout {
  static constexpr int size = 324;
  static constexpr int gen_v = 0;
  static constexpr int gen_p = 5;
  static constexpr int gen_q = 10;
  static constexpr int load_p = 15;
  static constexpr int load_q = 26;
  static constexpr int load_v = 37;
  static constexpr int line_p_or = 48;
  static constexpr int line_q_or = 68;
  static constexpr int line_v_or = 88;
  static constexpr int line_i_or = 108;
  static constexpr int line_p_ex = 128;
  static constexpr int line_q_ex = 148;
  static constexpr int line_v_ex = 168;
  static constexpr int line_i_ex = 188;
  static constexpr int loading = 208;
  static constexpr int topology = 228;
  static constexpr int status = 284;
  static constexpr int overload = 304;
};

double compute_reward(const Eigen::VectorXd& loadings);

// Episode engine. One instance is single-threaded; run several instances for
// concurrent rollouts. All stochasticity lives in the caller's policy; stepping
// is fully deterministic.
class Environment {
 public:
  Environment(GridModel grid, ActionCatalog catalog, EnvConfig config = {});

  // Starts an episode at `start_step` of the scenario (needs `horizon` rows
  // from there). The scenario is copied, so the argument only has to outlive
  // the call. Returns the reset-row result (reward 0, done=false).
  StepResult reset(const Scenario& scenario, int start_step = 0);

  // Advances one row. Order: apply action (cooldown rules, islanding check),
  // advance injections, solve, trip overloaded lines (which may strand load or
  // generation), run reconnection/cooldown timers, compute reward and
  // observation. Throws ContractViolation when the episode is already over.
  StepResult step(int action_id);

  const GridModel& grid() const { return grid_; }
  const ActionCatalog& catalog() const { return catalog_; }
  const EnvConfig& config() const { return config_; }
  const Topology& topology() const { return topology_; }
  const std::vector<int>& overload_counters() const { return overload_; }
  const std::vector<int>& reconnect_timers() const { return timers_; }
  const std::vector<int>& substation_cooldowns() const { return cooldowns_; }
  bool episode_done() const { return done_; }
  EndCause cause() const { return cause_; }
  int current_row() const;   // scenario row of the latest result
  int rows_remaining() const;

 private:
  StepResult game_over(EndCause cause, bool applied, double max_loading);
  Eigen::VectorXd build_observation(const PowerFlowSolution& solution,
                                    const InjectionSet& injections,
                                    const ElectricalGraph& solve_graph,
                                    const Eigen::VectorXd& loadings) const;

  GridModel grid_;
  ActionCatalog catalog_;
  EnvConfig config_;
  Scenario scenario_;
  Topology topology_;
  std::vector<int> overload_;
  std::vector<int> timers_;
  std::vector<int> cooldowns_;
  int start_ = 0;
  int row_ = 0;
  bool started_ = false;
  bool done_ = false;
  EndCause cause_ = EndCause::none;
  Eigen::VectorXd last_observation_;
};

// One recorded step() call. `step` is the scenario row the call advanced to.
struct EpisodeStep {
  int step = 0;
  int action_id = 0;
  bool applied = false;
  double reward = 0.0;
  double max_loading = 0.0;
  bool done = false;
  EndCause cause = EndCause::none;
};

struct EpisodeRecord {
  std::string scenario_id;
  std::uint64_t grid_hash = 0;
  std::uint64_t seed = 0;
  int start_step = 0;
  std::vector<EpisodeStep> steps;

  double total_reward() const;
  bool success() const;   // finished with cause scenario_complete
};

void save_episode(const EpisodeRecord& record, const std::string& path);
EpisodeRecord load_episode(const std::string& path);

// Replays a record's action sequence through a fresh environment and returns
// the re-computed record (same scenario rows, rewards recomputed from scratch).
EpisodeRecord rerun_episode(const GridModel& grid, const ActionCatalog& catalog,
                            const Scenario& scenario, const EpisodeRecord& record,
                            const EnvConfig& config = {});

}  // namespace topogrid
