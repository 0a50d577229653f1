#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topogrid/grid.hpp"
#include "topogrid/power_flow.hpp"

namespace topogrid {

// One injection time series at five-minute resolution. Matrices are row-per-step:
// load_p/load_q are T x n_loads (MW / MVAr), gen_p/gen_v are T x n_generators
// (MW / voltage setpoint in pu). The slack generator's gen_p column is a
// schedule hint only; the solver redispatches it to balance each step.
struct Scenario {
  std::string id;
  int timestep_seconds = 300;
  Eigen::MatrixXd load_p;
  Eigen::MatrixXd load_q;
  Eigen::MatrixXd gen_p;
  Eigen::MatrixXd gen_v;

  int n_steps() const { return static_cast<int>(load_p.rows()); }
  InjectionSet injections_at(int t) const;
};

// Steps per day and per scored week at five-minute resolution.
inline constexpr int kStepsPerDay = 288;
inline constexpr int kStepsPerWeek = 7 * kStepsPerDay;

// Strict CSV round trip. The column layout is fixed:
//   step,load_p_0..load_p_10,load_q_0..load_q_10,gen_p_0..gen_p_4,gen_v_0..gen_v_4
// Header comments carry the scenario id and provenance key=value pairs.
Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& extra_comments = {});

// Knobs for the synthetic generator. Defaults produce a quiet base week when
// stress is zero; raising stress adds evening demand surges on the loads that
// feed through the 138/20 kV interface transformers.
struct ScenarioParams {
  int n_steps = kStepsPerWeek;
  double load_scale = 1.0;
  double noise_level = 0.02;
  double renewable_variability = 0.3;
  double stress = 1.0;
  double power_factor = 0.95;
  std::vector<double> base_load_p;  // empty selects the built-in base demand
};

// Deterministic batch generation: the same (params, count, seed) triple always
// yields byte-identical scenarios with distinct ids sc-0000, sc-0001, ...
std::vector<Scenario> generate_synthetic(const ScenarioParams& params, int count,
                                         std::uint64_t seed);

// Difficulty summary of one scenario under the reference (unsplit) topology
// with line tripping disabled: every step of the first week is solved
// independently and the loading envelope is recorded.
struct ScenarioScore {
  std::string scenario_id;
  int days_above = 0;       // days (out of 7) with any line loading >= threshold
  double max_loading = 0.0; // week-wide maximum loading ratio
  Eigen::VectorXd line_max; // per-line maximum loading ratio
  bool divergent = false;   // true if any step failed to converge
};

struct ScoreOptions {
  SolverMode mode = SolverMode::ac;
  double day_threshold = 0.95;
};

ScenarioScore score_scenario(const GridModel& grid, const Scenario& scenario,
                             const ScoreOptions& options = {});

// Picks the training scenario: highest max_loading among non-divergent scores,
// ties broken by more days_above, then by smaller scenario id.
std::string select_training_scenario(const std::vector<ScenarioScore>& scores);

}  // namespace topogrid
