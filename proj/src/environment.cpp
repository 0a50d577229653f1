#include "topogrid/environment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "topogrid/csv.hpp"
#include "topogrid/errors.hpp"

namespace topogrid {
namespace {

std::uint64_t parse_u64(std::string_view text, const std::string& where, int base = 10) {
  std::uint64_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value, base);
  if (ec != std::errc() || ptr != end)
    throw ParseError(where + ": expected an unsigned integer, got '" + std::string(text) + "'");
  return value;
}

}  // namespace

std::string to_string(EndCause cause) {
  switch (cause) {
    case EndCause::none: return "none";
    case EndCause::demand_not_served: return "demand_not_served";
    case EndCause::generator_disconnected: return "generator_disconnected";
    case EndCause::islanding: return "islanding";
    case EndCause::divergence: return "divergence";
    case EndCause::scenario_complete: return "scenario_complete";
  }
  throw ContractViolation("unknown end cause");
}

EndCause end_cause_from_string(const std::string& text) {
  for (EndCause cause : {EndCause::none, EndCause::demand_not_served,
                         EndCause::generator_disconnected, EndCause::islanding,
                         EndCause::divergence, EndCause::scenario_complete})
    if (to_string(cause) == text) return cause;
  throw ParseError("unknown end cause '" + text + "'");
}

double compute_reward(const Eigen::VectorXd& loadings) {
  if (loadings.size() == 0) throw ContractViolation("reward needs at least one line loading");
  double sum = 0.0;
  for (Eigen::Index l = 0; l < loadings.size(); ++l) {
    const double rho = loadings[l];
    sum += std::max(0.0, 1.0 - rho * rho);
  }
  return sum / static_cast<double>(loadings.size());
}

Environment::Environment(GridModel grid, ActionCatalog catalog, EnvConfig config)
    : grid_(std::move(grid)), catalog_(std::move(catalog)), config_(config) {
  if (config_.horizon < 2) throw ContractViolation("episode horizon must be at least 2 rows");
  if (config_.cooldown_steps < 0 || config_.reconnect_steps < 1)
    throw ContractViolation("timer configuration out of range");
  if (config_.instant_trip < config_.sustained_trip)
    throw ContractViolation("instant trip threshold below the sustained one");
  if (config_.overload_grace < 0) throw ContractViolation("overload grace must be non-negative");
  if (catalog_.size() == 0) throw ContractViolation("action catalog is empty");
  if (grid_.n_generators() > 5 || grid_.n_loads() > 11 || grid_.n_lines() > 20 ||
      grid_.n_slots() > 56)
    throw ContractViolation("grid does not fit the fixed observation layout");
}

int Environment::current_row() const {
  if (!started_) throw ContractViolation("no episode started");
  return row_;
}

int Environment::rows_remaining() const {
  if (!started_) throw ContractViolation("no episode started");
  return config_.horizon - 1 - (row_ - start_);
}

StepResult Environment::reset(const Scenario& scenario, int start_step) {
  if (scenario.load_p.cols() != grid_.n_loads() ||
      scenario.gen_p.cols() != grid_.n_generators())
    throw DomainError("scenario shape does not match the grid");
  if (start_step < 0) throw DomainError("start step must be non-negative");
  if (scenario.n_steps() < start_step + config_.horizon)
    throw DomainError("scenario '" + scenario.id + "' has " +
                      std::to_string(scenario.n_steps()) + " rows, needs " +
                      std::to_string(start_step + config_.horizon) + " for this episode");

  scenario_ = scenario;
  start_ = row_ = start_step;
  topology_ = base_topology(grid_);
  overload_.assign(static_cast<std::size_t>(grid_.n_lines()), 0);
  timers_.assign(static_cast<std::size_t>(grid_.n_lines()), 0);
  cooldowns_.assign(static_cast<std::size_t>(grid_.n_substations()), 0);
  done_ = false;
  cause_ = EndCause::none;
  started_ = true;

  SolveOptions opts;
  opts.mode = config_.mode;
  const InjectionSet inj = scenario.injections_at(row_);
  const ElectricalGraph graph = electrical_graph(grid_, topology_);
  const PowerFlowSolution sol = solve_power_flow(grid_, topology_, inj, opts);
  if (!sol.converged) {
    started_ = false;
    throw DomainError("power flow diverged on row " + std::to_string(start_step) +
                      " of scenario '" + scenario.id + "'");
  }
  const Eigen::VectorXd loadings = compute_loadings(sol, grid_);
  last_observation_ = build_observation(sol, inj, graph, loadings);

  StepResult res;
  res.observation = last_observation_;
  res.applied = true;
  res.max_loading = loadings.size() > 0 ? loadings.maxCoeff() : 0.0;
  return res;
}

StepResult Environment::step(int action_id) {
  if (!started_) throw ContractViolation("step() called before reset()");
  if (done_) throw ContractViolation("step() called on a finished episode");

  const Action& action = catalog_.action(action_id);

  // The call consumes the next scenario row; the action takes effect on entry.
  ++row_;

  const Topology before = topology_;
  const ApplyResult applied = apply_action(grid_, topology_, action, cooldowns_,
                                           config_.cooldown_steps);
  topology_ = applied.topology;
  const bool armed = applied.applied && action.kind == Action::reconfigure;
  const int armed_sub = armed ? action.substation : -1;

  if (!(topology_ == before)) {
    const ElectricalGraph graph = electrical_graph(grid_, topology_);
    if (detect_islands(graph)) return game_over(EndCause::islanding, applied.applied, 0.0);
  }

  const InjectionSet inj = scenario_.injections_at(row_);
  const ElectricalGraph solve_graph = electrical_graph(grid_, topology_);
  SolveOptions opts;
  opts.mode = config_.mode;
  const PowerFlowSolution sol = solve_power_flow(grid_, topology_, inj, opts);
  if (!sol.converged) return game_over(EndCause::divergence, applied.applied, 0.0);

  const Eigen::VectorXd loadings = compute_loadings(sol, grid_);
  const double max_loading = loadings.size() > 0 ? loadings.maxCoeff() : 0.0;

  std::vector<std::uint8_t> tripped(static_cast<std::size_t>(grid_.n_lines()), 0);
  bool any_trip = false;
  for (int l = 0; l < grid_.n_lines(); ++l) {
    if (!topology_.line_in_service[static_cast<std::size_t>(l)]) continue;
    const double rho = loadings[l];
    if (rho > config_.instant_trip) {
      tripped[static_cast<std::size_t>(l)] = 1;
      any_trip = true;
    } else if (rho > config_.sustained_trip) {
      if (++overload_[static_cast<std::size_t>(l)] > config_.overload_grace) {
        tripped[static_cast<std::size_t>(l)] = 1;
        any_trip = true;
      }
    } else {
      overload_[static_cast<std::size_t>(l)] = 0;
    }
  }
  for (int l = 0; l < grid_.n_lines(); ++l) {
    if (!tripped[static_cast<std::size_t>(l)]) continue;
    topology_.line_in_service[static_cast<std::size_t>(l)] = 0;
    timers_[static_cast<std::size_t>(l)] = config_.reconnect_steps;
    overload_[static_cast<std::size_t>(l)] = 0;
  }
  if (any_trip) {
    const ElectricalGraph graph = electrical_graph(grid_, topology_);
    const int slack_comp = graph.node_component[graph.slack_node];
    for (const Load& load : grid_.loads) {
      const int node = graph.slot_node[grid_.slot_index({ElementRef::load, load.id})];
      if (graph.node_component[node] != slack_comp)
        return game_over(EndCause::demand_not_served, applied.applied, max_loading);
    }
    for (const Generator& gen : grid_.generators) {
      const int node = graph.slot_node[grid_.slot_index({ElementRef::gen, gen.id})];
      if (graph.node_component[node] != slack_comp)
        return game_over(EndCause::generator_disconnected, applied.applied, max_loading);
    }
  }

  // Timers armed this step sit out one decrement, so a 10-step outage spans
  // exactly the next ten rows and a cooldown of 3 blocks exactly three calls.
  for (int l = 0; l < grid_.n_lines(); ++l) {
    auto& timer = timers_[static_cast<std::size_t>(l)];
    if (timer == 0 || tripped[static_cast<std::size_t>(l)]) continue;
    if (--timer == 0) {
      topology_.line_in_service[static_cast<std::size_t>(l)] = 1;
      overload_[static_cast<std::size_t>(l)] = 0;
    }
  }
  for (int s = 0; s < grid_.n_substations(); ++s)
    if (cooldowns_[static_cast<std::size_t>(s)] > 0 && s != armed_sub)
      --cooldowns_[static_cast<std::size_t>(s)];

  if (row_ - start_ == config_.horizon - 1) {
    done_ = true;
    cause_ = EndCause::scenario_complete;
  }

  StepResult res;
  res.reward = compute_reward(loadings);
  res.done = done_;
  res.cause = cause_;
  res.applied = applied.applied;
  res.max_loading = max_loading;
  last_observation_ = build_observation(sol, inj, solve_graph, loadings);
  res.observation = last_observation_;
  return res;
}

StepResult Environment::game_over(EndCause cause, bool applied, double max_loading) {
  done_ = true;
  cause_ = cause;
  StepResult res;
  res.observation = last_observation_;
  res.reward = 0.0;
  res.done = true;
  res.cause = cause;
  res.applied = applied;
  res.max_loading = max_loading;
  return res;
}

Eigen::VectorXd Environment::build_observation(const PowerFlowSolution& sol,
                                               const InjectionSet& inj,
                                               const ElectricalGraph& solve_graph,
                                               const Eigen::VectorXd& loadings) const {
  using L = ObservationLayout;
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(L::size);

  for (int g = 0; g < grid_.n_generators(); ++g) {
    const int node = solve_graph.slot_node[grid_.slot_index({ElementRef::gen, g})];
    obs[L::gen_v + g] = sol.node_v[node];
    obs[L::gen_p + g] = sol.gen_p[g];
    obs[L::gen_q + g] = sol.gen_q[g];
  }
  for (int i = 0; i < grid_.n_loads(); ++i) {
    const int node = solve_graph.slot_node[grid_.slot_index({ElementRef::load, i})];
    obs[L::load_p + i] = inj.load_p[i];
    obs[L::load_q + i] = inj.load_q[i];
    obs[L::load_v + i] = sol.node_v[node];
  }
  for (int l = 0; l < grid_.n_lines(); ++l) {
    const bool live = topology_.line_in_service[static_cast<std::size_t>(l)] != 0;
    if (live) {
      obs[L::line_p_or + l] = sol.p_or[l];
      obs[L::line_q_or + l] = sol.q_or[l];
      obs[L::line_i_or + l] = sol.i_or[l];
      obs[L::line_p_ex + l] = sol.p_ex[l];
      obs[L::line_q_ex + l] = sol.q_ex[l];
      obs[L::line_i_ex + l] = sol.i_ex[l];
      const int node_or = solve_graph.line_or_node[l];
      const int node_ex = solve_graph.line_ex_node[l];
      obs[L::line_v_or + l] = node_or >= 0 ? sol.node_v[node_or] : 0.0;
      obs[L::line_v_ex + l] = node_ex >= 0 ? sol.node_v[node_ex] : 0.0;
      obs[L::loading + l] = loadings[l];
    }
    obs[L::status + l] = live ? 1.0 : 0.0;
    obs[L::overload + l] = overload_[static_cast<std::size_t>(l)];
  }
  for (int s = 0; s < grid_.n_slots(); ++s)
    obs[L::topology + s] = topology_.busbar[static_cast<std::size_t>(s)];
  return obs;
}

double EpisodeRecord::total_reward() const {
  double sum = 0.0;
  for (const EpisodeStep& s : steps) sum += s.reward;
  return sum;
}

bool EpisodeRecord::success() const {
  return !steps.empty() && steps.back().cause == EndCause::scenario_complete;
}

void save_episode(const EpisodeRecord& record, const std::string& path) {
  CsvWriter out(path);
  out.comment("scenario=" + record.scenario_id);
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(record.grid_hash));
  out.comment(std::string("grid=") + hex);
  out.comment("seed=" + std::to_string(record.seed));
  out.comment("start=" + std::to_string(record.start_step));
  out.header({"step", "action_id", "applied", "reward", "max_rho", "done", "cause"});
  for (const EpisodeStep& s : record.steps)
    out.row({std::to_string(s.step), std::to_string(s.action_id),
             s.applied ? "1" : "0", format_double(s.reward), format_double(s.max_loading),
             s.done ? "1" : "0", to_string(s.cause)});
}

EpisodeRecord load_episode(const std::string& path) {
  CsvTable table = read_csv(path);
  const std::vector<std::string> expected = {"step",    "action_id", "applied", "reward",
                                             "max_rho", "done",      "cause"};
  if (table.header != expected)
    throw ParseError(path + ": unexpected episode header");

  EpisodeRecord record;
  const auto fields = table.comment_fields();
  if (auto it = fields.find("scenario"); it != fields.end()) record.scenario_id = it->second;
  if (auto it = fields.find("grid"); it != fields.end())
    record.grid_hash = parse_u64(it->second, path + ": grid hash", 16);
  if (auto it = fields.find("seed"); it != fields.end())
    record.seed = parse_u64(it->second, path + ": seed");
  if (auto it = fields.find("start"); it != fields.end())
    record.start_step = static_cast<int>(parse_int(it->second, path + ": start"));

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = path + ": row " + std::to_string(r);
    EpisodeStep s;
    s.step = static_cast<int>(parse_int(row[0], where + " step"));
    s.action_id = static_cast<int>(parse_int(row[1], where + " action_id"));
    s.applied = parse_int(row[2], where + " applied") != 0;
    s.reward = parse_double(row[3], where + " reward");
    s.max_loading = parse_double(row[4], where + " max_rho");
    s.done = parse_int(row[5], where + " done") != 0;
    s.cause = end_cause_from_string(row[6]);
    if (s.done != (s.cause != EndCause::none))
      throw ParseError(where + ": done flag and cause disagree");
    if (s.done && r + 1 != table.rows.size())
      throw ParseError(where + ": terminal row before the end of the record");
    record.steps.push_back(s);
  }
  return record;
}

EpisodeRecord rerun_episode(const GridModel& grid, const ActionCatalog& catalog,
                            const Scenario& scenario, const EpisodeRecord& record,
                            const EnvConfig& config) {
  Environment env(grid, catalog, config);
  env.reset(scenario, record.start_step);

  EpisodeRecord out;
  out.scenario_id = scenario.id;
  out.grid_hash = grid_fingerprint(grid);
  out.seed = record.seed;
  out.start_step = record.start_step;
  for (const EpisodeStep& s : record.steps) {
    const StepResult res = env.step(s.action_id);
    EpisodeStep fresh;
    fresh.step = env.current_row();
    fresh.action_id = s.action_id;
    fresh.applied = res.applied;
    fresh.reward = res.reward;
    fresh.max_loading = res.max_loading;
    fresh.done = res.done;
    fresh.cause = res.cause;
    out.steps.push_back(fresh);
    if (res.done) break;
  }
  return out;
}

}  // namespace topogrid
