#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "topogrid/action_space.hpp"
#include "topogrid/analytics.hpp"
#include "topogrid/cem.hpp"
#include "topogrid/environment.hpp"
#include "topogrid/errors.hpp"
#include "topogrid/grid.hpp"
#include "topogrid/policy_net.hpp"
#include "topogrid/power_flow.hpp"
#include "topogrid/rng.hpp"
#include "topogrid/scenario.hpp"

namespace py = pybind11;
using namespace topogrid;

PYBIND11_MODULE(_topogrid, m) {
  m.doc() = "Busbar-splitting grid control workbench";
  m.attr("__version__") = TOPOGRID_VERSION;
  m.attr("STEPS_PER_DAY") = kStepsPerDay;
  m.attr("STEPS_PER_WEEK") = kStepsPerWeek;

  py::register_exception<ContractViolation>(m, "ContractViolation",
                                            PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::enum_<SolverMode>(m, "SolverMode")
      .value("ac", SolverMode::ac)
      .value("dc", SolverMode::dc);

  py::enum_<GenKind>(m, "GenKind")
      .value("wind", GenKind::wind)
      .value("solar", GenKind::solar)
      .value("nuclear", GenKind::nuclear)
      .value("thermal", GenKind::thermal);

  py::enum_<EndCause>(m, "EndCause")
      .value("none", EndCause::none)
      .value("demand_not_served", EndCause::demand_not_served)
      .value("generator_disconnected", EndCause::generator_disconnected)
      .value("islanding", EndCause::islanding)
      .value("divergence", EndCause::divergence)
      .value("scenario_complete", EndCause::scenario_complete);

  py::class_<Line>(m, "Line")
      .def_readonly("id", &Line::id)
      .def_readonly("sub_or", &Line::sub_or)
      .def_readonly("sub_ex", &Line::sub_ex)
      .def_readonly("r", &Line::r)
      .def_readonly("x", &Line::x)
      .def_readonly("b", &Line::b)
      .def_readonly("limit_a", &Line::limit_a)
      .def_readonly("transformer", &Line::transformer);

  py::class_<Load>(m, "Load")
      .def_readonly("id", &Load::id)
      .def_readonly("substation", &Load::substation);

  py::class_<Generator>(m, "Generator")
      .def_readonly("id", &Generator::id)
      .def_readonly("substation", &Generator::substation)
      .def_readonly("kind", &Generator::kind)
      .def_readonly("slack", &Generator::slack);

  py::class_<GridModel>(m, "GridModel")
      .def_readonly("name", &GridModel::name)
      .def_readonly("base_mva", &GridModel::base_mva)
      .def_readonly("voltage_kv", &GridModel::voltage_kv)
      .def_readonly("lines", &GridModel::lines)
      .def_readonly("loads", &GridModel::loads)
      .def_readonly("generators", &GridModel::generators)
      .def_property_readonly("n_substations", &GridModel::n_substations)
      .def_property_readonly("n_lines", &GridModel::n_lines)
      .def_property_readonly("n_loads", &GridModel::n_loads)
      .def_property_readonly("n_generators", &GridModel::n_generators)
      .def_property_readonly("n_slots", &GridModel::n_slots)
      .def("substation_slots", &GridModel::substation_slots,
           py::return_value_policy::copy);

  m.def("load_grid", &load_grid, py::arg("path"));
  m.def("grid_fingerprint", &grid_fingerprint, py::arg("grid"));
  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("a"),
        py::arg("b") = 0, py::arg("c") = 0);

  py::class_<Topology>(m, "Topology")
      .def_readwrite("busbar", &Topology::busbar)
      .def_readwrite("line_in_service", &Topology::line_in_service)
      .def(py::self == py::self);

  m.def("base_topology", &base_topology, py::arg("grid"));

  py::class_<Action> action(m, "Action");
  py::enum_<Action::Kind>(action, "Kind")
      .value("do_nothing", Action::do_nothing)
      .value("reconfigure", Action::reconfigure);
  action.def_readonly("kind", &Action::kind)
      .def_readonly("substation", &Action::substation)
      .def_readonly("config", &Action::config);

  py::class_<CatalogEntry>(m, "CatalogEntry")
      .def_readonly("action", &CatalogEntry::action)
      .def_readonly("substation", &CatalogEntry::substation)
      .def_readonly("config_index", &CatalogEntry::config_index);

  py::class_<SubstationCount>(m, "SubstationCount")
      .def_readonly("substation", &SubstationCount::substation)
      .def_readonly("n_elements", &SubstationCount::n_elements)
      .def_readonly("n_non_line", &SubstationCount::n_non_line)
      .def_readonly("n_configs", &SubstationCount::n_configs);

  py::class_<ActionCatalog>(m, "ActionCatalog")
      .def_readonly("entries", &ActionCatalog::entries)
      .def_readonly("counts", &ActionCatalog::counts)
      .def("__len__", &ActionCatalog::size)
      .def("action", &ActionCatalog::action, py::arg("id"),
           py::return_value_policy::copy)
      .def("total_configs", &ActionCatalog::total_configs);

  m.def("count_configs", &count_configs, py::arg("n"), py::arg("n_prime"));
  m.def("build_action_catalog", &build_action_catalog, py::arg("grid"));
  m.def("action_label", &action_label, py::arg("entry"));

  py::class_<Scenario>(m, "Scenario")
      .def(py::init<>())
      .def_readwrite("id", &Scenario::id)
      .def_readwrite("timestep_seconds", &Scenario::timestep_seconds)
      .def_readwrite("load_p", &Scenario::load_p)
      .def_readwrite("load_q", &Scenario::load_q)
      .def_readwrite("gen_p", &Scenario::gen_p)
      .def_readwrite("gen_v", &Scenario::gen_v)
      .def("n_steps", &Scenario::n_steps);

  py::class_<ScenarioParams>(m, "ScenarioParams")
      .def(py::init<>())
      .def_readwrite("n_steps", &ScenarioParams::n_steps)
      .def_readwrite("load_scale", &ScenarioParams::load_scale)
      .def_readwrite("noise_level", &ScenarioParams::noise_level)
      .def_readwrite("renewable_variability",
                     &ScenarioParams::renewable_variability)
      .def_readwrite("stress", &ScenarioParams::stress)
      .def_readwrite("power_factor", &ScenarioParams::power_factor)
      .def_readwrite("base_load_p", &ScenarioParams::base_load_p);

  py::class_<ScenarioScore>(m, "ScenarioScore")
      .def(py::init<>())
      .def_readwrite("scenario_id", &ScenarioScore::scenario_id)
      .def_readwrite("days_above", &ScenarioScore::days_above)
      .def_readwrite("max_loading", &ScenarioScore::max_loading)
      .def_readwrite("line_max", &ScenarioScore::line_max)
      .def_readwrite("divergent", &ScenarioScore::divergent);

  py::class_<ScoreOptions>(m, "ScoreOptions")
      .def(py::init<>())
      .def_readwrite("mode", &ScoreOptions::mode)
      .def_readwrite("day_threshold", &ScoreOptions::day_threshold);

  m.def("load_scenario", &load_scenario, py::arg("path"));
  m.def("save_scenario", &save_scenario, py::arg("scenario"), py::arg("path"),
        py::arg("extra_comments") =
            std::vector<std::pair<std::string, std::string>>{});
  m.def("generate_synthetic", &generate_synthetic, py::arg("params"),
        py::arg("count"), py::arg("seed"));
  m.def("score_scenario", &score_scenario, py::arg("grid"), py::arg("scenario"),
        py::arg("options") = ScoreOptions{},
        py::call_guard<py::gil_scoped_release>());
  m.def("select_training_scenario", &select_training_scenario,
        py::arg("scores"));

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("mode", &EnvConfig::mode)
      .def_readwrite("horizon", &EnvConfig::horizon)
      .def_readwrite("cooldown_steps", &EnvConfig::cooldown_steps)
      .def_readwrite("reconnect_steps", &EnvConfig::reconnect_steps)
      .def_readwrite("instant_trip", &EnvConfig::instant_trip)
      .def_readwrite("sustained_trip", &EnvConfig::sustained_trip)
      .def_readwrite("overload_grace", &EnvConfig::overload_grace);

  py::class_<StepResult>(m, "StepResult")
      .def_readonly("observation", &StepResult::observation)
      .def_readonly("reward", &StepResult::reward)
      .def_readonly("done", &StepResult::done)
      .def_readonly("cause", &StepResult::cause)
      .def_readonly("applied", &StepResult::applied)
      .def_readonly("max_loading", &StepResult::max_loading);

  py::class_<ObservationLayout>(m, "ObservationLayout")
      .def_readonly_static("size", &ObservationLayout::size)
      .def_readonly_static("gen_v", &ObservationLayout::gen_v)
      .def_readonly_static("gen_p", &ObservationLayout::gen_p)
      .def_readonly_static("gen_q", &ObservationLayout::gen_q)
      .def_readonly_static("load_p", &ObservationLayout::load_p)
      .def_readonly_static("load_q", &ObservationLayout::load_q)
      .def_readonly_static("load_v", &ObservationLayout::load_v)
      .def_readonly_static("line_p_or", &ObservationLayout::line_p_or)
      .def_readonly_static("line_q_or", &ObservationLayout::line_q_or)
      .def_readonly_static("line_v_or", &ObservationLayout::line_v_or)
      .def_readonly_static("line_i_or", &ObservationLayout::line_i_or)
      .def_readonly_static("line_p_ex", &ObservationLayout::line_p_ex)
      .def_readonly_static("line_q_ex", &ObservationLayout::line_q_ex)
      .def_readonly_static("line_v_ex", &ObservationLayout::line_v_ex)
      .def_readonly_static("line_i_ex", &ObservationLayout::line_i_ex)
      .def_readonly_static("loading", &ObservationLayout::loading)
      .def_readonly_static("topology", &ObservationLayout::topology)
      .def_readonly_static("status", &ObservationLayout::status)
      .def_readonly_static("overload", &ObservationLayout::overload);

  m.def("compute_reward", &compute_reward, py::arg("loadings"));

  py::class_<Environment>(m, "Environment")
      .def(py::init<GridModel, ActionCatalog, EnvConfig>(), py::arg("grid"),
           py::arg("catalog"), py::arg("config") = EnvConfig{})
      .def("reset", &Environment::reset, py::arg("scenario"),
           py::arg("start_step") = 0)
      .def("step", &Environment::step, py::arg("action_id"))
      .def_property_readonly("episode_done", &Environment::episode_done)
      .def_property_readonly("cause", &Environment::cause)
      .def_property_readonly("current_row", &Environment::current_row)
      .def_property_readonly("rows_remaining", &Environment::rows_remaining)
      .def_property_readonly("topology", &Environment::topology,
                             py::return_value_policy::copy);

  py::class_<EpisodeStep>(m, "EpisodeStep")
      .def_readonly("step", &EpisodeStep::step)
      .def_readonly("action_id", &EpisodeStep::action_id)
      .def_readonly("applied", &EpisodeStep::applied)
      .def_readonly("reward", &EpisodeStep::reward)
      .def_readonly("max_loading", &EpisodeStep::max_loading)
      .def_readonly("done", &EpisodeStep::done)
      .def_readonly("cause", &EpisodeStep::cause);

  py::class_<EpisodeRecord>(m, "EpisodeRecord")
      .def_readonly("scenario_id", &EpisodeRecord::scenario_id)
      .def_readonly("grid_hash", &EpisodeRecord::grid_hash)
      .def_readonly("seed", &EpisodeRecord::seed)
      .def_readonly("start_step", &EpisodeRecord::start_step)
      .def_readonly("steps", &EpisodeRecord::steps)
      .def("total_reward", &EpisodeRecord::total_reward)
      .def("success", &EpisodeRecord::success);

  m.def("save_episode", &save_episode, py::arg("record"), py::arg("path"));
  m.def("load_episode", &load_episode, py::arg("path"));
  m.def("rerun_episode", &rerun_episode, py::arg("grid"), py::arg("catalog"),
        py::arg("scenario"), py::arg("record"), py::arg("config") = EnvConfig{},
        py::call_guard<py::gil_scoped_release>());

  py::class_<TrainingPair>(m, "TrainingPair")
      .def(py::init([](Eigen::VectorXd observation, int action) {
             return TrainingPair{std::move(observation), action};
           }),
           py::arg("observation"), py::arg("action"))
      .def_readwrite("observation", &TrainingPair::observation)
      .def_readwrite("action", &TrainingPair::action);

  py::class_<PolicyNet>(m, "PolicyNet")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def_readonly_static("INPUTS", &PolicyNet::kInputs)
      .def_readonly_static("HIDDEN", &PolicyNet::kHidden)
      .def_readonly_static("ACTIONS", &PolicyNet::kActions)
      .def("forward", &PolicyNet::forward, py::arg("observation"))
      .def("train_step", &PolicyNet::train_step, py::arg("pairs"),
           py::arg("learning_rate"))
      .def("fit_normalization", &PolicyNet::fit_normalization, py::arg("pairs"))
      .def_property_readonly("normalization_frozen",
                             &PolicyNet::normalization_frozen)
      .def("save", &PolicyNet::save, py::arg("path"))
      .def_static("load", &PolicyNet::load, py::arg("path"));

  py::class_<TrainerConfig>(m, "TrainerConfig")
      .def(py::init<>())
      .def_readwrite("batch_size", &TrainerConfig::batch_size)
      .def_readwrite("elite_percentile", &TrainerConfig::elite_percentile)
      .def_readwrite("learning_rate", &TrainerConfig::learning_rate)
      .def_readwrite("activity_threshold", &TrainerConfig::activity_threshold)
      .def_readwrite("stopping_window", &TrainerConfig::stopping_window)
      .def_readwrite("boundary_tolerance", &TrainerConfig::boundary_tolerance)
      .def_readwrite("gap_tolerance", &TrainerConfig::gap_tolerance)
      .def_readwrite("max_batches", &TrainerConfig::max_batches)
      .def_readwrite("checkpoint_every", &TrainerConfig::checkpoint_every)
      .def_readwrite("seed", &TrainerConfig::seed)
      .def_readwrite("jobs", &TrainerConfig::jobs)
      .def_readwrite("out_dir", &TrainerConfig::out_dir);

  py::class_<BatchStats>(m, "BatchStats")
      .def_readonly("batch", &BatchStats::batch)
      .def_readonly("rewards", &BatchStats::rewards)
      .def_readonly("reward_boundary", &BatchStats::reward_boundary)
      .def_readonly("mean_reward", &BatchStats::mean_reward)
      .def_readonly("successes", &BatchStats::successes)
      .def_readonly("sampling_capped", &BatchStats::sampling_capped);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("net", &TrainResult::net)
      .def_readonly("history", &TrainResult::history)
      .def_readonly("stopped_early", &TrainResult::stopped_early);

  py::class_<RolloutResult>(m, "RolloutResult")
      .def_readonly("record", &RolloutResult::record)
      .def_readonly("pairs", &RolloutResult::pairs);

  py::class_<IEpisodeEnv>(m, "IEpisodeEnv");
  py::class_<GridEpisodeEnv, IEpisodeEnv>(m, "GridEpisodeEnv")
      .def(py::init<const GridModel&, const ActionCatalog&, Scenario,
                    const EnvConfig&, int>(),
           py::arg("grid"), py::arg("catalog"), py::arg("scenario"),
           py::arg("config") = EnvConfig{}, py::arg("start_step") = 0);

  m.def("rollout_episode", &rollout_episode, py::arg("net"), py::arg("env"),
        py::arg("seed"), py::arg("activity_threshold") = 0.95,
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "train",
      [](const TrainerConfig& config, const GridModel& grid,
         const ActionCatalog& catalog, const Scenario& scenario,
         const EnvConfig& env_config, int start_step) {
        return train(config, grid, catalog, scenario, env_config, start_step);
      },
      py::arg("config"), py::arg("grid"), py::arg("catalog"),
      py::arg("scenario"), py::arg("env_config") = EnvConfig{},
      py::arg("start_step") = 0, py::call_guard<py::gil_scoped_release>());

  py::class_<TopologyRun>(m, "TopologyRun")
      .def_readonly("topology", &TopologyRun::topology)
      .def_readonly("dwell", &TopologyRun::dwell);

  py::class_<TopologySequence>(m, "TopologySequence")
      .def_readonly("topologies", &TopologySequence::topologies)
      .def_readonly("runs", &TopologySequence::runs)
      .def_readonly("revisit", &TopologySequence::revisit)
      .def("total_rows", &TopologySequence::total_rows);

  m.def("topology_sequence", &topology_sequence, py::arg("grid"),
        py::arg("catalog"), py::arg("episode"));
  m.def("topological_entropy", &topological_entropy, py::arg("sequence"));
  m.def("sequence_signature", &sequence_signature, py::arg("sequence"));

  py::class_<EpisodeAnalysis>(m, "EpisodeAnalysis")
      .def_readonly("scenario_id", &EpisodeAnalysis::scenario_id)
      .def_readonly("seed", &EpisodeAnalysis::seed)
      .def_readonly("total_reward", &EpisodeAnalysis::total_reward)
      .def_readonly("success", &EpisodeAnalysis::success)
      .def_readonly("sequence", &EpisodeAnalysis::sequence)
      .def_readonly("signature", &EpisodeAnalysis::signature)
      .def_readonly("entropy", &EpisodeAnalysis::entropy)
      .def_readonly("revisit", &EpisodeAnalysis::revisit);

  m.def("analyze_episode", &analyze_episode, py::arg("grid"),
        py::arg("catalog"), py::arg("episode"));

  py::class_<ScenarioEvaluation>(m, "ScenarioEvaluation")
      .def_readonly("scenario_id", &ScenarioEvaluation::scenario_id)
      .def_readonly("episodes", &ScenarioEvaluation::episodes)
      .def_readonly("best_episode", &ScenarioEvaluation::best_episode)
      .def_readonly("success", &ScenarioEvaluation::success);

  py::class_<EvaluationSummary>(m, "EvaluationSummary")
      .def_readonly("scenarios", &EvaluationSummary::scenarios)
      .def_readonly("episodes_total", &EvaluationSummary::episodes_total)
      .def_readonly("success_fraction", &EvaluationSummary::success_fraction);

  m.def("evaluate_agent", &evaluate_agent, py::arg("net"), py::arg("grid"),
        py::arg("catalog"), py::arg("scenarios"),
        py::arg("episodes_per_scenario"), py::arg("seed"),
        py::arg("env_config") = EnvConfig{},
        py::arg("activity_threshold") = 0.95, py::arg("jobs") = 1,
        py::call_guard<py::gil_scoped_release>());
}
