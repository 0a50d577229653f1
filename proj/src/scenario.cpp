#include "topogrid/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "topogrid/csv.hpp"
#include "topogrid/errors.hpp"
#include "topogrid/rng.hpp"

namespace topogrid {
namespace {

constexpr int kLoadColumns = 11;
constexpr int kGenColumns = 5;

// Quiet-week base demand in MW. The transmission-side loads stay near the
// published operating point; the 20 kV pocket is scaled so the interface
// transformers keep headroom until a stress surge is applied.
constexpr double kBaseLoadP[kLoadColumns] = {21.7, 94.2, 47.8, 7.6, 5.0, 13.0,
                                             4.0,  1.6,  2.8,  6.0, 6.7};

// Which loads a stress surge lands on: the pocket loads whose supply funnels
// through the small 138/20 kV transformers.
constexpr double kStressWeight[kLoadColumns] = {0, 0, 0, 0, 0, 1.0, 0.45, 0, 0, 0, 0.45};

constexpr double kNuclearP = 55.0;
constexpr double kWindCap = 25.0;
constexpr double kSolarCap = 18.0;
constexpr double kThermalMin = 5.0;
constexpr double kThermalMax = 130.0;
constexpr double kLossMargin = 1.03;
constexpr double kStressGain = 3.0;
constexpr double kGenV[kGenColumns] = {1.045, 1.02, 1.04, 1.05, 1.06};

std::vector<std::string> scenario_header() {
  std::vector<std::string> names;
  names.emplace_back("step");
  char buf[32];
  for (int i = 0; i < kLoadColumns; ++i) {
    std::snprintf(buf, sizeof(buf), "load_p_%d", i);
    names.emplace_back(buf);
  }
  for (int i = 0; i < kLoadColumns; ++i) {
    std::snprintf(buf, sizeof(buf), "load_q_%d", i);
    names.emplace_back(buf);
  }
  for (int i = 0; i < kGenColumns; ++i) {
    std::snprintf(buf, sizeof(buf), "gen_p_%d", i);
    names.emplace_back(buf);
  }
  for (int i = 0; i < kGenColumns; ++i) {
    std::snprintf(buf, sizeof(buf), "gen_v_%d", i);
    names.emplace_back(buf);
  }
  return names;
}

double gaussian(std::mt19937_64& rng) {
  double u1 = canonical_double(rng);
  double u2 = canonical_double(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

// Mean-reverting noise with unit stationary variance; `alpha` is the
// one-step autocorrelation.
double ou_step(double state, double alpha, std::mt19937_64& rng) {
  return alpha * state + std::sqrt(1.0 - alpha * alpha) * gaussian(rng);
}

double daily_shape(double hour) {
  auto bump = [](double h, double center, double width) {
    double d = (h - center) / width;
    return std::exp(-0.5 * d * d);
  };
  return 0.62 + 0.20 * bump(hour, 8.5, 2.0) + 0.34 * bump(hour, 19.0, 2.6);
}

double weekly_factor(int day_of_week) {
  if (day_of_week == 5) return 0.88;
  if (day_of_week == 6) return 0.82;
  return 1.0;
}

struct StressDay {
  bool active = false;
  double center_hour = 18.5;
  double width_hours = 1.2;
  double amplitude = 0.0;
};

void check_params(const ScenarioParams& p) {
  auto bad = [](const std::string& what) { throw DomainError("scenario params: " + what); };
  if (p.n_steps < 1) bad("n_steps must be at least 1");
  if (!(std::isfinite(p.load_scale) && p.load_scale > 0)) bad("load_scale must be positive");
  if (!(std::isfinite(p.noise_level) && p.noise_level >= 0 && p.noise_level <= 0.5))
    bad("noise_level must lie in [0, 0.5]");
  if (!(std::isfinite(p.renewable_variability) && p.renewable_variability >= 0 &&
        p.renewable_variability <= 1))
    bad("renewable_variability must lie in [0, 1]");
  if (!(std::isfinite(p.stress) && p.stress >= 0)) bad("stress must be non-negative");
  if (!(std::isfinite(p.power_factor) && p.power_factor > 0 && p.power_factor <= 1))
    bad("power_factor must lie in (0, 1]");
  if (!p.base_load_p.empty()) {
    if (static_cast<int>(p.base_load_p.size()) != kLoadColumns)
      bad("base_load_p must list all " + std::to_string(kLoadColumns) + " loads");
    for (double v : p.base_load_p)
      if (!(std::isfinite(v) && v >= 0)) bad("base_load_p entries must be non-negative");
  }
}

Scenario make_scenario(const ScenarioParams& p, int index, std::uint64_t seed,
                       double* severity_out) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(index)));

  // All random draws happen in a fixed order that does not depend on the
  // stress value, so sweeping `stress` with one seed perturbs amplitudes only.
  const double sev_u = canonical_double(rng);
  const double severity = p.stress > 0 ? p.stress * (0.35 + 0.65 * sev_u) : 0.0;
  if (severity_out != nullptr) *severity_out = severity;

  const int n_days = (p.n_steps + kStepsPerDay - 1) / kStepsPerDay;
  std::vector<StressDay> plan(static_cast<std::size_t>(n_days));
  for (StressDay& day : plan) {
    const double u_day = canonical_double(rng);
    const double u_center = canonical_double(rng);
    const double u_width = canonical_double(rng);
    const double u_amp = canonical_double(rng);
    const double p_active = std::min(0.85, 0.15 + 0.45 * severity);
    day.active = severity > 0 && u_day < p_active;
    day.center_hour = 17.5 + 2.5 * u_center;
    day.width_hours = 0.8 + 0.9 * u_width;
    day.amplitude = severity * (0.7 + 0.35 * u_amp) * kStressGain;
  }

  const double* base =
      p.base_load_p.empty() ? kBaseLoadP : p.base_load_p.data();
  const double tan_phi = std::tan(std::acos(p.power_factor));
  const double alpha_load = std::exp(-5.0 / 120.0);   // two-hour correlation
  const double alpha_wind = std::exp(-5.0 / 240.0);   // four-hour correlation
  const double alpha_cloud = std::exp(-5.0 / 480.0);  // eight-hour correlation

  Scenario sc;
  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "sc-%04d", index);
  sc.id = idbuf;
  sc.load_p.resize(p.n_steps, kLoadColumns);
  sc.load_q.resize(p.n_steps, kLoadColumns);
  sc.gen_p.resize(p.n_steps, kGenColumns);
  sc.gen_v.resize(p.n_steps, kGenColumns);

  std::vector<double> load_noise(kLoadColumns, 0.0);
  double wind_state = 0.0;
  double cloud_state = 0.0;

  for (int t = 0; t < p.n_steps; ++t) {
    const int day = t / kStepsPerDay;
    const double hour = static_cast<double>(t % kStepsPerDay) / 12.0;
    const double shape = daily_shape(hour) * weekly_factor(day % 7);
    const StressDay& sd = plan[static_cast<std::size_t>(day)];
    double surge = 0.0;
    if (sd.active) {
      const double d = (hour - sd.center_hour) / sd.width_hours;
      surge = sd.amplitude * std::exp(-0.5 * d * d);
    }

    double total_load = 0.0;
    for (int i = 0; i < kLoadColumns; ++i) {
      load_noise[static_cast<std::size_t>(i)] =
          ou_step(load_noise[static_cast<std::size_t>(i)], alpha_load, rng);
      double mult = shape * (1.0 + p.noise_level * load_noise[static_cast<std::size_t>(i)]);
      mult *= 1.0 + surge * kStressWeight[i];
      const double value = std::max(0.0, base[i] * p.load_scale * mult);
      sc.load_p(t, i) = value;
      sc.load_q(t, i) = value * tan_phi;
      total_load += value;
    }

    wind_state = ou_step(wind_state, alpha_wind, rng);
    cloud_state = ou_step(cloud_state, alpha_cloud, rng);
    const double wind_frac =
        std::clamp(0.45 + 0.55 * p.renewable_variability * wind_state, 0.0, 1.0);
    const double cloud =
        std::clamp(0.75 + 0.5 * p.renewable_variability * cloud_state, 0.05, 1.0);
    const double sun_arg = (hour - 6.5) / 12.5;
    const double sun = (sun_arg > 0 && sun_arg < 1)
                           ? std::pow(std::sin(std::numbers::pi * sun_arg), 1.3)
                           : 0.0;
    const double wind_p = kWindCap * wind_frac;
    const double solar_p = kSolarCap * cloud * sun;
    const double thermal_p =
        std::clamp(0.5 * (total_load * kLossMargin - kNuclearP - wind_p - solar_p),
                   kThermalMin, kThermalMax);
    const double slack_hint = std::max(
        0.0, total_load * kLossMargin - kNuclearP - wind_p - solar_p - thermal_p);

    sc.gen_p(t, 0) = thermal_p;
    sc.gen_p(t, 1) = kNuclearP;
    sc.gen_p(t, 2) = wind_p;
    sc.gen_p(t, 3) = solar_p;
    sc.gen_p(t, 4) = slack_hint;
    for (int g = 0; g < kGenColumns; ++g) sc.gen_v(t, g) = kGenV[g];
  }
  return sc;
}

}  // namespace

InjectionSet Scenario::injections_at(int t) const {
  if (t < 0 || t >= n_steps())
    throw ContractViolation("scenario step " + std::to_string(t) + " out of range [0, " +
                            std::to_string(n_steps()) + ")");
  InjectionSet inj;
  inj.load_p = load_p.row(t).transpose();
  inj.load_q = load_q.row(t).transpose();
  inj.gen_p = gen_p.row(t).transpose();
  inj.gen_v = gen_v.row(t).transpose();
  return inj;
}

Scenario load_scenario(const std::string& path) {
  CsvTable table = read_csv(path);
  const std::vector<std::string> expected = scenario_header();
  if (table.header.size() != expected.size()) {
    std::string msg = path + ": scenario header has " + std::to_string(table.header.size()) +
                      " columns, expected " + std::to_string(expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i >= table.header.size()) {
        msg += "; first missing column is '" + expected[i] + "'";
        break;
      }
      if (table.header[i] != expected[i]) {
        msg += "; column " + std::to_string(i) + " is '" + table.header[i] + "', expected '" +
               expected[i] + "'";
        break;
      }
    }
    throw ParseError(msg);
  }
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (table.header[i] != expected[i])
      throw ParseError(path + ": scenario column " + std::to_string(i) + " is '" +
                       table.header[i] + "', expected '" + expected[i] + "'");
  if (table.rows.empty()) throw ParseError(path + ": scenario has no data rows");

  Scenario sc;
  const auto fields = table.comment_fields();
  if (auto it = fields.find("id"); it != fields.end())
    sc.id = it->second;
  else
    sc.id = std::filesystem::path(path).stem().string();
  if (auto it = fields.find("timestep_seconds"); it != fields.end())
    sc.timestep_seconds =
        static_cast<int>(parse_int(it->second, path + ": timestep_seconds"));

  const int t_rows = static_cast<int>(table.rows.size());
  sc.load_p.resize(t_rows, kLoadColumns);
  sc.load_q.resize(t_rows, kLoadColumns);
  sc.gen_p.resize(t_rows, kGenColumns);
  sc.gen_v.resize(t_rows, kGenColumns);

  for (int t = 0; t < t_rows; ++t) {
    const auto& row = table.rows[static_cast<std::size_t>(t)];
    auto where = [&](int col) {
      return path + ": row " + std::to_string(t) + ", column '" + expected[static_cast<std::size_t>(col)] + "'";
    };
    const long long step = parse_int(row[0], where(0));
    if (step != t)
      throw ParseError(where(0) + ": step " + std::to_string(step) + " out of order, expected " +
                       std::to_string(t));
    int col = 1;
    auto next_value = [&]() {
      const double v = parse_double(row[static_cast<std::size_t>(col)], where(col));
      if (!std::isfinite(v)) throw ParseError(where(col) + ": value must be finite");
      ++col;
      return v;
    };
    for (int i = 0; i < kLoadColumns; ++i) sc.load_p(t, i) = next_value();
    for (int i = 0; i < kLoadColumns; ++i) sc.load_q(t, i) = next_value();
    for (int g = 0; g < kGenColumns; ++g) sc.gen_p(t, g) = next_value();
    for (int g = 0; g < kGenColumns; ++g) {
      const double v = next_value();
      if (v <= 0) throw ParseError(where(col - 1) + ": voltage setpoint must be positive");
      sc.gen_v(t, g) = v;
    }
  }
  return sc;
}

void save_scenario(const Scenario& scenario, const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& extra_comments) {
  if (scenario.load_p.cols() != kLoadColumns || scenario.load_q.cols() != kLoadColumns ||
      scenario.gen_p.cols() != kGenColumns || scenario.gen_v.cols() != kGenColumns ||
      scenario.load_q.rows() != scenario.load_p.rows() ||
      scenario.gen_p.rows() != scenario.load_p.rows() ||
      scenario.gen_v.rows() != scenario.load_p.rows())
    throw ContractViolation("scenario matrices have inconsistent shapes");
  CsvWriter out(path);
  out.comment("id=" + scenario.id);
  out.comment("timestep_seconds=" + std::to_string(scenario.timestep_seconds));
  for (const auto& [key, value] : extra_comments) out.comment(key + "=" + value);
  out.header(scenario_header());
  std::vector<std::string> cells;
  for (int t = 0; t < scenario.n_steps(); ++t) {
    cells.clear();
    cells.push_back(std::to_string(t));
    for (int i = 0; i < kLoadColumns; ++i) cells.push_back(format_double(scenario.load_p(t, i)));
    for (int i = 0; i < kLoadColumns; ++i) cells.push_back(format_double(scenario.load_q(t, i)));
    for (int g = 0; g < kGenColumns; ++g) cells.push_back(format_double(scenario.gen_p(t, g)));
    for (int g = 0; g < kGenColumns; ++g) cells.push_back(format_double(scenario.gen_v(t, g)));
    out.row(cells);
  }
}

std::vector<Scenario> generate_synthetic(const ScenarioParams& params, int count,
                                         std::uint64_t seed) {
  check_params(params);
  if (count < 0) throw DomainError("scenario count must be non-negative");
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(make_scenario(params, i, seed, nullptr));
  return out;
}

ScenarioScore score_scenario(const GridModel& grid, const Scenario& scenario,
                             const ScoreOptions& options) {
  if (scenario.load_p.cols() != grid.n_loads() || scenario.gen_p.cols() != grid.n_generators())
    throw DomainError("scenario shape does not match the grid (" +
                      std::to_string(scenario.load_p.cols()) + " loads, " +
                      std::to_string(scenario.gen_p.cols()) + " generators)");
  if (scenario.n_steps() < kStepsPerWeek)
    throw DomainError("scenario '" + scenario.id + "' has " +
                      std::to_string(scenario.n_steps()) + " steps, need at least " +
                      std::to_string(kStepsPerWeek) + " to score a week");

  ScenarioScore score;
  score.scenario_id = scenario.id;
  score.line_max = Eigen::VectorXd::Zero(grid.n_lines());
  const Topology topo = base_topology(grid);
  SolveOptions solve_opts;
  solve_opts.mode = options.mode;

  for (int day = 0; day < 7; ++day) {
    bool day_hot = false;
    for (int t = day * kStepsPerDay; t < (day + 1) * kStepsPerDay; ++t) {
      const PowerFlowSolution sol =
          solve_power_flow(grid, topo, scenario.injections_at(t), solve_opts);
      if (!sol.converged) {
        score.divergent = true;
        continue;
      }
      const Eigen::VectorXd rho = compute_loadings(sol, grid);
      for (int l = 0; l < grid.n_lines(); ++l)
        score.line_max[l] = std::max(score.line_max[l], rho[l]);
      const double step_max = rho.maxCoeff();
      score.max_loading = std::max(score.max_loading, step_max);
      if (step_max >= options.day_threshold) day_hot = true;
    }
    if (day_hot) ++score.days_above;
  }
  return score;
}

std::string select_training_scenario(const std::vector<ScenarioScore>& scores) {
  const ScenarioScore* best = nullptr;
  for (const ScenarioScore& s : scores) {
    if (s.divergent) continue;
    if (best == nullptr) {
      best = &s;
      continue;
    }
    if (s.max_loading > best->max_loading ||
        (s.max_loading == best->max_loading &&
         (s.days_above > best->days_above ||
          (s.days_above == best->days_above && s.scenario_id < best->scenario_id))))
      best = &s;
  }
  if (best == nullptr)
    throw DomainError("no non-divergent scenario to select from");
  return best->scenario_id;
}

}  // namespace topogrid
