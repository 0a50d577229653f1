#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>

#include "topogrid/electrical_graph.hpp"
#include "topogrid/grid.hpp"

namespace topogrid {

// One timestep's boundary conditions. Consumption is positive; the slack
// generator's gen_p entry is a schedule only, the solver balances it.
struct InjectionSet {
  Eigen::VectorXd load_p, load_q;  // MW, MVAr
  Eigen::VectorXd gen_p;           // MW
  Eigen::VectorXd gen_v;           // pu voltage setpoints
};

enum class SolverMode { ac, dc };

struct SolveOptions {
  SolverMode mode = SolverMode::ac;
  double tolerance = 1e-8;  // max pu power mismatch
  int max_iterations = 20;
  // Optional warm start, indexed like the graph nodes. Default is a flat
  // start (V = 1 or setpoint, theta = 0).
  const Eigen::VectorXd* warm_v = nullptr;
  const Eigen::VectorXd* warm_theta = nullptr;
};

struct PowerFlowSolution {
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd node_v;      // pu, 0 for de-energized nodes
  Eigen::VectorXd node_theta;  // rad
  // Per line, zero when out of service or de-energized.
  Eigen::VectorXd p_or, q_or, p_ex, q_ex;  // MW / MVAr
  Eigen::VectorXd i_or, i_ex;              // amperes
  // Realized machine outputs (slack P and all PV Q are solver results).
  Eigen::VectorXd gen_p, gen_q;
};

using Admittance = Eigen::SparseMatrix<std::complex<double>>;

// Nodal admittance over every graph node: series branches plus half the line
// charging at each end. Rows for de-energized busbars only hold zeros.
Admittance build_admittance(const GridModel& grid, const ElectricalGraph& graph,
                            const Topology& topology);
Admittance build_admittance(const GridModel& grid, const Topology& topology);

// Newton-Raphson in polar coordinates (mode ac), or the linear active-power
// approximation (mode dc: V=1, losses and Q ignored). Requires a slack
// generator whose component contains every load and generator; busbars
// outside it come back de-energized (V=0).
PowerFlowSolution solve_power_flow(const GridModel& grid,
                                   const ElectricalGraph& graph,
                                   const Topology& topology,
                                   const InjectionSet& injections,
                                   const SolveOptions& options = {});
PowerFlowSolution solve_power_flow(const GridModel& grid,
                                   const Topology& topology,
                                   const InjectionSet& injections,
                                   const SolveOptions& options = {});

// Worst-end current over the thermal limit, per line; 0 when out of service.
// Requires a converged solution.
Eigen::VectorXd compute_loadings(const PowerFlowSolution& solution,
                                 const GridModel& grid);

// Amperes carried by 1 pu of current at a substation's voltage level.
double current_base_amps(const GridModel& grid, int substation);

// Mismatch vector and Jacobian at an arbitrary state, in solver ordering
// (P rows for non-slack nodes, then Q rows for PQ nodes). Exposed so the
// analytic Jacobian can be checked against finite differences of the same
// mismatch function.
struct NrProbe {
  Eigen::VectorXd mismatch;
  Eigen::SparseMatrix<double> jacobian;
  std::vector<int> p_row_node;  // mismatch row -> graph node
  std::vector<int> q_row_node;
};

NrProbe nr_probe(const GridModel& grid, const ElectricalGraph& graph,
                 const Topology& topology, const InjectionSet& injections,
                 const Eigen::VectorXd& node_v, const Eigen::VectorXd& node_theta);

}  // namespace topogrid
