#include "topogrid/power_flow.hpp"

#include <Eigen/SparseLU>
#include <cmath>

#include "topogrid/errors.hpp"

namespace topogrid {

namespace {

using cplx = std::complex<double>;

void check_injections(const GridModel& grid, const InjectionSet& inj) {
  if (inj.load_p.size() != grid.n_loads() || inj.load_q.size() != grid.n_loads() ||
      inj.gen_p.size() != grid.n_generators() || inj.gen_v.size() != grid.n_generators())
    throw ContractViolation("injection vectors do not match grid");
  for (int g = 0; g < grid.n_generators(); ++g)
    if (inj.gen_v[g] <= 0) throw ContractViolation("voltage setpoints must be positive");
}

enum NodeType { pq = 0, pv = 1, slack = 2 };

// Everything the iteration needs, restricted to the slack's component.
struct NrWork {
  std::vector<int> comp_nodes;       // graph node ids in the energized component
  std::vector<int> node_pos;         // graph node -> position in comp_nodes, -1 outside
  std::vector<NodeType> type;        // per position
  Eigen::VectorXd p_spec, q_spec;    // pu, per position
  Eigen::VectorXd v_set;             // setpoint per position (PV/slack)
  Admittance ybus;                   // over all graph nodes
  std::vector<int> p_rows, q_rows;   // positions with a P / Q mismatch row
  std::vector<int> row_of_pos_p, row_of_pos_q;
};

NrWork build_work(const GridModel& grid, const ElectricalGraph& graph,
                  const Topology& topo, const InjectionSet& inj) {
  NrWork w;
  if (graph.slack_node < 0) throw ContractViolation("grid has no slack generator");
  if (detect_islands(graph))
    throw ContractViolation("power flow requires all load and generation in one component");

  const int slack_comp = graph.node_component[graph.slack_node];
  w.node_pos.assign(graph.n_nodes(), -1);
  for (int n = 0; n < graph.n_nodes(); ++n) {
    if (graph.node_component[n] != slack_comp) continue;
    w.node_pos[n] = static_cast<int>(w.comp_nodes.size());
    w.comp_nodes.push_back(n);
  }

  const int m = static_cast<int>(w.comp_nodes.size());
  w.type.assign(m, pq);
  w.p_spec = Eigen::VectorXd::Zero(m);
  w.q_spec = Eigen::VectorXd::Zero(m);
  w.v_set = Eigen::VectorXd::Ones(m);

  const double base = grid.base_mva;
  for (int d = 0; d < grid.n_loads(); ++d) {
    int pos = w.node_pos[graph.slot_node[grid.slot_index({ElementRef::load, d})]];
    w.p_spec[pos] -= inj.load_p[d] / base;
    w.q_spec[pos] -= inj.load_q[d] / base;
  }
  for (int g = 0; g < grid.n_generators(); ++g) {
    int pos = w.node_pos[graph.slot_node[grid.slot_index({ElementRef::gen, g})]];
    if (w.type[pos] == pq) {
      w.type[pos] = grid.generators[g].slack ? slack : pv;
      w.v_set[pos] = inj.gen_v[g];
    } else if (grid.generators[g].slack) {
      w.type[pos] = slack;
    }
    if (!grid.generators[g].slack) w.p_spec[pos] += inj.gen_p[g] / base;
  }

  w.ybus = build_admittance(grid, graph, topo);

  w.row_of_pos_p.assign(m, -1);
  w.row_of_pos_q.assign(m, -1);
  for (int i = 0; i < m; ++i) {
    if (w.type[i] != slack) {
      w.row_of_pos_p[i] = static_cast<int>(w.p_rows.size());
      w.p_rows.push_back(i);
    }
  }
  for (int i = 0; i < m; ++i) {
    if (w.type[i] == pq) {
      w.row_of_pos_q[i] = static_cast<int>(w.q_rows.size());
      w.q_rows.push_back(i);
    }
  }
  return w;
}

// P and Q actually flowing out of each component node for a voltage state.
void calc_injections(const NrWork& w, const Eigen::VectorXd& vm,
                     const Eigen::VectorXd& va, Eigen::VectorXd& p_calc,
                     Eigen::VectorXd& q_calc) {
  const int m = static_cast<int>(w.comp_nodes.size());
  p_calc.setZero(m);
  q_calc.setZero(m);
  for (int i = 0; i < m; ++i) {
    const int ni = w.comp_nodes[i];
    double p = 0, q = 0;
    for (Admittance::InnerIterator it(w.ybus, ni); it; ++it) {
      const int pos_j = w.node_pos[it.row()];
      if (pos_j < 0) continue;
      const double g = it.value().real(), b = it.value().imag();
      const double dth = va[i] - va[pos_j];
      p += vm[pos_j] * (g * std::cos(dth) + b * std::sin(dth));
      q += vm[pos_j] * (g * std::sin(dth) - b * std::cos(dth));
    }
    p_calc[i] = vm[i] * p;
    q_calc[i] = vm[i] * q;
  }
}

Eigen::VectorXd mismatch_vector(const NrWork& w, const Eigen::VectorXd& p_calc,
                                const Eigen::VectorXd& q_calc) {
  Eigen::VectorXd f(w.p_rows.size() + w.q_rows.size());
  for (std::size_t r = 0; r < w.p_rows.size(); ++r)
    f[r] = w.p_spec[w.p_rows[r]] - p_calc[w.p_rows[r]];
  for (std::size_t r = 0; r < w.q_rows.size(); ++r)
    f[w.p_rows.size() + r] = w.q_spec[w.q_rows[r]] - q_calc[w.q_rows[r]];
  return f;
}

// Standard polar Jacobian of the calculated injections w.r.t. theta (non-slack
// columns) and V (PQ columns), same row order as mismatch_vector.
Eigen::SparseMatrix<double> build_jacobian(const NrWork& w,
                                           const Eigen::VectorXd& vm,
                                           const Eigen::VectorXd& va,
                                           const Eigen::VectorXd& p_calc,
                                           const Eigen::VectorXd& q_calc) {
  const int np = static_cast<int>(w.p_rows.size());
  const int nq = static_cast<int>(w.q_rows.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(8 * (np + nq)));

  for (int i_pos = 0; i_pos < static_cast<int>(w.comp_nodes.size()); ++i_pos) {
    const int ni = w.comp_nodes[i_pos];
    const int rp = w.row_of_pos_p[i_pos];
    const int rq = w.row_of_pos_q[i_pos];
    if (rp < 0 && rq < 0) continue;

    for (Admittance::InnerIterator it(w.ybus, ni); it; ++it) {
      const int j_pos = w.node_pos[it.row()];
      if (j_pos < 0) continue;
      const double g = it.value().real(), b = it.value().imag();
      const int ct = w.row_of_pos_p[j_pos];             // theta column
      const int cv = w.row_of_pos_q[j_pos] >= 0 ? np + w.row_of_pos_q[j_pos] : -1;

      if (j_pos == i_pos) {
        const double vi = vm[i_pos];
        if (rp >= 0) {
          if (ct >= 0) trips.emplace_back(rp, ct, -(-q_calc[i_pos] - b * vi * vi));
          if (cv >= 0) trips.emplace_back(rp, cv, -(p_calc[i_pos] / vi + g * vi));
        }
        if (rq >= 0) {
          if (ct >= 0) trips.emplace_back(rq + np, ct, -(p_calc[i_pos] - g * vi * vi));
          if (cv >= 0) trips.emplace_back(rq + np, cv, -(q_calc[i_pos] / vi - b * vi));
        }
      } else {
        const double dth = va[i_pos] - va[j_pos];
        const double vi = vm[i_pos], vj = vm[j_pos];
        const double dp_dth = vi * vj * (g * std::sin(dth) - b * std::cos(dth));
        const double dp_dv = vi * (g * std::cos(dth) + b * std::sin(dth));
        const double dq_dth = -vi * vj * (g * std::cos(dth) + b * std::sin(dth));
        const double dq_dv = vi * (g * std::sin(dth) - b * std::cos(dth));
        if (rp >= 0) {
          if (ct >= 0) trips.emplace_back(rp, ct, -dp_dth);
          if (cv >= 0) trips.emplace_back(rp, cv, -dp_dv);
        }
        if (rq >= 0) {
          if (ct >= 0) trips.emplace_back(rq + np, ct, -dq_dth);
          if (cv >= 0) trips.emplace_back(rq + np, cv, -dq_dv);
        }
      }
    }
  }

  Eigen::SparseMatrix<double> jac(np + nq, np + nq);
  jac.setFromTriplets(trips.begin(), trips.end());
  return jac;
}

void fill_flows(const GridModel& grid, const ElectricalGraph& graph,
                const SolverMode mode, PowerFlowSolution& sol) {
  const int nl = grid.n_lines();
  sol.p_or.setZero(nl);
  sol.q_or.setZero(nl);
  sol.p_ex.setZero(nl);
  sol.q_ex.setZero(nl);
  sol.i_or.setZero(nl);
  sol.i_ex.setZero(nl);

  for (int l = 0; l < nl; ++l) {
    const int a = graph.line_or_node[l], b = graph.line_ex_node[l];
    if (a < 0 || b < 0) continue;                    // out of service
    if (sol.node_v[a] <= 0 || sol.node_v[b] <= 0) continue;  // de-energized

    const Line& ln = grid.lines[l];
    if (mode == SolverMode::dc) {
      const double flow = (sol.node_theta[a] - sol.node_theta[b]) / ln.x;
      sol.p_or[l] = flow * grid.base_mva;
      sol.p_ex[l] = -flow * grid.base_mva;
      sol.i_or[l] = std::abs(flow) * current_base_amps(grid, ln.sub_or);
      sol.i_ex[l] = std::abs(flow) * current_base_amps(grid, ln.sub_ex);
      continue;
    }

    const cplx y = 1.0 / cplx(ln.r, ln.x);
    const cplx ysh(0.0, ln.b / 2.0);
    const cplx va = std::polar(sol.node_v[a], sol.node_theta[a]);
    const cplx vb = std::polar(sol.node_v[b], sol.node_theta[b]);
    const cplx ia = y * (va - vb) + ysh * va;
    const cplx ib = y * (vb - va) + ysh * vb;
    const cplx sa = va * std::conj(ia);
    const cplx sb = vb * std::conj(ib);
    sol.p_or[l] = sa.real() * grid.base_mva;
    sol.q_or[l] = sa.imag() * grid.base_mva;
    sol.p_ex[l] = sb.real() * grid.base_mva;
    sol.q_ex[l] = sb.imag() * grid.base_mva;
    sol.i_or[l] = std::abs(ia) * current_base_amps(grid, ln.sub_or);
    sol.i_ex[l] = std::abs(ib) * current_base_amps(grid, ln.sub_ex);
  }
}

void fill_generators(const GridModel& grid, const ElectricalGraph& graph,
                     const NrWork& w, const InjectionSet& inj,
                     const Eigen::VectorXd& p_calc, const Eigen::VectorXd& q_calc,
                     PowerFlowSolution& sol) {
  const double base = grid.base_mva;
  sol.gen_p.setZero(grid.n_generators());
  sol.gen_q.setZero(grid.n_generators());

  // Loads attached to each component node, to separate machine output from
  // the node's net injection.
  Eigen::VectorXd load_p_node = Eigen::VectorXd::Zero(w.comp_nodes.size());
  Eigen::VectorXd load_q_node = Eigen::VectorXd::Zero(w.comp_nodes.size());
  for (int d = 0; d < grid.n_loads(); ++d) {
    int pos = w.node_pos[graph.slot_node[grid.slot_index({ElementRef::load, d})]];
    load_p_node[pos] += inj.load_p[d] / base;
    load_q_node[pos] += inj.load_q[d] / base;
  }

  std::vector<int> owner(w.comp_nodes.size(), -1);  // lowest-id gen on a node
  for (int g = 0; g < grid.n_generators(); ++g) {
    int pos = w.node_pos[graph.slot_node[grid.slot_index({ElementRef::gen, g})]];
    if (owner[pos] < 0) owner[pos] = g;
  }
  for (int g = 0; g < grid.n_generators(); ++g) {
    int pos = w.node_pos[graph.slot_node[grid.slot_index({ElementRef::gen, g})]];
    const bool owns = owner[pos] == g;
    if (grid.generators[g].slack) {
      sol.gen_p[g] = (p_calc[pos] + load_p_node[pos]) * base;
    } else {
      sol.gen_p[g] = inj.gen_p[g];  // PV machines hold their schedule
    }
    if (owns) sol.gen_q[g] = (q_calc[pos] + load_q_node[pos]) * base;
  }
}

}  // namespace

double current_base_amps(const GridModel& grid, int substation) {
  return grid.base_mva * 1000.0 / (std::sqrt(3.0) * grid.voltage_kv[substation]);
}

Admittance build_admittance(const GridModel& grid, const ElectricalGraph& graph,
                            const Topology& topo) {
  std::vector<Eigen::Triplet<cplx>> trips;
  trips.reserve(static_cast<std::size_t>(4 * grid.n_lines()));
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (!topo.line_in_service[l]) continue;
    const Line& ln = grid.lines[l];
    const int a = graph.line_or_node[l], b = graph.line_ex_node[l];
    const cplx y = 1.0 / cplx(ln.r, ln.x);
    const cplx ysh(0.0, ln.b / 2.0);
    trips.emplace_back(a, a, y + ysh);
    trips.emplace_back(b, b, y + ysh);
    trips.emplace_back(a, b, -y);
    trips.emplace_back(b, a, -y);
  }
  Admittance ybus(graph.n_nodes(), graph.n_nodes());
  ybus.setFromTriplets(trips.begin(), trips.end());
  return ybus;
}

Admittance build_admittance(const GridModel& grid, const Topology& topo) {
  return build_admittance(grid, electrical_graph(grid, topo), topo);
}

NrProbe nr_probe(const GridModel& grid, const ElectricalGraph& graph,
                 const Topology& topo, const InjectionSet& inj,
                 const Eigen::VectorXd& node_v, const Eigen::VectorXd& node_theta) {
  check_injections(grid, inj);
  NrWork w = build_work(grid, graph, topo, inj);
  const int m = static_cast<int>(w.comp_nodes.size());
  Eigen::VectorXd vm(m), va(m);
  for (int i = 0; i < m; ++i) {
    vm[i] = node_v[w.comp_nodes[i]];
    va[i] = node_theta[w.comp_nodes[i]];
  }
  Eigen::VectorXd p_calc, q_calc;
  calc_injections(w, vm, va, p_calc, q_calc);

  NrProbe probe;
  probe.mismatch = mismatch_vector(w, p_calc, q_calc);
  probe.jacobian = build_jacobian(w, vm, va, p_calc, q_calc);
  for (int i : w.p_rows) probe.p_row_node.push_back(w.comp_nodes[i]);
  for (int i : w.q_rows) probe.q_row_node.push_back(w.comp_nodes[i]);
  return probe;
}

PowerFlowSolution solve_power_flow(const GridModel& grid,
                                   const ElectricalGraph& graph,
                                   const Topology& topo, const InjectionSet& inj,
                                   const SolveOptions& opt) {
  check_injections(grid, inj);
  NrWork w = build_work(grid, graph, topo, inj);
  const int m = static_cast<int>(w.comp_nodes.size());

  PowerFlowSolution sol;
  sol.node_v = Eigen::VectorXd::Zero(graph.n_nodes());
  sol.node_theta = Eigen::VectorXd::Zero(graph.n_nodes());

  Eigen::VectorXd vm(m), va(m);
  for (int i = 0; i < m; ++i) {
    vm[i] = w.type[i] == pq ? 1.0 : w.v_set[i];
    va[i] = 0.0;
  }
  if (opt.warm_v && opt.warm_theta) {
    for (int i = 0; i < m; ++i) {
      if (w.type[i] == pq && (*opt.warm_v)[w.comp_nodes[i]] > 0)
        vm[i] = (*opt.warm_v)[w.comp_nodes[i]];
      va[i] = (*opt.warm_theta)[w.comp_nodes[i]];
    }
  }

  if (opt.mode == SolverMode::dc) {
    // B theta = P over non-slack component nodes; V pinned at 1.
    const int np = static_cast<int>(w.p_rows.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (int l = 0; l < grid.n_lines(); ++l) {
      const int a = graph.line_or_node[l], b = graph.line_ex_node[l];
      if (a < 0 || b < 0) continue;
      const int pa = w.node_pos[a], pb = w.node_pos[b];
      if (pa < 0 || pb < 0) continue;
      const double susc = 1.0 / grid.lines[l].x;
      const int ra = w.row_of_pos_p[pa], rb = w.row_of_pos_p[pb];
      if (ra >= 0) trips.emplace_back(ra, ra, susc);
      if (rb >= 0) trips.emplace_back(rb, rb, susc);
      if (ra >= 0 && rb >= 0) {
        trips.emplace_back(ra, rb, -susc);
        trips.emplace_back(rb, ra, -susc);
      }
    }
    Eigen::SparseMatrix<double> bmat(np, np);
    bmat.setFromTriplets(trips.begin(), trips.end());
    Eigen::VectorXd rhs(np);
    for (int r = 0; r < np; ++r) rhs[r] = w.p_spec[w.p_rows[r]];

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(bmat);
    sol.iterations = 1;
    if (np > 0) {
      if (lu.info() != Eigen::Success) return sol;
      Eigen::VectorXd theta = lu.solve(rhs);
      if (lu.info() != Eigen::Success) return sol;
      for (int r = 0; r < np; ++r) va[w.p_rows[r]] = theta[r];
    }
    for (int i = 0; i < m; ++i) vm[i] = 1.0;
    sol.converged = true;
  } else {
    Eigen::VectorXd p_calc, q_calc;
    for (int iter = 0;; ++iter) {
      calc_injections(w, vm, va, p_calc, q_calc);
      Eigen::VectorXd f = mismatch_vector(w, p_calc, q_calc);
      const double worst = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
      if (!std::isfinite(worst)) break;
      if (worst <= opt.tolerance) {
        sol.converged = true;
        sol.iterations = iter;
        break;
      }
      if (iter >= opt.max_iterations) break;

      Eigen::SparseMatrix<double> jac =
          build_jacobian(w, vm, va, p_calc, q_calc);
      Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
      lu.compute(jac);
      if (lu.info() != Eigen::Success) break;
      Eigen::VectorXd dx = lu.solve(f);
      if (lu.info() != Eigen::Success) break;

      // jac is d(mismatch)/dx, so the Newton step goes against the solve.
      const int np = static_cast<int>(w.p_rows.size());
      for (int r = 0; r < np; ++r) va[w.p_rows[r]] -= dx[r];
      for (std::size_t r = 0; r < w.q_rows.size(); ++r)
        vm[w.q_rows[r]] -= dx[np + static_cast<int>(r)];
    }
    if (!sol.converged) {
      sol.iterations = opt.max_iterations;
      return sol;
    }
  }

  for (int i = 0; i < m; ++i) {
    sol.node_v[w.comp_nodes[i]] = vm[i];
    sol.node_theta[w.comp_nodes[i]] = va[i];
  }
  fill_flows(grid, graph, opt.mode, sol);

  Eigen::VectorXd p_calc, q_calc;
  if (opt.mode == SolverMode::dc) {
    // Linearized nodal balance: sum of line flows leaving each node.
    p_calc.setZero(m);
    q_calc.setZero(m);
    for (int l = 0; l < grid.n_lines(); ++l) {
      const int a = graph.line_or_node[l], b = graph.line_ex_node[l];
      if (a < 0 || b < 0) continue;
      const int pa = w.node_pos[a], pb = w.node_pos[b];
      if (pa < 0 || pb < 0) continue;
      const double flow = (va[pa] - va[pb]) / grid.lines[l].x;
      p_calc[pa] += flow;
      p_calc[pb] -= flow;
    }
  } else {
    calc_injections(w, vm, va, p_calc, q_calc);
  }
  fill_generators(grid, graph, w, inj, p_calc, q_calc, sol);
  if (opt.mode == SolverMode::dc) sol.gen_q.setZero();
  return sol;
}

PowerFlowSolution solve_power_flow(const GridModel& grid, const Topology& topo,
                                   const InjectionSet& inj,
                                   const SolveOptions& opt) {
  return solve_power_flow(grid, electrical_graph(grid, topo), topo, inj, opt);
}

Eigen::VectorXd compute_loadings(const PowerFlowSolution& sol,
                                 const GridModel& grid) {
  if (!sol.converged)
    throw ContractViolation("loadings need a converged solution");
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(grid.n_lines());
  for (int l = 0; l < grid.n_lines(); ++l)
    rho[l] = std::max(sol.i_or[l], sol.i_ex[l]) / grid.lines[l].limit_a;
  return rho;
}

}  // namespace topogrid
