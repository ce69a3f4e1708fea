#include "pevccp/oracle.hpp"

#include "pevccp/errors.hpp"

#include "dykstra_detail.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>
#include <vector>

namespace pevccp {

double KktResidual::worst() const {
  return std::max({stationarity_x, stationarity_l, complementarity, -dual_feasibility});
}

double objective_value(const Scenario& s, const Mat& x_all) {
  if (x_all.rows() != s.vehicle_count() || x_all.cols() != s.grid.horizon_steps) {
    throw Error("objective_value: x_all must be V x T");
  }
  Vec l_agg = x_all.colwise().sum().transpose();
  return s.tariff.c1 * l_agg.squaredNorm() + s.tariff.c2.dot(l_agg);
}

namespace {

// Exact projection onto {X : column sums <= p_max}: the per-step halfspaces
// have disjoint support, so each column projects independently.
void project_cap(Mat& x, const Vec& p_max) {
  const int v_len = static_cast<int>(x.rows());
  for (int t = 0; t < x.cols(); ++t) {
    double excess = x.col(t).sum() - p_max(t);
    if (excess > 0.0) x.col(t).array() -= excess / v_len;
  }
}

double cap_residual(const Mat& x, const Vec& p_max) {
  double worst = 0.0;
  for (int t = 0; t < x.cols(); ++t)
    worst = std::max(worst, x.col(t).sum() - p_max(t));
  return std::max(0.0, worst);
}

void project_rows(const std::vector<FeasibleSet>& sets, const Mat& z, Mat& x,
                  const ProjectionOptions& opts, Execution exec) {
  const int v_len = static_cast<int>(x.rows());
  std::exception_ptr failure;
  if (exec == Execution::OpenMp) {
#pragma omp parallel for schedule(dynamic)
    for (int v = 0; v < v_len; ++v) {
      try {
        x.row(v) = project_box_polytope(sets[v], z.row(v).transpose(), opts).transpose();
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
  } else {
    for (int v = 0; v < v_len; ++v) {
      try {
        x.row(v) = project_box_polytope(sets[v], z.row(v).transpose(), opts).transpose();
      } catch (...) {
        if (!failure) failure = std::current_exception();
        break;
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

namespace {

// Flat Dykstra cycle over every elementary set at once: the T cap halfspaces,
// then each agent's prefix rows and box. Corrections are scalars per
// halfspace, so a full sweep is O(V (T + m)).
Mat joint_flat(const std::vector<FeasibleSet>& sets,
               const std::vector<detail::PrefixRows>& prefix, const Vec& p_max, Mat x0,
               const ProjectionOptions& opts, Execution exec) {
  const int v_len = static_cast<int>(x0.rows());
  const int t_len = static_cast<int>(x0.cols());

  std::vector<Vec> x(v_len);
  std::vector<std::vector<double>> row_corr(v_len);
  std::vector<std::vector<double>> pending(v_len);
  std::vector<Vec> box_corr(v_len);
  for (int v = 0; v < v_len; ++v) {
    x[v] = x0.row(v).transpose();
    row_corr[v].assign(sets[v].row_count(), 0.0);
    pending[v].assign(t_len + 1, 0.0);
    box_corr[v] = Vec::Zero(t_len);
  }
  std::vector<double> cap_corr(t_len, 0.0);
  Mat prev = x0;

  std::vector<double> agent_corr2(v_len, 0.0);
  auto agent_pass = [&](int v) {
    agent_corr2[v] = detail::prefix_halfspace_pass(prefix[v], sets[v].b_vector, x[v],
                                                   row_corr[v], pending[v]);
    agent_corr2[v] += detail::box_pass(sets[v].lower, sets[v].upper, x[v], box_corr[v]);
  };

  double worst_resid = 0.0;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double corr2 = 0.0;
    for (int t = 0; t < t_len; ++t) {
      double col = 0.0;
      for (int v = 0; v < v_len; ++v) col += x[v](t);
      double resid = col + cap_corr[t] * v_len - p_max(t);
      double c_next = resid > 0.0 ? resid / v_len : 0.0;
      double delta = cap_corr[t] - c_next;
      if (delta != 0.0)
        for (int v = 0; v < v_len; ++v) x[v](t) += delta;
      corr2 += (c_next - cap_corr[t]) * (c_next - cap_corr[t]) * v_len;
      cap_corr[t] = c_next;
    }
    if (exec == Execution::OpenMp) {
#pragma omp parallel for schedule(static)
      for (int v = 0; v < v_len; ++v) agent_pass(v);
    } else {
      for (int v = 0; v < v_len; ++v) agent_pass(v);
    }
    for (int v = 0; v < v_len; ++v) corr2 += agent_corr2[v];

    double change2 = corr2;
    for (int v = 0; v < v_len; ++v) change2 += (x[v] - prev.row(v).transpose()).squaredNorm();
    if (std::sqrt(change2) <= opts.tol) {
      double cap_resid = 0.0;
      for (int t = 0; t < t_len; ++t) {
        double col = 0.0;
        for (int v = 0; v < v_len; ++v) col += x[v](t);
        cap_resid = std::max(cap_resid, col - p_max(t));
      }
      double set_resid = 0.0;
      for (int v = 0; v < v_len; ++v)
        set_resid = std::max(set_resid,
                             detail::prefix_violation(prefix[v], sets[v].b_vector, x[v]));
      worst_resid = std::max(cap_resid, set_resid);
      if (worst_resid <= opts.feas_tol) {
        Mat out(v_len, t_len);
        for (int v = 0; v < v_len; ++v) out.row(v) = x[v].transpose();
        return out;
      }
    }
    for (int v = 0; v < v_len; ++v) prev.row(v) = x[v].transpose();
  }
  throw InfeasibleScenarioError(
      "power-cap", "joint projection stalled with residual " +
                       std::to_string(worst_resid) +
                       "; per-PEV needs cannot fit under p_max");
}

// Nested fallback for feasible sets without prefix structure: Dykstra over
// two set families, the exact cap projection and the per-agent projections.
Mat joint_nested(const std::vector<FeasibleSet>& sets, const Vec& p_max, Mat x,
                 const ProjectionOptions& opts, Execution exec) {
  const int sweep_cap = std::max(200, opts.max_sweeps / 2);
  Mat cap_corr = Mat::Zero(x.rows(), x.cols());
  Mat set_corr = Mat::Zero(x.rows(), x.cols());
  Mat prev = x;
  Mat z;

  for (int sweep = 0; sweep < sweep_cap; ++sweep) {
    double corr2 = 0.0;
    z = x + cap_corr;
    x = z;
    project_cap(x, p_max);
    corr2 += (z - x - cap_corr).squaredNorm();
    cap_corr = z - x;

    z = x + set_corr;
    project_rows(sets, z, x, opts, exec);
    corr2 += (z - x - set_corr).squaredNorm();
    set_corr = z - x;

    // Sweep ends on the per-PEV sets, so box and polytope rows hold there;
    // only the cap needs an explicit residual check.
    double change = std::sqrt((x - prev).squaredNorm() + corr2);
    if (change <= opts.tol && cap_residual(x, p_max) <= opts.feas_tol) return x;
    prev = x;
  }
  double resid = cap_residual(x, p_max);
  if (resid <= opts.feas_tol) return x;
  throw InfeasibleScenarioError(
      "power-cap", "joint projection stalled with cap residual " + std::to_string(resid) +
                       " kW; per-PEV needs cannot fit under p_max");
}

}  // namespace

Mat project_joint(const std::vector<FeasibleSet>& sets, const Vec& p_max, Mat x,
                  const ProjectionOptions& opts, Execution exec) {
  std::vector<detail::PrefixRows> prefix(sets.size());
  bool all_prefix = true;
  for (size_t v = 0; v < sets.size(); ++v) {
    prefix[v] = detail::analyze_prefix(sets[v].a_matrix);
    if (!prefix[v].ok) all_prefix = false;
  }
  if (all_prefix) return joint_flat(sets, prefix, p_max, std::move(x), opts, exec);
  return joint_nested(sets, p_max, std::move(x), opts, exec);
}

KktResidual kkt_check(const Scenario& s, const CentralSolution& sol, double /*tol*/) {
  constexpr double kActiveTol = 1e-6;
  const int v_len = s.vehicle_count();
  const int t_len = s.grid.horizon_steps;
  const double c1 = s.tariff.c1;
  const Vec grad_l = 2.0 * c1 * sol.l_agg + s.tariff.c2;

  std::vector<FeasibleSet> sets;
  sets.reserve(v_len);
  for (const auto& pev : s.fleet) sets.push_back(build_feasible_set(pev, s.grid));

  // Multipliers that appear in exactly one stationarity row (the cap, the box
  // bounds, and pinned coordinates where upper == lower) absorb their row
  // exactly, so they are eliminated from the fit and recovered afterwards.
  // The least-squares system keeps lambda and the active energy-row
  // multipliers, which couple across steps.
  enum class BoxState { Free, Upper, Lower, Pinned };
  std::vector<bool> cap_active(t_len);
  for (int t = 0; t < t_len; ++t)
    cap_active[t] = (s.p_max_kw(t) - sol.l_agg(t)) <= kActiveTol;

  std::vector<std::vector<int>> act_rows(v_len);
  std::vector<std::vector<BoxState>> box(v_len);
  std::vector<Vec> row_slack(v_len);
  int n_mu = 0;
  for (int v = 0; v < v_len; ++v) {
    const FeasibleSet& f = sets[v];
    Vec x = sol.x_all.row(v).transpose();
    row_slack[v] = f.b_vector - f.a_matrix * x;
    for (int i = 0; i < f.row_count(); ++i)
      if (row_slack[v](i) <= kActiveTol) act_rows[v].push_back(i);
    n_mu += static_cast<int>(act_rows[v].size());
    box[v].resize(t_len, BoxState::Free);
    for (int t = 0; t < t_len; ++t) {
      if (f.upper(t) - f.lower(t) <= kActiveTol) box[v][t] = BoxState::Pinned;
      else if (f.upper(t) - x(t) <= kActiveTol) box[v][t] = BoxState::Upper;
      else if (x(t) - f.lower(t) <= kActiveTol) box[v][t] = BoxState::Lower;
    }
  }

  // Row layout: one row per cap-inactive step (lambda = grad_l there), then
  // one row per box-free agent coordinate (lambda + A' mu = 0 there).
  int n_rows = 0;
  for (int t = 0; t < t_len; ++t)
    if (!cap_active[t]) ++n_rows;
  std::vector<std::pair<int, int>> free_coords;  // (v, t)
  for (int v = 0; v < v_len; ++v)
    for (int t = 0; t < t_len; ++t)
      if (box[v][t] == BoxState::Free) free_coords.emplace_back(v, t);
  n_rows += static_cast<int>(free_coords.size());

  Mat system = Mat::Zero(n_rows, t_len + n_mu);
  Vec rhs = Vec::Zero(n_rows);
  int row = 0;
  for (int t = 0; t < t_len; ++t) {
    if (cap_active[t]) continue;
    system(row, t) = 1.0;
    rhs(row) = grad_l(t);
    ++row;
  }
  std::vector<int> mu_offset(v_len, 0);
  {
    int off = t_len;
    for (int v = 0; v < v_len; ++v) {
      mu_offset[v] = off;
      off += static_cast<int>(act_rows[v].size());
    }
  }
  for (const auto& [v, t] : free_coords) {
    system(row, t) = 1.0;
    for (size_t j = 0; j < act_rows[v].size(); ++j)
      system(row, mu_offset[v] + static_cast<int>(j)) = sets[v].a_matrix(act_rows[v][j], t);
    rhs(row) = 0.0;
    ++row;
  }

  Vec fit = system.completeOrthogonalDecomposition().solve(rhs);
  Vec residual = system * fit - rhs;
  Vec lambda = fit.head(t_len);

  KktResidual out;
  row = 0;
  for (int t = 0; t < t_len; ++t)
    if (!cap_active[t]) out.stationarity_l = std::max(out.stationarity_l,
                                                      std::abs(residual(row++)));
  for (size_t i = 0; i < free_coords.size(); ++i)
    out.stationarity_x = std::max(out.stationarity_x, std::abs(residual(row++)));

  // Recover the eliminated multipliers and check their signs and slacks.
  auto note = [&](double mu, double slack) {
    out.complementarity = std::max(out.complementarity, std::abs(mu * slack));
    out.dual_feasibility = std::min(out.dual_feasibility, mu);
  };
  for (int t = 0; t < t_len; ++t) {
    if (cap_active[t]) note(lambda(t) - grad_l(t), s.p_max_kw(t) - sol.l_agg(t));
  }
  for (int v = 0; v < v_len; ++v) {
    const FeasibleSet& f = sets[v];
    Vec x = sol.x_all.row(v).transpose();
    Vec a_mu = Vec::Zero(t_len);
    for (size_t j = 0; j < act_rows[v].size(); ++j) {
      double mu = fit(mu_offset[v] + static_cast<int>(j));
      a_mu += mu * f.a_matrix.row(act_rows[v][j]).transpose();
      note(mu, row_slack[v](act_rows[v][j]));
    }
    for (int t = 0; t < t_len; ++t) {
      double station = lambda(t) + a_mu(t);
      switch (box[v][t]) {
        case BoxState::Upper: note(-station, f.upper(t) - x(t)); break;
        case BoxState::Lower: note(station, x(t) - f.lower(t)); break;
        case BoxState::Pinned: break;  // equality pair, multiplier free
        case BoxState::Free: break;
      }
    }
  }
  return out;
}

CentralSolution solve_central(const Scenario& s, double tol, const SolveOptions& opts) {
  if (!(tol > 0.0)) throw Error("solve_central: tol must be positive");
  const int v_len = s.vehicle_count();
  const int t_len = s.grid.horizon_steps;
  const double c1 = s.tariff.c1;

  std::vector<FeasibleSet> sets;
  sets.reserve(v_len);
  for (const auto& pev : s.fleet) sets.push_back(build_feasible_set(pev, s.grid));

  const double step = 1.0 / (2.0 * c1 * v_len);
  ProjectionOptions proj = opts.projection;

  auto objective_of = [&](const Mat& x) {
    Vec l = x.colwise().sum().transpose();
    return c1 * l.squaredNorm() + s.tariff.c2.dot(l);
  };

  Mat x = project_joint(sets, s.p_max_kw, Mat::Zero(v_len, t_len), proj, opts.exec);
  Mat y = x;
  double momentum = 1.0;
  double f_prev = objective_of(x);
  int plateau = 0;
  int exhausted_gate_attempts = 0;

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    Vec l_y = y.colwise().sum().transpose();
    Vec grad = 2.0 * c1 * l_y + s.tariff.c2;  // identical for every agent
    Mat z = y;
    z.rowwise() -= (step * grad).transpose();
    Mat x_next = project_joint(sets, s.p_max_kw, std::move(z), proj, opts.exec);
    double f_next = objective_of(x_next);

    if (opts.accelerate) {
      if (f_next > f_prev + 1e-15) {
        // Monotone restart: drop momentum and retake the step from x.
        momentum = 1.0;
        Vec l_x = x.colwise().sum().transpose();
        Vec g = 2.0 * c1 * l_x + s.tariff.c2;
        Mat z2 = x;
        z2.rowwise() -= (step * g).transpose();
        x_next = project_joint(sets, s.p_max_kw, std::move(z2), proj, opts.exec);
        f_next = objective_of(x_next);
        y = x_next;
      } else {
        double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        y = x_next + ((momentum - 1.0) / momentum_next) * (x_next - x);
        momentum = momentum_next;
      }
    } else {
      y = x_next;
    }

    double rel_change = std::abs(f_next - f_prev) / std::max(1.0, std::abs(f_next));
    plateau = (rel_change <= tol) ? plateau + 1 : 0;
    x = std::move(x_next);
    f_prev = f_next;

    if (plateau >= opts.plateau_window) {
      CentralSolution sol;
      sol.x_all = x;
      sol.l_agg = x.colwise().sum().transpose();
      sol.objective = f_prev;
      sol.kkt = kkt_check(s, sol, tol);
      if (sol.kkt.worst() <= 10.0 * tol) return sol;
      plateau = 0;
      // The iterate has stalled at the accuracy the projections allow (the
      // inexact-projection fixed point sits within ~proj.tol of the active
      // faces). Tighten and polish, then resume without momentum.
      if (proj.tol > 1e-13) {
        proj.tol = std::max(1e-13, proj.tol * 1e-2);
        proj.feas_tol = std::max(1e-12, proj.feas_tol * 1e-2);
        x = project_joint(sets, s.p_max_kw, std::move(x), proj, opts.exec);
        f_prev = objective_of(x);
        y = x;
        momentum = 1.0;
      } else if (++exhausted_gate_attempts >= 3) {
        throw ConvergenceError(
            "solve_central stalled with KKT residual " +
                std::to_string(sol.kkt.worst()) + " above the 10*tol gate " +
                std::to_string(10.0 * tol),
            f_prev);
      }
    }
  }

  throw ConvergenceError("solve_central hit the iteration cap (" +
                             std::to_string(opts.max_iters) + ") at objective " +
                             std::to_string(f_prev),
                         f_prev);
}

}  // namespace pevccp
