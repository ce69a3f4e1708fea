#include "pevccp/feasibility.hpp"

#include "pevccp/errors.hpp"

#include "dykstra_detail.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace pevccp {

double FeasibleSet::polytope_violation(const Vec& x) const {
  if (row_count() == 0) return 0.0;
  return std::max(0.0, (a_matrix * x - b_vector).maxCoeff());
}

double FeasibleSet::box_violation(const Vec& x) const {
  double worst = 0.0;
  for (int i = 0; i < dim(); ++i) {
    worst = std::max(worst, lower(i) - x(i));
    worst = std::max(worst, x(i) - upper(i));
  }
  return std::max(0.0, worst);
}

FeasibleSet build_feasible_set(const PevModel& pev, const TimeGrid& grid) {
  const int t_len = grid.horizon_steps;
  const double scale = pev.charge_efficiency * grid.step_hours;
  const double floor_kwh = pev.min_soc * pev.battery_capacity_kwh;

  FeasibleSet f;
  f.a_matrix = Mat::Zero(2 * t_len, t_len);
  f.b_vector = Vec::Zero(2 * t_len);
  f.lower = Vec::Zero(t_len);
  f.upper = Vec::Zero(t_len);

  double cum_cons = 0.0;
  for (int t = 0; t < t_len; ++t) {
    cum_cons += pev.consumption_kwh(t);
    // Battery ceiling through step t:  scale * sum_{tau<=t} x(tau) <= C - E0 + cum_cons
    // SOC floor through step t:       -scale * sum_{tau<=t} x(tau) <= E0 - cum_cons - SOC_min*C
    for (int tau = 0; tau <= t; ++tau) {
      f.a_matrix(2 * t, tau) = scale;
      f.a_matrix(2 * t + 1, tau) = -scale;
    }
    f.b_vector(2 * t) = pev.battery_capacity_kwh - pev.initial_energy_kwh + cum_cons;
    f.b_vector(2 * t + 1) = pev.initial_energy_kwh - cum_cons - floor_kwh;
    f.upper(t) = pev.availability[t] ? pev.max_charge_kw : 0.0;
  }

  // Non-emptiness certificate: the greedy max-rate profile maximizes the
  // energy trajectory pointwise, so it is feasible iff any profile is.
  Vec witness = max_rate_profile(pev, grid);
  Vec energy = energy_trajectory(pev, grid, witness);
  for (int t = 0; t < t_len; ++t) {
    if (energy(t) < floor_kwh - 1e-9) {
      throw InfeasiblePevError(
          -1, t,
          "infeasible PEV: energy needs cannot be met; first violated step " +
              std::to_string(t));
    }
  }
  return f;
}

Vec project_halfline_floor(const Vec& y, const Vec& floor) { return y.cwiseMax(floor); }

Vec project_halfline_cap(const Vec& y, const Vec& cap) { return y.cwiseMin(cap); }

namespace {

Vec dykstra_prefix(const FeasibleSet& f, const Vec& y, const detail::PrefixRows& pr,
                   const ProjectionOptions& opts) {
  const int n = f.dim();
  Vec x = y;
  std::vector<double> corrections(f.row_count(), 0.0);
  std::vector<double> pending(n + 1, 0.0);
  Vec box_correction = Vec::Zero(n);
  Vec prev = x;

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double corr2 = detail::prefix_halfspace_pass(pr, f.b_vector, x, corrections, pending);
    corr2 += detail::box_pass(f.lower, f.upper, x, box_correction);
    double change = std::sqrt((x - prev).squaredNorm() + corr2);
    if (change <= opts.tol &&
        detail::prefix_violation(pr, f.b_vector, x) <= opts.feas_tol)
      return x;
    prev = x;
  }
  double resid = f.polytope_violation(x);
  if (resid <= opts.feas_tol) return x;
  throw ProjectionError("projection did not converge within " +
                            std::to_string(opts.max_sweeps) + " sweeps (residual " +
                            std::to_string(resid) + ")",
                        x, resid);
}

Vec dykstra_generic(const FeasibleSet& f, const Vec& y, const ProjectionOptions& opts) {
  const int n = f.dim();
  const int m = f.row_count();
  Vec row_norm2(m);
  for (int i = 0; i < m; ++i) row_norm2(i) = f.a_matrix.row(i).squaredNorm();

  Vec x = y;
  Mat corrections = Mat::Zero(m, n);
  Vec box_correction = Vec::Zero(n);
  Vec prev = x;
  Vec z(n);

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double corr2 = 0.0;
    for (int i = 0; i < m; ++i) {
      if (row_norm2(i) <= 0.0) continue;
      z = x + corrections.row(i).transpose();
      double resid = f.a_matrix.row(i).dot(z) - f.b_vector(i);
      if (resid > 0.0) {
        x = z - (resid / row_norm2(i)) * f.a_matrix.row(i).transpose();
        corr2 += (z - x - corrections.row(i).transpose()).squaredNorm();
        corrections.row(i) = (z - x).transpose();
      } else {
        x = z;
        corr2 += corrections.row(i).squaredNorm();
        corrections.row(i).setZero();
      }
    }
    z = x + box_correction;
    x = z.cwiseMax(f.lower).cwiseMin(f.upper);
    corr2 += (z - x - box_correction).squaredNorm();
    box_correction = z - x;

    double change = std::sqrt((x - prev).squaredNorm() + corr2);
    if (change <= opts.tol && f.polytope_violation(x) <= opts.feas_tol) return x;
    prev = x;
  }

  double resid = f.polytope_violation(x);
  if (resid <= opts.feas_tol) return x;
  throw ProjectionError("projection did not converge within " +
                            std::to_string(opts.max_sweeps) + " sweeps (residual " +
                            std::to_string(resid) + ")",
                        x, resid);
}

}  // namespace

Vec project_box_polytope(const FeasibleSet& f, const Vec& y, const ProjectionOptions& opts) {
  // An already-feasible point is its own projection.
  if (f.max_violation(y) <= 0.0) return y;

  detail::PrefixRows pr = detail::analyze_prefix(f.a_matrix);
  if (pr.ok) return dykstra_prefix(f, y, pr, opts);
  return dykstra_generic(f, y, opts);
}

}  // namespace pevccp
