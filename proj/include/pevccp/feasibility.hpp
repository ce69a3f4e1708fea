#pragma once

#include "pevccp/model.hpp"

namespace pevccp {

/// Per-PEV feasible set F = {x : A x <= b, lower <= x <= upper}.
/// A stacks two cumulative-energy rows per step (battery ceiling, SOC floor),
/// so it has exactly 2T rows; lower is identically zero (no discharging).
struct FeasibleSet {
  Mat a_matrix;  // m x T
  Vec b_vector;  // m
  Vec lower;     // T
  Vec upper;     // T

  int dim() const { return static_cast<int>(lower.size()); }
  int row_count() const { return static_cast<int>(b_vector.size()); }

  /// max(0, max_i (A x - b)_i); box violations are reported separately.
  double polytope_violation(const Vec& x) const;
  /// max over box bounds of how far x escapes them.
  double box_violation(const Vec& x) const;
  /// Largest violation across all constraints.
  double max_violation(const Vec& x) const {
    return std::max(polytope_violation(x), box_violation(x));
  }
  bool contains(const Vec& x, double tol) const { return max_violation(x) <= tol; }
};

/// Builds the energy polytope of one PEV from its battery recursion and SOC
/// bounds. Certifies non-emptiness with the greedy max-rate profile; throws
/// InfeasiblePevError naming the earliest violated step otherwise.
FeasibleSet build_feasible_set(const PevModel& pev, const TimeGrid& grid);

struct ProjectionOptions {
  double tol = 1e-8;        // Dykstra stop: iterate change per sweep
  double feas_tol = 1e-7;   // accepted polytope residual of the result
  int max_sweeps = 10000;
};

/// Euclidean projection of y onto F via Dykstra's alternating projections
/// over the individual halfspaces and the box. Box bounds hold exactly on the
/// result; A x <= b holds within feas_tol. Throws ProjectionError (carrying
/// the best iterate and its residual) when the sweep cap is exhausted.
Vec project_box_polytope(const FeasibleSet& f, const Vec& y,
                         const ProjectionOptions& opts = {});

/// Elementwise max(y, floor).
Vec project_halfline_floor(const Vec& y, const Vec& floor);

/// Elementwise min(y, cap).
Vec project_halfline_cap(const Vec& y, const Vec& cap);

}  // namespace pevccp
