#pragma once

#include "pevccp/feasibility.hpp"
#include "pevccp/model.hpp"

#include <vector>

namespace pevccp {

/// Residuals of the first-order optimality conditions, with multipliers
/// recovered by least squares over the active constraints.
struct KktResidual {
  double stationarity_x = 0.0;   // max-norm residual of the per-PEV condition
  double stationarity_l = 0.0;   // residual of the aggregate-load condition
  double complementarity = 0.0;  // max |multiplier * slack| over all pairings
  double dual_feasibility = 0.0; // most negative recovered multiplier (<= 0)

  double worst() const;
};

struct CentralSolution {
  Mat x_all;      // V x T charging schedules
  Vec l_agg;      // column sums of x_all
  double objective = 0.0;
  KktResidual kkt;
};

enum class Execution { Serial, OpenMp };

struct SolveOptions {
  int max_iters = 200000;
  int plateau_window = 50;    // consecutive small objective changes required
  bool accelerate = true;     // FISTA-style momentum with monotone restart
  Execution exec = Execution::Serial;
  ProjectionOptions projection{};  // per-agent Dykstra settings
};

/// c1 L'L + c2'L with L = column sums of x_all. Pure; checks dimensions only.
double objective_value(const Scenario& s, const Mat& x_all);

/// Centralized reference solver: projected gradient on the stacked schedules
/// with step 1/(2 c1 V), feasibility kept by Dykstra over the per-PEV sets and
/// the fleet cap. Stops when the relative objective change stays below tol
/// over plateau_window iterations and the KKT residuals are below 10*tol.
CentralSolution solve_central(const Scenario& s, double tol,
                              const SolveOptions& opts = {});

/// Recovers multipliers for sol by least squares on the stationarity
/// conditions restricted to constraints active within 1e-6, then reports the
/// residuals. Residuals <= tol certify optimality within tol.
KktResidual kkt_check(const Scenario& s, const CentralSolution& sol, double tol);

/// Projection of the stacked schedules onto the intersection of the per-PEV
/// sets and the fleet cap (Dykstra over the two set families). Throws
/// InfeasibleScenarioError when the families are certifiably disjoint.
Mat project_joint(const std::vector<FeasibleSet>& sets, const Vec& p_max, Mat x,
                  const ProjectionOptions& opts = {}, Execution exec = Execution::Serial);

}  // namespace pevccp
