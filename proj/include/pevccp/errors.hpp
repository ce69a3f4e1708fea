#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace pevccp {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A scenario failed validation (carries the rendered report).
struct ValidationError : Error {
  using Error::Error;
};

/// A single PEV admits no charging profile that respects its energy bounds.
struct InfeasiblePevError : Error {
  int pev_index;
  int earliest_violated_step;
  InfeasiblePevError(int pev, int step, const std::string& msg)
      : Error(msg), pev_index(pev), earliest_violated_step(step) {}
};

/// Projection did not converge within the sweep cap.
struct ProjectionError : Error {
  Eigen::VectorXd best_iterate;
  double residual;
  ProjectionError(std::string msg, Eigen::VectorXd best, double resid)
      : Error(std::move(msg)), best_iterate(std::move(best)), residual(resid) {}
};

/// The coupled problem has no feasible point; names the failing constraint family.
struct InfeasibleScenarioError : Error {
  std::string constraint_family;
  InfeasibleScenarioError(std::string family, const std::string& msg)
      : Error(msg), constraint_family(std::move(family)) {}
};

/// An iterative solver hit its iteration cap before meeting tolerance.
struct ConvergenceError : Error {
  double best_objective;
  ConvergenceError(const std::string& msg, double best)
      : Error(msg), best_objective(best) {}
};

/// Communication setup violates the protocol (e.g. disconnected graph).
struct ProtocolError : Error {
  using Error::Error;
};

/// Malformed input document.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace pevccp
