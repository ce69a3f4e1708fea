#pragma once

#include "pevccp/distributed.hpp"
#include "pevccp/metrics.hpp"
#include "pevccp/model.hpp"
#include "pevccp/oracle.hpp"

#include <optional>
#include <string>

namespace pevccp {

/// A scenario document: the scenario itself plus optional run configuration.
struct ScenarioDocument {
  Scenario scenario;
  std::optional<ScheduleSet> schedules{};
  std::optional<std::string> topology{};
};

/// Reads a versioned scenario file. Unknown keys are rejected naming the key;
/// scenarios failing validation are rejected with the full report.
Scenario read_scenario(const std::string& path);
ScenarioDocument read_scenario_document(const std::string& path);

void write_scenario(const Scenario& s, const std::string& path);
void write_scenario_document(const ScenarioDocument& doc, const std::string& path);

enum class TraceFormat { Csv, Json };

/// CSV: one row per recorded iteration, columns
/// k, objective, rel_obj, max_disagreement, cap_violation, feas_residual,
/// then the T aggregate-load columns. 17 significant digits throughout.
void write_trace(const RunTrace& t, const std::string& path, TraceFormat format);

void write_central_solution(const CentralSolution& sol, const std::string& path);
CentralSolution read_central_solution(const std::string& path);

RunTrace read_trace_json(const std::string& path);

}  // namespace pevccp
