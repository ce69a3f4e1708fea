#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace pevccp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Uniform discretization of the scheduling horizon.
struct TimeGrid {
  int horizon_steps = 0;    // T
  double step_hours = 0.0;  // duration of one step, hours

  double total_hours() const { return horizon_steps * step_hours; }
};

/// Quadratic electricity tariff: serving aggregate load L over the horizon
/// costs c1 * L'L + c2' L.
struct Tariff {
  double c1 = 0.0;  // per (kW)^2 per step, > 0
  Vec c2;           // per kW per step, length T
};

/// One vehicle: battery, efficiency, plug-in windows and driving consumption.
/// Availability and consumption are mutually exclusive per step: a vehicle is
/// either plugged in or driving, never both.
struct PevModel {
  double battery_capacity_kwh = 0.0;  // C
  double charge_efficiency = 1.0;     // in (0, 1]
  double initial_energy_kwh = 0.0;    // E(0), in [min_soc * C, C]
  double min_soc = 0.0;               // in [0, 1)
  double max_charge_kw = 0.0;         // per-step bound while plugged in
  std::vector<uint8_t> availability;  // length T, 1 = plugged in
  Vec consumption_kwh;                // length T, >= 0, zero on available steps
};

/// A full problem instance.
struct Scenario {
  TimeGrid grid;
  std::vector<PevModel> fleet;  // ordered, length V
  Tariff tariff;
  Vec p_max_kw;         // per-step fleet power cap, > 0
  Vec baseline_load_kw;  // inelastic demand, >= 0 (kept for valley-filling reports)

  int vehicle_count() const { return static_cast<int>(fleet.size()); }
};

/// Tariff equivalent to minimizing the aggregate serving cost
/// a~ * 1'(L + L_in) + b~ * (L + L_in)'(L + L_in) of elastic load L on top of
/// inelastic load L_in: c1 = b~, c2(t) = a~ + 2 b~ L_in(t).
/// Throws ValidationError when b_tilde <= 0.
Tariff derive_tariff(const Vec& baseline_load_kw, double a_tilde, double b_tilde);

struct Violation {
  std::string where;    // offending field or fleet index
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

/// Checks every scenario invariant: vector lengths, tariff and cap positivity,
/// per-vehicle energy feasibility (greedy max-rate probe), per-step forced
/// draws against the cap, and a joint greedy schedule under the cap. An empty
/// report certifies that a feasible point exists (the joint probe exhibits one).
ValidationReport validate_scenario(const Scenario& s);

/// Energy trajectory induced by charging profile x (kW): one entry per step.
Vec energy_trajectory(const PevModel& pev, const TimeGrid& grid, const Vec& x);

/// Greedy max-rate profile: charge as hard as the box and battery ceiling
/// allow from every plug-in until full. Used both as the feasibility probe
/// and as the uncontrolled-charging benchmark.
Vec max_rate_profile(const PevModel& pev, const TimeGrid& grid);

enum class AvailabilityPattern { Overnight, Commuter, RandomWindows };
enum class BaselineShape { Flat, Valley };

/// Knobs for the synthetic scenario generator.
struct ScenarioProfile {
  double capacity_small_kwh = 16.0;
  double capacity_large_kwh = 24.0;
  double small_capacity_share = 0.5;  // fraction of the fleet on the small pack
  double max_charge_kw = 3.5;
  double charge_efficiency = 0.9;
  double min_soc = 0.2;
  AvailabilityPattern availability = AvailabilityPattern::Overnight;
  BaselineShape baseline = BaselineShape::Valley;
  double baseline_level_kw = 16.0;   // flat level / valley floor
  double baseline_peak_kw = 42.0;    // evening peak height (valley shape)
  double a_tilde = 4.0;              // tariff offset
  double b_tilde = 1.0;              // tariff curvature, becomes c1
  double p_max_kw = 25.0;            // constant fleet cap
  double trip_energy_frac_lo = 0.40;  // trip consumption as fraction of usable capacity
  double trip_energy_frac_hi = 0.62;
  double initial_buffer_frac_lo = 0.02;  // initial energy above the SOC floor,
  double initial_buffer_frac_hi = 0.10;  // as fraction of usable capacity

  static ScenarioProfile paperlike();
  static ScenarioProfile flat();
};

/// Deterministic in (seed, v, t, profile); the result passes validate_scenario.
/// Throws ValidationError when the profile parameters admit no valid scenario.
Scenario generate_scenario(uint64_t seed, int v, int t, const ScenarioProfile& profile);

}  // namespace pevccp
