#include "pevccp/model.hpp"

#include "pevccp/errors.hpp"
#include "pevccp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

namespace pevccp {

namespace {
constexpr double kEps = 1e-9;
}

Tariff derive_tariff(const Vec& baseline_load_kw, double a_tilde, double b_tilde) {
  if (!(b_tilde > 0.0)) {
    throw ValidationError("invalid tariff: b_tilde must be positive, got " +
                          std::to_string(b_tilde));
  }
  Tariff t;
  t.c1 = b_tilde;
  t.c2 = Vec::Constant(baseline_load_kw.size(), a_tilde) + 2.0 * b_tilde * baseline_load_kw;
  return t;
}

Vec energy_trajectory(const PevModel& pev, const TimeGrid& grid, const Vec& x) {
  const int t_len = grid.horizon_steps;
  Vec energy(t_len);
  double e = pev.initial_energy_kwh;
  const double scale = pev.charge_efficiency * grid.step_hours;
  for (int t = 0; t < t_len; ++t) {
    e += scale * x(t) - pev.consumption_kwh(t);
    energy(t) = e;
  }
  return energy;
}

Vec max_rate_profile(const PevModel& pev, const TimeGrid& grid) {
  const int t_len = grid.horizon_steps;
  const double scale = pev.charge_efficiency * grid.step_hours;
  Vec x = Vec::Zero(t_len);
  double e = pev.initial_energy_kwh;
  for (int t = 0; t < t_len; ++t) {
    if (pev.availability[t]) {
      double headroom = std::max(0.0, pev.battery_capacity_kwh - e);
      x(t) = std::min(pev.max_charge_kw, headroom / scale);
    }
    e += scale * x(t) - pev.consumption_kwh(t);
  }
  return x;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "scenario valid";
  std::ostringstream os;
  os << violations.size() << " violation(s):";
  for (const auto& v : violations) os << "\n  [" << v.where << "] " << v.message;
  return os.str();
}

namespace {

// Minimal battery energy required at the end of each step so that a feasible
// future still exists under max-rate charging. Backward recursion.
Vec min_required_energy(const PevModel& pev, const TimeGrid& grid) {
  const int t_len = grid.horizon_steps;
  const double scale = pev.charge_efficiency * grid.step_hours;
  const double floor_kwh = pev.min_soc * pev.battery_capacity_kwh;
  Vec m(t_len);
  double next = floor_kwh;
  for (int t = t_len - 1; t >= 0; --t) {
    m(t) = next;
    double ubound = pev.availability[t] ? pev.max_charge_kw : 0.0;
    next = std::max(floor_kwh, m(t) + pev.consumption_kwh(t) - scale * ubound);
    // `next` is now the requirement at the end of step t-1.
  }
  for (int t = 0; t < t_len; ++t) m(t) = std::max(m(t), floor_kwh);
  return m;
}

void check_pev(const Scenario& s, int v, ValidationReport& report) {
  const PevModel& pev = s.fleet[v];
  const int t_len = s.grid.horizon_steps;
  const std::string where = "fleet[" + std::to_string(v) + "]";
  auto add = [&](const std::string& field, const std::string& msg) {
    report.violations.push_back({where + "." + field, msg});
  };

  if (!(pev.battery_capacity_kwh > 0.0)) add("battery_capacity_kwh", "must be positive");
  if (!(pev.charge_efficiency > 0.0) || pev.charge_efficiency > 1.0)
    add("charge_efficiency", "must lie in (0, 1]");
  if (pev.min_soc < 0.0 || pev.min_soc >= 1.0) add("min_soc", "must lie in [0, 1)");
  if (!(pev.max_charge_kw > 0.0)) add("max_charge_kw", "must be positive");
  if (static_cast<int>(pev.availability.size()) != t_len)
    add("availability", "length differs from grid.horizon_steps");
  if (static_cast<int>(pev.consumption_kwh.size()) != t_len)
    add("consumption_kwh", "length differs from grid.horizon_steps");
  if (!report.violations.empty()) return;  // vector checks below need matching lengths

  if (pev.initial_energy_kwh < pev.min_soc * pev.battery_capacity_kwh - kEps)
    add("initial_energy_kwh", "below min_soc * battery_capacity_kwh");
  if (pev.initial_energy_kwh > pev.battery_capacity_kwh + kEps)
    add("initial_energy_kwh", "exceeds battery_capacity_kwh");
  for (int t = 0; t < t_len; ++t) {
    if (pev.consumption_kwh(t) < 0.0) {
      add("consumption_kwh", "negative at step " + std::to_string(t));
      break;
    }
  }
  for (int t = 0; t < t_len; ++t) {
    if (pev.availability[t] && pev.consumption_kwh(t) > 0.0) {
      add("consumption_kwh",
          "positive while plugged in at step " + std::to_string(t) +
              " (driving and charging are mutually exclusive)");
      break;
    }
  }

  // Greedy max-rate probe: if even charging as hard as possible dips below the
  // SOC floor, no profile can do better.
  Vec greedy = max_rate_profile(pev, s.grid);
  Vec energy = energy_trajectory(pev, s.grid, greedy);
  const double floor_kwh = pev.min_soc * pev.battery_capacity_kwh;
  for (int t = 0; t < t_len; ++t) {
    if (energy(t) < floor_kwh - kEps) {
      add("consumption_kwh", "SOC-infeasible: even max-rate charging falls below the "
                             "minimum state of charge at step " + std::to_string(t));
      return;
    }
  }

  // Forced draw vs. cap: the minimum power this PEV must draw at step t, given
  // the best possible past, must fit under the fleet cap on its own.
  Vec m = min_required_energy(pev, s.grid);
  const double scale = pev.charge_efficiency * s.grid.step_hours;
  double e_prev = pev.initial_energy_kwh;
  for (int t = 0; t < t_len; ++t) {
    double forced = (m(t) - (e_prev - pev.consumption_kwh(t))) / scale;
    if (forced > s.p_max_kw(t) + kEps) {
      add("max_charge_kw", "forced draw " + std::to_string(forced) + " kW at step " +
                               std::to_string(t) + " exceeds p_max");
      return;
    }
    e_prev = energy(t);
  }
}

// Joint greedy schedule under the cap: mandatory draws first, then spare cap
// capacity to the vehicles with the nearest binding requirement. Success
// exhibits one feasible point for the whole problem.
bool joint_probe(const Scenario& s, std::string* failure) {
  const int t_len = s.grid.horizon_steps;
  const int v_len = s.vehicle_count();
  std::vector<Vec> m(v_len);
  std::vector<double> energy(v_len);
  for (int v = 0; v < v_len; ++v) {
    m[v] = min_required_energy(s.fleet[v], s.grid);
    energy[v] = s.fleet[v].initial_energy_kwh;
  }
  for (int t = 0; t < t_len; ++t) {
    double used = 0.0;
    std::vector<double> draw(v_len, 0.0);
    for (int v = 0; v < v_len; ++v) {
      const PevModel& pev = s.fleet[v];
      const double scale = pev.charge_efficiency * s.grid.step_hours;
      double need = (m[v](t) - (energy[v] - pev.consumption_kwh(t))) / scale;
      double ubound = pev.availability[t] ? pev.max_charge_kw : 0.0;
      draw[v] = std::clamp(need, 0.0, ubound);
      used += draw[v];
    }
    if (used > s.p_max_kw(t) + 1e-7) {
      if (failure) {
        *failure = "mandatory draws total " + std::to_string(used) +
                   " kW at step " + std::to_string(t) + ", above p_max";
      }
      return false;
    }
    // Spend leftover capacity on the vehicles whose next requirement is
    // nearest, building buffer against later congestion.
    std::vector<int> order(v_len);
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> deadline(v_len, t_len + 1);
    for (int v = 0; v < v_len; ++v) {
      const double floor_kwh = s.fleet[v].min_soc * s.fleet[v].battery_capacity_kwh;
      for (int u = t + 1; u < t_len; ++u) {
        if (m[v](u) > floor_kwh + kEps) { deadline[v] = u; break; }
      }
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return deadline[a] < deadline[b]; });
    double spare = s.p_max_kw(t) - used;
    for (int v : order) {
      if (spare <= kEps) break;
      const PevModel& pev = s.fleet[v];
      if (!pev.availability[t]) continue;
      const double scale = pev.charge_efficiency * s.grid.step_hours;
      double ceiling = (pev.battery_capacity_kwh - (energy[v] - pev.consumption_kwh(t))) / scale;
      double extra = std::min({spare, pev.max_charge_kw - draw[v], std::max(0.0, ceiling - draw[v])});
      if (extra > 0.0) {
        draw[v] += extra;
        spare -= extra;
      }
    }
    for (int v = 0; v < v_len; ++v) {
      const PevModel& pev = s.fleet[v];
      const double scale = pev.charge_efficiency * s.grid.step_hours;
      energy[v] += scale * draw[v] - pev.consumption_kwh(t);
    }
  }
  return true;
}

}  // namespace

ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport report;
  auto add = [&](const std::string& where, const std::string& msg) {
    report.violations.push_back({where, msg});
  };

  if (s.grid.horizon_steps < 1) add("grid.horizon_steps", "must be >= 1");
  if (!(s.grid.step_hours > 0.0)) add("grid.step_hours", "must be positive");
  if (s.fleet.empty()) add("fleet", "must contain at least one PEV");
  if (!report.ok()) return report;

  const int t_len = s.grid.horizon_steps;
  if (!(s.tariff.c1 > 0.0)) add("tariff.c1", "must be positive");
  if (static_cast<int>(s.tariff.c2.size()) != t_len)
    add("tariff.c2", "length differs from grid.horizon_steps");
  if (static_cast<int>(s.p_max_kw.size()) != t_len)
    add("p_max_kw", "length differs from grid.horizon_steps");
  else
    for (int t = 0; t < t_len; ++t)
      if (!(s.p_max_kw(t) > 0.0)) {
        add("p_max_kw", "must be positive at step " + std::to_string(t));
        break;
      }
  if (static_cast<int>(s.baseline_load_kw.size()) != t_len)
    add("baseline_load_kw", "length differs from grid.horizon_steps");
  else
    for (int t = 0; t < t_len; ++t)
      if (s.baseline_load_kw(t) < 0.0) {
        add("baseline_load_kw", "negative at step " + std::to_string(t));
        break;
      }
  if (!report.ok()) return report;

  for (int v = 0; v < s.vehicle_count(); ++v) check_pev(s, v, report);
  if (!report.ok()) return report;

  std::string failure;
  if (!joint_probe(s, &failure)) add("p_max_kw", "joint feasibility probe failed: " + failure);
  return report;
}

// ---------------------------------------------------------------------------
// Synthetic scenarios
// ---------------------------------------------------------------------------

ScenarioProfile ScenarioProfile::paperlike() { return ScenarioProfile{}; }

ScenarioProfile ScenarioProfile::flat() {
  ScenarioProfile p;
  p.availability = AvailabilityPattern::RandomWindows;
  p.baseline = BaselineShape::Flat;
  p.baseline_level_kw = 20.0;
  return p;
}

namespace {

double baseline_shape(double hour) {
  // Deep night valley, morning shoulder, evening peak.
  auto bump = [](double h, double center, double width) {
    double d = (h - center) / width;
    return std::exp(-0.5 * d * d);
  };
  return 0.55 * bump(hour, 8.5, 2.0) + 1.0 * bump(hour, 19.0, 2.5) +
         0.25 * bump(hour, 13.0, 3.0);
}

struct DayPlan {
  std::vector<uint8_t> availability;
  Vec consumption;
};

// Availability window(s) and trip consumption for one vehicle. Hours wrap a
// single day: the vehicle is plugged in overnight across both horizon ends.
DayPlan make_day_plan(Rng& rng, const ScenarioProfile& p, int t_len, double dt,
                      double trip_energy) {
  DayPlan plan;
  plan.availability.assign(t_len, 0);
  plan.consumption = Vec::Zero(t_len);
  auto step_of = [&](double hour) {
    int s = static_cast<int>(hour / dt);
    return std::clamp(s, 0, t_len - 1);
  };

  if (t_len < 8 || p.availability == AvailabilityPattern::RandomWindows) {
    // Short horizons: always plugged, nothing consumed. Otherwise carve a few
    // random unplugged blocks with one consumption burst each.
    std::fill(plan.availability.begin(), plan.availability.end(), 1);
    if (t_len >= 8) {
      int blocks = rng.uniform_int(1, 2);
      double per_block = trip_energy / blocks;
      for (int b = 0; b < blocks; ++b) {
        int len = rng.uniform_int(2, std::max(2, t_len / 6));
        int start = rng.uniform_int(1, t_len - len - 1);
        bool clear = true;
        for (int i = start; i < start + len; ++i)
          if (!plan.availability[i]) clear = false;
        if (!clear) continue;
        for (int i = start; i < start + len; ++i) {
          plan.availability[i] = 0;
          plan.consumption(i) = per_block / len;
        }
      }
    }
    return plan;
  }

  double depart = rng.uniform(6.0, 9.5);
  double arrive = rng.uniform(17.0, 21.0);
  double trip_hours = std::max(0.75, 2.0 * dt);
  int dep_start = step_of(depart);
  int dep_end = std::min(t_len - 1, step_of(depart + trip_hours));
  int arr_end = step_of(arrive);
  int arr_start = std::max(dep_end + 1, step_of(arrive - trip_hours));

  for (int t = 0; t < t_len; ++t)
    plan.availability[t] = (t < dep_start || t > arr_end) ? 1 : 0;

  if (p.availability == AvailabilityPattern::Commuter) {
    int work_start = std::min(arr_start - 1, step_of(depart + trip_hours + 0.5));
    int work_end = std::max(work_start, step_of(arrive - trip_hours - 0.5));
    for (int t = std::max(dep_end + 1, work_start); t <= std::min(work_end, arr_start - 1); ++t)
      plan.availability[t] = 1;
  }

  auto spread = [&](int from, int to, double energy) {
    int n = std::max(1, to - from + 1);
    for (int t = from; t <= to; ++t) {
      if (t >= 0 && t < t_len && !plan.availability[t]) plan.consumption(t) += energy / n;
    }
  };
  spread(dep_start, dep_end, trip_energy / 2.0);
  spread(arr_start, arr_end, trip_energy / 2.0);
  // Rounding may leave a sliver unassigned when windows collide; park it on
  // the departure step (always unplugged).
  double assigned = plan.consumption.sum();
  if (assigned < trip_energy - kEps) plan.consumption(dep_start) += trip_energy - assigned;
  return plan;
}

Scenario try_generate(uint64_t seed, int v, int t, const ScenarioProfile& p, int attempt) {
  Rng rng(mix64(seed, 0x5eedULL, static_cast<uint64_t>(attempt)));
  Scenario s;
  s.grid.horizon_steps = t;
  s.grid.step_hours = 24.0 / t;

  Vec baseline(t);
  for (int i = 0; i < t; ++i) {
    double hour = (i + 0.5) * s.grid.step_hours;
    double shape = (p.baseline == BaselineShape::Flat) ? 0.0 : baseline_shape(hour);
    baseline(i) = p.baseline_level_kw + p.baseline_peak_kw * shape;
  }
  s.baseline_load_kw = baseline;
  s.tariff = derive_tariff(baseline, p.a_tilde, p.b_tilde);
  s.p_max_kw = Vec::Constant(t, p.p_max_kw);

  int n_small = static_cast<int>(std::llround(p.small_capacity_share * v));
  std::vector<int> caps(v, 0);
  for (int i = 0; i < n_small; ++i) caps[i] = 1;
  for (int i = v - 1; i > 0; --i) std::swap(caps[i], caps[rng.uniform_int(0, i)]);

  s.fleet.reserve(v);
  for (int i = 0; i < v; ++i) {
    PevModel pev;
    pev.battery_capacity_kwh = caps[i] ? p.capacity_small_kwh : p.capacity_large_kwh;
    pev.charge_efficiency = p.charge_efficiency;
    pev.min_soc = p.min_soc;
    pev.max_charge_kw = p.max_charge_kw;
    double usable = (1.0 - p.min_soc) * pev.battery_capacity_kwh;
    double trip = (t < 8) ? 0.0
                          : rng.uniform(p.trip_energy_frac_lo, p.trip_energy_frac_hi) * usable;
    DayPlan plan = make_day_plan(rng, p, t, s.grid.step_hours, trip);
    pev.availability = std::move(plan.availability);
    pev.consumption_kwh = std::move(plan.consumption);
    double floor_kwh = pev.min_soc * pev.battery_capacity_kwh;
    pev.initial_energy_kwh =
        floor_kwh + rng.uniform(p.initial_buffer_frac_lo, p.initial_buffer_frac_hi) * usable;
    s.fleet.push_back(std::move(pev));
  }
  return s;
}

}  // namespace

Scenario generate_scenario(uint64_t seed, int v, int t, const ScenarioProfile& profile) {
  if (v < 1 || t < 1) throw ValidationError("generate_scenario requires v >= 1 and t >= 1");
  if (profile.min_soc < 0.0 || profile.min_soc >= 1.0 || !(profile.max_charge_kw > 0.0) ||
      !(profile.charge_efficiency > 0.0) || profile.charge_efficiency > 1.0 ||
      !(profile.b_tilde > 0.0) || !(profile.p_max_kw > 0.0) ||
      profile.trip_energy_frac_lo < 0.0 ||
      profile.trip_energy_frac_hi < profile.trip_energy_frac_lo ||
      profile.trip_energy_frac_hi > 0.75 || profile.initial_buffer_frac_lo < 0.0 ||
      profile.initial_buffer_frac_hi < profile.initial_buffer_frac_lo ||
      profile.initial_buffer_frac_hi > 0.8 || !(profile.capacity_small_kwh > 0.0) ||
      !(profile.capacity_large_kwh > 0.0) || profile.small_capacity_share < 0.0 ||
      profile.small_capacity_share > 1.0 || profile.baseline_level_kw < 0.0 ||
      profile.baseline_peak_kw < 0.0) {
    throw ValidationError("impossible profile parameters");
  }

  constexpr int kMaxAttempts = 32;
  ValidationReport last;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Scenario s = try_generate(seed, v, t, profile, attempt);
    last = validate_scenario(s);
    if (last.ok()) return s;
  }
  throw ValidationError("scenario generation failed after " + std::to_string(kMaxAttempts) +
                        " attempts: " + last.to_string());
}

}  // namespace pevccp
