#pragma once

#include "pevccp/model.hpp"

#include <cstdint>
#include <vector>

namespace pevccp {

/// One recorded iteration of a distributed run.
struct TraceEntry {
  int k = 0;
  double objective = 0.0;
  double rel_obj = 0.0;  // NaN when no reference objective was supplied
  Vec agg_load_kw;       // per-step aggregate of all schedules, length T
  double max_disagreement = 0.0;  // max over agent pairs of |lambda_v - lambda_w|_inf
  double cap_violation = 0.0;     // max(0, agg - p_max) over steps
  double feas_residual = 0.0;     // max over agents of (A x - b)+; box is exact
};

struct RunTrace {
  std::vector<TraceEntry> entries;  // strictly increasing k
  Mat final_x;                      // V x T
  uint64_t config_fingerprint = 0;  // hash of scenario + schedules + topology + seeds
};

/// |f - f*| / f*. When f* is zero (or negative, which cannot arise from a
/// valid tariff) the absolute gap |f - f*| is reported instead.
double rel_obj(double f, double f_star);

/// max over steps of max(0, agg - p_max).
double cap_violation(const Vec& agg, const Vec& p_max);

struct ValleyReport {
  Vec total_load_kw;             // baseline + coordinated PEV aggregate
  double variance = 0.0;         // population variance of total_load_kw
  double peak = 0.0;
  Vec uncontrolled_total_kw;     // baseline + greedy max-rate aggregate
  double uncontrolled_variance = 0.0;
  double variance_reduction = 0.0;  // uncontrolled_variance - variance
};

/// Flatness of the combined load against the greedy uncontrolled benchmark.
ValleyReport valley_filling_report(const Vec& baseline, const Vec& agg_pev,
                                   const Vec& agg_uncontrolled);

/// Aggregate of max_rate_profile over the fleet (the uncontrolled benchmark).
Vec uncontrolled_aggregate(const Scenario& s);

}  // namespace pevccp
