#include "pevccp/metrics.hpp"

#include <cmath>

namespace pevccp {

double rel_obj(double f, double f_star) {
  if (f_star <= 0.0) return std::abs(f - f_star);
  return std::abs(f - f_star) / f_star;
}

double cap_violation(const Vec& agg, const Vec& p_max) {
  return std::max(0.0, (agg - p_max).maxCoeff());
}

namespace {
double population_variance(const Vec& x) {
  double mean = x.mean();
  return (x.array() - mean).square().sum() / static_cast<double>(x.size());
}
}  // namespace

ValleyReport valley_filling_report(const Vec& baseline, const Vec& agg_pev,
                                   const Vec& agg_uncontrolled) {
  ValleyReport r;
  r.total_load_kw = baseline + agg_pev;
  r.variance = population_variance(r.total_load_kw);
  r.peak = r.total_load_kw.maxCoeff();
  r.uncontrolled_total_kw = baseline + agg_uncontrolled;
  r.uncontrolled_variance = population_variance(r.uncontrolled_total_kw);
  r.variance_reduction = r.uncontrolled_variance - r.variance;
  return r;
}

Vec uncontrolled_aggregate(const Scenario& s) {
  Vec agg = Vec::Zero(s.grid.horizon_steps);
  for (const auto& pev : s.fleet) agg += max_rate_profile(pev, s.grid);
  return agg;
}

}  // namespace pevccp
