#pragma once

// Shared Dykstra machinery. The energy polytopes built from the battery
// recursion have pure prefix rows (a constant coefficient on a leading
// segment), which admits an O(T) halfspace pass with running prefix sums and
// scalar corrections. Generic matrices fall back to dense row projections.

#include "pevccp/model.hpp"

#include <algorithm>
#include <vector>

namespace pevccp::detail {

struct PrefixRows {
  bool ok = false;
  std::vector<double> coef;  // per-row coefficient on the leading segment
  std::vector<int> len;      // per-row segment length
  std::vector<int> order;    // row indices sorted by ascending length
};

inline PrefixRows analyze_prefix(const Mat& a) {
  PrefixRows pr;
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  pr.coef.resize(m);
  pr.len.resize(m);
  for (int i = 0; i < m; ++i) {
    int last = -1;
    for (int j = n - 1; j >= 0; --j) {
      if (a(i, j) != 0.0) {
        last = j;
        break;
      }
    }
    pr.len[i] = last + 1;
    pr.coef[i] = last >= 0 ? a(i, 0) : 0.0;
    for (int j = 0; j <= last; ++j) {
      if (a(i, j) != pr.coef[i]) return pr;  // not a uniform prefix row
    }
  }
  pr.order.resize(m);
  for (int i = 0; i < m; ++i) pr.order[i] = i;
  std::stable_sort(pr.order.begin(), pr.order.end(),
                   [&](int l, int r) { return pr.len[l] < pr.len[r]; });
  pr.ok = true;
  return pr;
}

/// One Dykstra cycle over the prefix halfspaces of a single agent, in
/// ascending segment length. corrections holds one nonnegative scalar per row
/// (the Dykstra correction is always a multiple of the row normal); pending
/// accumulates the per-length coordinate deltas and is materialized into x at
/// the end. Returns the squared norm of the correction change, which belongs
/// to the convergence measure: the iterate alone can sit still (pinned on a
/// box corner) while the corrections still move. O(T + m).
inline double prefix_halfspace_pass(const PrefixRows& pr, const Vec& b, Vec& x,
                                    std::vector<double>& corrections,
                                    std::vector<double>& pending) {
  const int n = static_cast<int>(x.size());
  std::fill(pending.begin(), pending.end(), 0.0);
  double prefix_sum = 0.0;
  double corr_change2 = 0.0;
  int pos = 0;
  for (int idx : pr.order) {
    const int seg = pr.len[idx];
    const double a = pr.coef[idx];
    if (seg == 0 || a == 0.0) continue;
    while (pos < seg) prefix_sum += x(pos++);
    const double norm2 = a * a * seg;
    const double resid = a * prefix_sum + corrections[idx] * norm2 - b(idx);
    const double c_next = resid > 0.0 ? resid / norm2 : 0.0;
    const double delta = (corrections[idx] - c_next) * a;
    if (delta != 0.0) {
      prefix_sum += seg * delta;
      pending[seg] += delta;
    }
    corr_change2 += (c_next - corrections[idx]) * (c_next - corrections[idx]) * norm2;
    corrections[idx] = c_next;
  }
  double acc = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    acc += pending[t + 1];
    x(t) += acc;
  }
  return corr_change2;
}

/// Box step of the cycle: project x + correction, store the new correction.
/// Returns the squared correction change.
inline double box_pass(const Vec& lower, const Vec& upper, Vec& x, Vec& box_correction) {
  double corr_change2 = 0.0;
  for (int t = 0; t < x.size(); ++t) {
    double z = x(t) + box_correction(t);
    double clamped = std::min(std::max(z, lower(t)), upper(t));
    double next = z - clamped;
    corr_change2 += (next - box_correction(t)) * (next - box_correction(t));
    box_correction(t) = next;
    x(t) = clamped;
  }
  return corr_change2;
}

/// Largest positive row residual, O(T + m) for prefix rows.
inline double prefix_violation(const PrefixRows& pr, const Vec& b, const Vec& x) {
  double prefix_sum = 0.0;
  int pos = 0;
  double worst = 0.0;
  for (int idx : pr.order) {
    const int seg = pr.len[idx];
    if (seg == 0) continue;
    while (pos < seg) prefix_sum += x(pos++);
    worst = std::max(worst, pr.coef[idx] * prefix_sum - b(idx));
  }
  return worst;
}

}  // namespace pevccp::detail
