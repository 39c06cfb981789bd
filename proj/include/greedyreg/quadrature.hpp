#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "greedyreg/errors.hpp"

namespace greedyreg {

struct QuadratureSpec {
  double abs_tol = 1e-9;
  std::vector<double> breakpoints;  // known kinks/jumps: each becomes a panel edge
  int max_depth = 48;
};

struct QuadResult {
  double value = 0.0;
  double err_estimate = 0.0;  // accumulated Richardson estimate
  std::int64_t evals = 0;
};

namespace detail {

template <class F>
void simpson_rec(F& f, double a, double fa, double b, double fb, double m, double fm,
                 double whole, double tol, int depth, int max_depth, QuadResult& out) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  out.evals += 2;
  const double h = b - a;
  const double left = h / 12.0 * (fa + 4.0 * flm + fm);
  const double right = h / 12.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  // Near a jump the Richardson estimate never meets a proportional budget,
  // so panels at max_depth are accepted with their residual booked into
  // err_estimate; the caller decides whether the total is acceptable.
  if (std::abs(diff) <= 15.0 * tol || depth >= max_depth) {
    out.value += left + right + diff / 15.0;
    out.err_estimate += std::abs(diff) / 15.0;
    return;
  }
  simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1, max_depth, out);
  simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1, max_depth, out);
}

template <class F>
void simpson_panel(F& f, double a, double b, double tol, int max_depth, QuadResult& out) {
  if (!(b > a)) return;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  out.evals += 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, 0, max_depth, out);
}

}  // namespace detail

// Adaptive Simpson over [lo, hi].  Interior breakpoints split the domain into
// panels so known kinks sit on panel edges; the absolute tolerance is divided
// across panels proportionally to length.
template <class F>
QuadResult integrate_adaptive(F&& f, double lo, double hi, const QuadratureSpec& spec = {}) {
  if (!(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw ContractError("integrate_adaptive: bad interval");
  QuadResult out;
  if (hi == lo) return out;
  std::vector<double> edges{lo};
  for (double t : spec.breakpoints)
    if (t > lo && t < hi) edges.push_back(t);
  edges.push_back(hi);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  const double total = hi - lo;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double tol = spec.abs_tol * (edges[i + 1] - edges[i]) / total;
    detail::simpson_panel(f, edges[i], edges[i + 1], std::max(tol, 1e-300), spec.max_depth, out);
  }
  if (!std::isfinite(out.value))
    throw NumericError("integrate_adaptive: non-finite integral", out.err_estimate);
  return out;
}

// Numerically stable deterministic reduction (independent of worker count).
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace greedyreg
