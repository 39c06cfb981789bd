#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "greedyreg/fitq.hpp"

namespace greedyreg::orm {

using Arr = Eigen::ArrayXd;

// ---------------------------------------------------------------------------
// Step maps (componentwise, k items)

// Lost-sales inventory: next = (min(x + a, b) - d)^+.
Arr inventory_step(const Arr& x, const Arr& a, const Arr& d, const Arr& b);

// Workload routing: next = min((x + xi - a)^+, b).
Arr workload_step(const Arr& x, const Arr& xi, const Arr& a, const Arr& b);

// ---------------------------------------------------------------------------
// Lost-sales desk model (1 item)

struct LostSalesParams {
  double capacity = 1.0;
  double price = 1.0;
  double order_cost = 0.25;
  double holding_cost = 0.1;
  double gamma = 0.5;

  double reward_bound() const { return price + order_cost * capacity + holding_cost * capacity; }
};

// One-item lost-sales model with uniform demand on [0, capacity]; reward
//   price * min(u, w) - order_cost * a - holding_cost * (u - w)^+,  u = min(x+a, capacity).
fitq::ControlModel make_lost_sales_model(const LostSalesParams& params);

// Exact empirical Q evaluator for the lost-sales model: the sample is sorted
// once and every (x, a) query aggregates reward and interpolated continuation
// terms through prefix sums, in O(grid cells * log n).  Algebraically equal
// to the direct sample walk.
fitq::EmpiricalQ make_lost_sales_evaluator(const LostSalesParams& params,
                                           std::vector<double> sample);

// Population counterpart: demand Uniform[0, capacity] integrated in closed
// form against the piecewise-linear value grid.  Sample-free, so it serves as
// the reference Bellman backup (the only error left is the grid itself).
fitq::EmpiricalQ make_lost_sales_uniform_evaluator(const LostSalesParams& params);

std::vector<double> sample_uniform_demand(const LostSalesParams& params, std::size_t n,
                                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Densities and total-variation regularity

// Density on a uniform rectilinear grid (dimension 1 or 2); linear (bilinear)
// interpolation inside the support box, zero outside.
struct DensityGrid {
  int dim = 1;
  Arr axis0, axis1;   // node coordinates per dimension (axis1 empty when dim == 1)
  Arr values;         // node values, row-major (i0 * n1 + i1) when dim == 2

  void validate() const;
  double eval1(double w) const;
  double eval2(double w0, double w1) const;
  // Mass by the same aligned quadrature used for shift norms.
  double mass() const;
  void normalize();

  void save_csv(const std::string& path) const;
  static DensityGrid load_csv(const std::string& path);
};

DensityGrid uniform_density(double lo, double hi, int cells);
DensityGrid gaussian_density(double mean, double sigma, double half_width, int cells);
// Uniform plus one narrow spike cell holding `atom_mass` (an atom stand-in).
DensityGrid atom_spike_density(double lo, double hi, int cells, double atom_pos, double atom_mass);
// Density of (U, (U+V)/2) for independent U, V uniform on [0,1]: value 2 on
// the sheared support, a correlated two-dimensional demand fixture.
DensityGrid correlated_square_density(int cells_per_axis);

// L1 norm of p(. + h) - p over the padded support; breakpoint-aligned
// composite midpoint quadrature refined until the relative change is below
// rel_tol.  h has the grid's dimension.
double tv_shift_norm(const DensityGrid& grid, const Arr& h, double rel_tol = 1e-4);

struct TvFit {
  double q_bar = 0.0;       // fitted shift exponent
  double ell = 0.0;         // certified coefficient: max_k tv_k / h_k^q_bar
  double fit_stderr = 0.0;  // OLS slope standard error
  bool regular = true;      // false when the fit says the density is atom-like
  std::vector<double> h;
  std::vector<double> tv;
};

// Fit tv(h) ~ ell * h^q_bar along a fixed unit direction over magnitudes
// spanning at least two decades.
TvFit fit_tv_exponent(const DensityGrid& grid, const std::vector<double>& h_magnitudes,
                      const Arr& direction, double rel_tol = 1e-4);

enum class TransitionKind { Inventory, Workload };

struct TvAuditResult {
  double max_ratio = 0.0;  // worst (pre-clip L1 / 2) / ((ell/2) |a - a'|^q_bar)
  std::size_t pairs = 0;
  std::size_t skipped = 0;  // coincident action pairs
};

// Estimates the action regularity of the transition law: the total-variation
// distance between post-decision laws is bounded through the pre-clip shifted
// density, and each sampled (x, a, a') pair contributes the ratio of that
// bound to (ell/2) |a-a'|^q_bar.
TvAuditResult tv_action_regularity_audit(TransitionKind kind, const DensityGrid& noise,
                                         const Arr& state_hi, const Arr& action_hi,
                                         double ell, double q_bar, std::size_t n_draws,
                                         std::uint64_t seed, double simplex_budget = -1.0);

}  // namespace greedyreg::orm
