#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "greedyreg/core.hpp"

namespace greedyreg::fitq {

// Piecewise-linear value function on a rectilinear state grid.  All fitted-Q
// experiments in this project run on one-dimensional state spaces (the
// multi-item models are exercised through their step maps and transition
// regularity, not through the grid solver), so the grid is one-dimensional.
struct ValueGrid {
  Eigen::ArrayXd nodes;   // strictly increasing, size >= 2
  Eigen::ArrayXd values;  // same size
  double alpha = 1.0;        // certified Holder exponent
  double ell_alpha = 0.0;    // certified Holder modulus
  double tol = 0.0;          // fixed-point sup-error on nodes

  void validate() const;
  double lo() const { return nodes[0]; }
  double hi() const { return nodes[nodes.size() - 1]; }
  // Index of the cell containing x (last cell for x == hi()).
  Eigen::Index cell(double x) const;
  double interp(double x) const;

  void save_csv(const std::string& path) const;
  static ValueGrid load_csv(const std::string& path);
};

// Disjoint halves of one dataset: the first half fits the value function,
// the second evaluates the Q estimate (split-sample construction).
struct SplitSample {
  std::vector<double> v_sample;
  std::vector<double> q_sample;
};
SplitSample split_in_half(const std::vector<double>& draws);

// One-dimensional stochastic control model with scalar i.i.d. noise.
struct ControlModel {
  std::string name;
  std::function<double(double x, double a, double w)> transition;
  std::function<double(double x, double a, double w)> reward;
  ActionInterval action_space;
  double state_lo = 0.0, state_hi = 1.0;
  double gamma = 0.9;
  double lipschitz_f = 1.0;  // E|f(z,W)-f(z',W)| <= lipschitz_f |z-z'|  (Euclidean z=(x,a))
  double alpha_r = 1.0;      // reward Holder exponent in z
  std::function<double(double w)> reward_holder_L;  // per-noise Holder coefficient L_r(w)

  void validate() const;
  double state_diam() const;
  double clamp_state(double x) const;
};

// Exact empirical Q evaluator bound to a fixed sample:
//   (x, a, V) -> (1/n) sum_i [ r(x,a,w_i) + gamma * V(f(x,a,w_i)) ].
// The default walks the sample; models with exploitable structure may supply
// an algebraically identical fast evaluator.
using EmpiricalQ = std::function<double(double x, double a, const ValueGrid& v)>;

EmpiricalQ make_direct_evaluator(const ControlModel& model, std::vector<double> sample);

struct BellmanOptions {
  int grid_nodes = 33;
  int action_coarse_n = 257;
  double tol = 1e-6;
  int max_sweeps = 100000;
  EmpiricalQ evaluator;  // optional; defaults to the direct sample walk
};

struct BellmanResult {
  ValueGrid grid;
  double alpha = 1.0;          // certified exponent used for ell_alpha
  double alpha_star = 1.0;     // sup of admissible exponents (contraction margin)
  double ell_alpha = 0.0;      // empirical Holder modulus of the fixed point
  int sweeps = 0;
  std::vector<double> sweep_changes;  // sup-node change per sweep
};

// Value iteration for the empirical Bellman operator on a uniform grid with
// continuous-action maximization at every node.  Stops when the sup-node
// change is at most tol*(1-gamma)/(2*gamma), certifying sup error <= tol at
// the nodes.  Throws ContractError when the discounted contraction
// precondition fails.
BellmanResult solve_empirical_bellman(const ControlModel& model,
                                      const std::vector<double>& v_sample,
                                      const BellmanOptions& opt = {});

// Split-sample Q estimate at one point (direct empirical mean over q_sample).
double evaluate_qhat(const ControlModel& model, const std::vector<double>& q_sample,
                     const ValueGrid& vgrid, double x, double a);

// Largest exponent alpha in (0, alpha_r] with gamma * ell_f^alpha < limit
// (bisection); ContractError if none exists.
double certify_alpha(double gamma, double lipschitz_f, double alpha_r, double limit = 0.999);

// Empirical Holder modulus of the fixed point at exponent alpha from sample
// moments of L_r and the centered reward bound R.
double empirical_holder_modulus(const ControlModel& model, const std::vector<double>& sample,
                                double alpha);

struct EnvelopeMeasureSpec {
  int state_nodes = 201;
  int action_nodes = 201;
  std::size_t max_pairs = 100000;  // action pairs subsampled for the Holder quotient
  std::uint64_t seed = 0;
};

// Sup distance and centered-error action-Holder quotient between an estimate
// and a reference surface over a state x action lattice; n_floor adds the
// deterministic n^-17 floor.
EnvelopePair measure_envelopes(const std::function<double(double, double)>& qhat,
                               const std::function<double(double, double)>& qstar_ref,
                               const ControlModel& model, double q_exponent,
                               std::size_t n_floor, const EnvelopeMeasureSpec& spec = {});

// Max Holder quotient |g(x)-g(x')| / |x-x'|^alpha over sampled node pairs.
double sampled_holder_quotient(const ValueGrid& grid, double alpha, std::size_t n_pairs,
                               std::uint64_t seed);

}  // namespace greedyreg::fitq
