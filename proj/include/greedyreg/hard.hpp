#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "greedyreg/core.hpp"

namespace greedyreg::hard {

// Two one-stage absorbing families on state space [0,1] u {2} with action
// interval [-1,1].  "Plus" couples a state-dependent margin with a reward
// bonus below a theta-dependent threshold; "Minus" is state-independent with
// a kink at +/- d_theta.  Both absorb into x = 2 after one step.
enum class Family { Plus, Minus };

inline const char* family_name(Family f) { return f == Family::Plus ? "plus" : "minus"; }
Family family_from_name(const std::string& name);

constexpr double kAbsorbingState = 2.0;
constexpr double kEnvelopeFloorExponent = -17.0;

struct HardInstance {
  Family family = Family::Minus;
  double theta = 0.0;  // |theta| <= 1
  RateParams params;

  void validate() const;
  // Threshold d_theta: Plus (|theta|/2)^(1/m), Minus |theta|^(1/(p-q)).
  double d_theta() const;
};

// Ordered draws from the instance's noise law: y_i = +/-1 with mean theta,
// d_i = d_theta (deterministic coordinate).  theta_truth is bookkeeping for
// oracle baselines and envelope audits, never visible to adapted algorithms.
struct NoiseDataset {
  std::vector<double> y;
  std::vector<double> d;
  double theta_truth = 0.0;
  std::uint64_t seed = 0;

  std::size_t n() const { return y.size(); }
  double ybar() const;
  double dbar() const;
};

// ---------------------------------------------------------------------------
// Closed-form surfaces

// Sigmoid-like link h_p(a) = (1+a)^p / ((1+a)^p + (1-a)^p) on [-1,1].
double h_p(double a, double p);

// Optimal Q for the Plus / Minus instance at (x,a); domain [0,1] u {2}.
double q_plus(const HardInstance& inst, double x, double a);
double q_minus(const HardInstance& inst, double x, double a);
double q_value(const HardInstance& inst, double x, double a);

// Optimal value and optimal action set at x.
struct OptimalActions {
  enum class Kind { Points, FullInterval } kind = Kind::Points;
  double value = 0.0;
  std::vector<double> actions;  // empty when kind == FullInterval

  double distance(double a) const;
};
OptimalActions optimal_action_set(const HardInstance& inst, double x);
double vstar(const HardInstance& inst, double x);

// Pointwise growth function g_p: Plus 2^-(p+1) x^m on [0,1] (2 at the
// absorbing state), Minus the constant c_p.
double growth_value(const HardInstance& inst, double x);

// Margin constant for the Plus family: max(2^((p+1)/m - 1), 2^(-1/m)).
double margin_constant(const RateParams& params);

// Numerically certified constants (cached per parameter tuple):
//   holder_constant_h(p, q): sup over pairs of |h_p(a)-h_p(b)| / |a-b|^q
//   growth_constant_minus(p): inf over rho >= 0 of (1+|1-rho|^p)/(1+rho)^p
double holder_constant_h(double p, double q, int lattice_n = 2001);
double growth_constant_minus(double p);

// ---------------------------------------------------------------------------
// Data, estimators, greedy rules

NoiseDataset sample_dgp(const HardInstance& inst, std::size_t n, std::uint64_t seed);
void sample_dgp_into(const HardInstance& inst, std::size_t n, std::uint64_t seed, NoiseDataset& out);

// Plug-in surface built from sample means (ybar, dbar); evaluates the
// estimated Q at any (x, a).
struct PluginSurface {
  Family family = Family::Minus;
  double p = 2.0, q = 1.0, m = 1.0;
  double ybar = 0.0, dbar = 0.0;

  double eval(double x, double a) const;
  QSurface as_qsurface() const;
};
PluginSurface plugin_qhat(const HardInstance& shape, const NoiseDataset& data);

// Exact greedy selector of a plug-in surface, in closed form (smallest-action
// tie-break, matching the lattice machinery on non-degenerate gaps).
struct GreedyRule {
  Family family = Family::Minus;
  double ybar = 0.0, dbar = 0.0, m = 1.0;

  double act(double x) const;
  std::vector<double> state_breakpoints() const;
  Policy as_policy() const;
};
GreedyRule plugin_greedy(const PluginSurface& s);

// Envelopes for the plug-in estimator (uses theta_truth; floor n^-17):
//   delta  = |ybar - theta| + n^-17
//   lambda = Plus: (max(ell_pq, 2)) |ybar - theta| + n^-17, Minus: 2 |ybar - theta| + n^-17
EnvelopePair envelopes_hard(const HardInstance& inst, const NoiseDataset& data, double q_exponent);

// Exact one-stage regret of a rule on an instance (uniform mu on [0,1]).
double regret_exact_hard(const HardInstance& inst, const GreedyRule& rule, double abs_tol = 1e-9);

// Simulator adapter (one step of reward, then absorption) for Monte Carlo.
Simulator make_simulator(const HardInstance& inst);

// ---------------------------------------------------------------------------
// Two-point experiment

struct HardAlgorithm {
  std::string name;
  bool adapted = true;  // false if the map peeks at theta_truth
  std::function<GreedyRule(const NoiseDataset&, const HardInstance&)> build;
};
HardAlgorithm make_plugin_algorithm();
HardAlgorithm make_oracle_algorithm();  // negative control: reads theta_truth

struct TwoPointResult {
  double max_expected_regret = 0.0;  // worst of the two arms
  double max_ci95 = 0.0;
  double lower_bound = 0.0;          // family lower-bound constant at this n
  MeanSe arm_plus;
  MeanSe arm_minus;
  bool algorithm_adapted = true;
};

// Runs the algorithm against theta = +/- 1/(4 sqrt(n)); per-replication
// streams derive from (seed, arm, replication).
TwoPointResult two_point_experiment(Family family, const RateParams& params, std::size_t n,
                                    int replications, const HardAlgorithm& algorithm,
                                    std::uint64_t seed, int workers = 1);

// Family lower-bound constant and rate: bound(n) = c * n^-rate.
double lower_bound_value(Family family, const RateParams& params, std::size_t n);
double two_point_rate_exponent(Family family, const RateParams& params);

// Structured-text (JSON) round trip for instances.
std::string instance_to_json(const HardInstance& inst);
HardInstance instance_from_json(const std::string& text);

}  // namespace greedyreg::hard
