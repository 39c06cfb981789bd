#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "greedyreg/core.hpp"
#include "greedyreg/fitq.hpp"
#include "greedyreg/hard.hpp"
#include "greedyreg/ormodels.hpp"
#include "greedyreg/rng.hpp"

namespace greedyreg {

// ---------------------------------------------------------------------------
// Rate exponents

// min{p/(2(p-q)), (m+1)/(2m)}; the first term reads as +inf when p = q.
struct TheoreticalExponent {
  double value = 0.0;
  bool boundary = false;  // p = q(m+1): a log factor sits below desk resolution
  double growth_term = 0.0;
  double margin_term = 0.0;
};
TheoreticalExponent theoretical_exponent(const RateParams& params);

struct ExponentFit {
  double exponent = std::numeric_limits<double>::quiet_NaN();
  double stderr_value = std::numeric_limits<double>::quiet_NaN();
  int points_used = 0;
  int points_dropped = 0;  // nonpositive ordinates
  bool degenerate = true;  // fewer than 3 usable points
};
// OLS of log(mean_regret) on log(n); the exponent is the negated slope.
ExponentFit fit_exponent(const std::vector<double>& n_values,
                         const std::vector<double>& mean_regret);

struct RateConfig {
  hard::Family family = hard::Family::Minus;
  RateParams params;
  std::vector<std::size_t> n_values;
  int replications = 2000;
  hard::HardAlgorithm algorithm;  // plug-in rule when left empty
  std::uint64_t seed = 0;
  int workers = 1;
};

struct RateReport {
  std::string family;
  RateParams params;
  std::string algorithm_name;
  bool algorithm_adapted = true;
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> n_values;
  std::vector<double> mean_regret;  // worst of the two theta arms per n
  std::vector<double> ci95;
  std::vector<double> lower_bound;
  int lower_bound_violations = 0;  // counted for adapted algorithms only
  double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
  double fitted_stderr = std::numeric_limits<double>::quiet_NaN();
  int fit_points_used = 0;
  int fit_points_dropped = 0;
  bool fit_degenerate = true;
  double theoretical_exponent = 0.0;
  bool boundary_flag = false;
};
RateReport run_rate_experiment(const RateConfig& config);

// ---------------------------------------------------------------------------
// Audits

struct AuditViolation {
  std::string inputs;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
};

struct AuditReport {
  std::string name;
  std::size_t trials = 0;
  double slack = 0.0;
  std::size_t violation_count = 0;
  std::vector<AuditViolation> violations;  // stored up to a cap
  double min_margin = std::numeric_limits<double>::infinity();  // min rhs+slack-lhs
};

// Greedy suboptimality against the envelope/growth bound, one dataset, many x.
// corrupt_bound > 0 shifts every rhs down (negative-control fixture).
AuditReport greedy_stability_audit(const hard::HardInstance& inst, const hard::NoiseDataset& data,
                                   const std::vector<double>& x_lattice, double q_exponent,
                                   double slack = 1e-9, double corrupt_bound = 0.0);

// Randomized (family, theta, n, seed, x) tuples; one bound check per trial.
AuditReport randomized_stability_audit(std::size_t trials, double slack, std::uint64_t seed,
                                       double corrupt_bound = 0.0);

// g(x) dist(a, A*(x))^p <= V*(x) - Q*(x,a) on an (x,a) lattice plus the
// absorbing row and the kink actions.
AuditReport p_growth_audit(const hard::HardInstance& inst, std::size_t x_points,
                           std::size_t a_points, double slack = 1e-9,
                           double corrupt_bound = 0.0);

// Initial-measure mass of {g <= t} (empirical, on a lattice that undercounts)
// against M t^(1/m) on a log-spaced t lattice with the tight corners added.
AuditReport margin_mass_audit(const hard::HardInstance& inst, std::size_t t_points,
                              std::size_t mass_points, double slack = 1e-9,
                              double corrupt_bound = 0.0);

// Random probes of the variational form behind the constant-growth family:
// (1+|1-rho|^p)/(1+rho)^p >= certified c_p.
AuditReport growth_constant_audit(double p, std::size_t trials, std::uint64_t seed,
                                  double slack = 1e-9);

// |Qhat - Q*| <= delta on an (x,a) lattice; action-Holder quotient of the
// error sheet <= lambda over strided lattice pairs.
AuditReport envelope_surface_audit(const hard::HardInstance& inst, const hard::NoiseDataset& data,
                                   double q_exponent, std::size_t x_points, std::size_t a_points,
                                   double slack = 1e-9, double corrupt_bound = 0.0);

struct AuditSuite {
  std::vector<AuditReport> reports;
  std::size_t total_trials = 0;
  std::size_t total_violations = 0;
};
// Stability, growth, margin-mass, and envelope audits over a randomized panel.
AuditSuite run_audit_suite(std::size_t stability_trials, std::size_t instance_draws,
                           std::size_t lattice_points, double slack, std::uint64_t seed,
                           double corrupt_bound = 0.0);

// ---------------------------------------------------------------------------
// Moment scaling

using EnvelopeSampler = std::function<double(std::size_t n, Rng& rng)>;

struct MomentScaling {
  std::vector<std::size_t> n_values;
  std::vector<double> moment_mean;
  std::vector<double> moment_se;
  int k = 2;
  double slope = std::numeric_limits<double>::quiet_NaN();  // raw log-log OLS slope
  double slope_stderr = std::numeric_limits<double>::quiet_NaN();
};
MomentScaling moment_scaling_check(const EnvelopeSampler& sampler,
                                   const std::vector<std::size_t>& n_values, int k,
                                   std::size_t replications, std::uint64_t seed, int workers = 1);

// Envelope draws for a hard instance at sample size n.
EnvelopeSampler hard_delta_sampler(const hard::HardInstance& inst);
EnvelopeSampler hard_lambda_sampler(const hard::HardInstance& inst, double q_exponent);

// ---------------------------------------------------------------------------
// Lemma oracles

using Sampler = std::function<double(Rng&)>;
using PairSampler = std::function<std::pair<double, double>(Rng&)>;

struct OracleResult {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double lhs_std_error = 0.0;
  double rhs_std_error = 0.0;
  bool holds = false;  // lhs <= rhs + 3 combined std errors
};

// Truncation constant rebuilt from the proof chain: splitting at
// s = (v/2u)^(1/alpha) costs 2M 2^(-1/(m alpha)) on the small-G mass and a
// factor m alpha/(m alpha - 1) on the same u,v power from the tail integral,
// plus a bare v; the constant is the max of 1 and the combined coefficient.
double truncation_constant(double M, double m, double alpha);

// E[min{2u, v G^(-alpha)}] against the truncation bound; alpha >= 1/m.
OracleResult truncation_lemma_oracle(const Sampler& g_sampler, double M, double m, double alpha,
                                     double u, double v, std::size_t n_mc, std::uint64_t seed,
                                     double rhs_scale = 1.0);

// E[G^(-alpha) 1{G>0}] against 1 + M m alpha/(1 - m alpha); alpha in [0,1/m).
OracleResult inverse_moment_oracle(const Sampler& g_sampler, double alpha, double M, double m,
                                   std::size_t n_mc, std::uint64_t seed, double rhs_scale = 1.0);

// E|XY| against E[|X|^p]^(1/p) E[|Y|^q]^(1/q) for 1/p + 1/q <= 1
// (an exponent of +inf turns the factor into a sample max).
OracleResult generalized_holder_oracle(const PairSampler& xy_sampler, double p, double q,
                                       std::size_t n_mc, std::uint64_t seed,
                                       double rhs_scale = 1.0);
OracleResult generalized_holder_oracle(const Sampler& x_sampler, const Sampler& y_sampler,
                                       double p, double q, std::size_t n_mc, std::uint64_t seed,
                                       double rhs_scale = 1.0);

struct SignPowerCheck {
  double q = 1.0;
  double max_ratio = 0.0;
  double bound = 0.0;  // 2^(1-q)
  std::size_t pairs = 0;
  bool holds = false;
};
// max over random pairs of |sign(a)|a|^q - sign(b)|b|^q| / |a-b|^q vs 2^(1-q).
SignPowerCheck sign_power_check(double q, std::size_t pairs, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Inventory study glue

struct InventoryReference {
  orm::LostSalesParams params;
  fitq::BellmanResult solution;        // fixed point under the population demand
  std::vector<double> greedy_actions;  // argmax action per solution grid node
  double bellman_residual = 0.0;       // sup |TV - V| over an off-node lattice
  double value_error_bound = 0.0;      // propagated to ||V - V*||_inf
  double vstar_mu = 0.0;               // value integral under Uniform[0, b]
};
InventoryReference build_inventory_reference(const orm::LostSalesParams& params,
                                             int grid_nodes = 201, double tol = 1e-9);

struct InventoryPdCheck {
  PdResidual pd;
  double budget = 0.0;  // discounted propagation of the value-error bound
  bool holds = false;   // residual <= 3 SE + budget
};
// Performance-difference identity on the inventory model under a fixed
// (deliberately suboptimal) order policy, with empirical occupancy.
InventoryPdCheck inventory_pd_check(const InventoryReference& ref, int n_paths,
                                    std::uint64_t seed);

struct ScalingOptions {
  int grid_nodes = 33;
  int action_coarse_n = 33;
  double tol = 1e-6;
  fitq::EnvelopeMeasureSpec measure = {201, 201, 20000, 0};
};

struct EnvelopeScalingReport {
  std::vector<std::size_t> n_values;
  std::vector<double> delta_sq_mean, delta_sq_se;
  std::vector<double> lambda_sq_mean, lambda_sq_se;
  ExponentFit delta_fit;  // exponent ~ 1 when E[delta^2] ~ 1/n
  ExponentFit lambda_fit;
  double q_exponent = 0.5;
  double alpha_star = 0.0;
  double ell_alpha_ref = 0.0;
};
// Split-sample fitted-Q envelopes against the population reference surface,
// replicated over fresh demand samples per n.
EnvelopeScalingReport inventory_envelope_scaling(const InventoryReference& ref,
                                                 const std::vector<std::size_t>& n_values,
                                                 std::size_t replications, double q_exponent,
                                                 std::uint64_t seed, int workers = 1,
                                                 const ScalingOptions& opts = {});

}  // namespace greedyreg
