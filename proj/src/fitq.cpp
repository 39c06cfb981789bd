#include "greedyreg/fitq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace greedyreg::fitq {

void ValueGrid::validate() const {
  if (nodes.size() < 2 || nodes.size() != values.size())
    throw ContractError("ValueGrid: need >= 2 nodes and matching values");
  for (Eigen::Index i = 1; i < nodes.size(); ++i)
    if (!(nodes[i] > nodes[i - 1])) throw ContractError("ValueGrid: nodes must increase");
}

Eigen::Index ValueGrid::cell(double x) const {
  const Eigen::Index n = nodes.size();
  if (x <= nodes[0]) return 0;
  if (x >= nodes[n - 1]) return n - 2;
  const double* begin = nodes.data();
  const Eigen::Index i = std::upper_bound(begin, begin + n, x) - begin - 1;
  return std::min(i, n - 2);
}

double ValueGrid::interp(double x) const {
  const double slack = 1e-9 * std::max(1.0, hi() - lo());
  if (x < lo() - slack || x > hi() + slack)
    throw ContractError("ValueGrid::interp: x outside grid at x=" + std::to_string(x));
  x = std::min(hi(), std::max(lo(), x));
  const Eigen::Index i = cell(x);
  const double t = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
  return values[i] + t * (values[i + 1] - values[i]);
}

void ValueGrid::save_csv(const std::string& path) const {
  validate();
  std::ofstream out(path);
  if (!out) throw ContractError("ValueGrid::save_csv: cannot open " + path);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "# alpha=%.17g ell_alpha=%.17g tol=%.17g\n", alpha, ell_alpha, tol);
  out << buf << "node,value\n";
  for (Eigen::Index i = 0; i < nodes.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", nodes[i], values[i]);
    out << buf;
  }
}

ValueGrid ValueGrid::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("ValueGrid::load_csv: cannot open " + path);
  std::string line;
  ValueGrid g;
  std::vector<double> ns, vs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::sscanf(line.c_str(), "# alpha=%lg ell_alpha=%lg tol=%lg", &g.alpha, &g.ell_alpha, &g.tol);
      continue;
    }
    if (line.rfind("node", 0) == 0) continue;
    double n = 0, v = 0;
    if (std::sscanf(line.c_str(), "%lg,%lg", &n, &v) != 2)
      throw ContractError("ValueGrid::load_csv: malformed row: " + line);
    ns.push_back(n);
    vs.push_back(v);
  }
  g.nodes = Eigen::Map<Eigen::ArrayXd>(ns.data(), static_cast<Eigen::Index>(ns.size()));
  g.values = Eigen::Map<Eigen::ArrayXd>(vs.data(), static_cast<Eigen::Index>(vs.size()));
  g.validate();
  return g;
}

SplitSample split_in_half(const std::vector<double>& draws) {
  if (draws.size() < 2) throw ContractError("split_in_half: need >= 2 draws");
  const std::size_t half = draws.size() / 2;
  SplitSample s;
  s.v_sample.assign(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(half));
  s.q_sample.assign(draws.begin() + static_cast<std::ptrdiff_t>(half), draws.end());
  return s;
}

void ControlModel::validate() const {
  if (!transition || !reward) throw ContractError("ControlModel: missing transition or reward");
  action_space.validate();
  if (!(state_lo < state_hi)) throw ContractError("ControlModel: state box empty");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractError("ControlModel: gamma in [0,1)");
  if (!(lipschitz_f > 0.0)) throw ContractError("ControlModel: lipschitz_f > 0");
  if (!(alpha_r > 0.0 && alpha_r <= 1.0)) throw ContractError("ControlModel: alpha_r in (0,1]");
  if (!reward_holder_L) throw ContractError("ControlModel: missing reward_holder_L");
}

double ControlModel::state_diam() const {
  return std::hypot(state_hi - state_lo, action_space.width());
}

double ControlModel::clamp_state(double x) const {
  const double slack = 1e-9 * std::max(1.0, state_hi - state_lo);
  if (x < state_lo - slack || x > state_hi + slack)
    throw ContractError("ControlModel: transition left the state box at x'=" + std::to_string(x));
  return std::min(state_hi, std::max(state_lo, x));
}

EmpiricalQ make_direct_evaluator(const ControlModel& model, std::vector<double> sample) {
  model.validate();
  if (sample.empty()) throw ContractError("make_direct_evaluator: empty sample");
  return [model, sample = std::move(sample)](double x, double a, const ValueGrid& v) {
    double acc = 0.0;
    for (double w : sample) {
      const double nx = model.clamp_state(model.transition(x, a, w));
      acc += model.reward(x, a, w) + model.gamma * v.interp(nx);
    }
    return acc / static_cast<double>(sample.size());
  };
}

double certify_alpha(double gamma, double lipschitz_f, double alpha_r, double limit) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractError("certify_alpha: gamma in [0,1)");
  if (!(gamma < limit))
    throw ContractError("certify_alpha: contraction precondition fails (gamma too large)");
  auto ok = [&](double a) { return gamma * std::pow(lipschitz_f, a) < limit; };
  if (ok(alpha_r)) return alpha_r;
  double lo = 0.0, hi = alpha_r;  // ok(0) holds since gamma < limit
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) lo = mid; else hi = mid;
  }
  if (!(lo > 0.0))
    throw ContractError("certify_alpha: no positive exponent satisfies the contraction margin");
  return lo;
}

double empirical_holder_modulus(const ControlModel& model, const std::vector<double>& sample,
                                double alpha) {
  model.validate();
  if (sample.empty()) throw ContractError("empirical_holder_modulus: empty sample");
  const double x0 = 0.5 * (model.state_lo + model.state_hi);
  const double a0 = 0.5 * (model.action_space.lo + model.action_space.hi);
  const double diam = model.state_diam();
  std::vector<double> Ls(sample.size()), Rs(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double L = model.reward_holder_L(sample[i]);
    Ls[i] = L;
    Rs[i] = std::abs(model.reward(x0, a0, sample[i])) + std::pow(diam, model.alpha_r) * L;
  }
  const double Ln = pairwise_sum(Ls) / static_cast<double>(sample.size());
  const double Rn = pairwise_sum(Rs) / static_cast<double>(sample.size());
  const double denom = 1.0 - model.gamma * std::pow(model.lipschitz_f, alpha);
  if (!(denom > 0.0))
    throw ContractError("empirical_holder_modulus: contraction precondition fails at alpha");
  return std::pow(Ln, alpha / model.alpha_r) * std::pow(2.0 * Rn, 1.0 - alpha / model.alpha_r) / denom;
}

BellmanResult solve_empirical_bellman(const ControlModel& model,
                                      const std::vector<double>& v_sample,
                                      const BellmanOptions& opt) {
  model.validate();
  if (v_sample.empty()) throw ContractError("solve_empirical_bellman: empty sample");
  if (opt.grid_nodes < 2) throw ContractError("solve_empirical_bellman: need >= 2 grid nodes");

  BellmanResult res;
  res.alpha_star = certify_alpha(model.gamma, model.lipschitz_f, model.alpha_r);
  res.alpha = res.alpha_star;
  res.ell_alpha = empirical_holder_modulus(model, v_sample, res.alpha);

  const int G = opt.grid_nodes;
  ValueGrid grid;
  grid.nodes = Eigen::ArrayXd::LinSpaced(G, model.state_lo, model.state_hi);
  grid.values = Eigen::ArrayXd::Zero(G);
  grid.alpha = res.alpha;
  grid.ell_alpha = res.ell_alpha;
  grid.tol = opt.tol;

  EmpiricalQ eval = opt.evaluator ? opt.evaluator : make_direct_evaluator(model, v_sample);
  const double threshold =
      model.gamma > 0.0 ? opt.tol * (1.0 - model.gamma) / (2.0 * model.gamma) : 0.0;
  MaximizeOptions mopt;
  mopt.coarse_n = opt.action_coarse_n;
  mopt.refine_tol = 1e-10;

  Eigen::ArrayXd next(G);
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    for (int j = 0; j < G; ++j) {
      const double xj = grid.nodes[j];
      next[j] = maximize_on_interval([&](double a) { return eval(xj, a, grid); },
                                     model.action_space.lo, model.action_space.hi, mopt)
                    .value;
    }
    const double change = (next - grid.values).abs().maxCoeff();
    grid.values = next;
    res.sweep_changes.push_back(change);
    res.sweeps = sweep + 1;
    if (change <= threshold) {
      res.grid = grid;
      return res;
    }
  }
  throw NumericError("solve_empirical_bellman: no convergence within max_sweeps",
                     res.sweep_changes.empty() ? -1.0 : res.sweep_changes.back());
}

double evaluate_qhat(const ControlModel& model, const std::vector<double>& q_sample,
                     const ValueGrid& vgrid, double x, double a) {
  model.validate();
  vgrid.validate();
  if (q_sample.empty()) throw ContractError("evaluate_qhat: empty sample");
  if (x < model.state_lo || x > model.state_hi)
    throw ContractError("evaluate_qhat: x outside the state box");
  if (a < model.action_space.lo || a > model.action_space.hi)
    throw ContractError("evaluate_qhat: a outside the action interval");
  double acc = 0.0;
  for (double w : q_sample) {
    const double nx = model.clamp_state(model.transition(x, a, w));
    acc += model.reward(x, a, w) + model.gamma * vgrid.interp(nx);
  }
  return acc / static_cast<double>(q_sample.size());
}

EnvelopePair measure_envelopes(const std::function<double(double, double)>& qhat,
                               const std::function<double(double, double)>& qstar_ref,
                               const ControlModel& model, double q_exponent,
                               std::size_t n_floor, const EnvelopeMeasureSpec& spec) {
  if (!qhat || !qstar_ref) throw ContractError("measure_envelopes: missing surface");
  if (spec.state_nodes < 2 || spec.action_nodes < 2)
    throw ContractError("measure_envelopes: lattice too small");
  const int nx = spec.state_nodes, na = spec.action_nodes;
  Eigen::ArrayXd xs = Eigen::ArrayXd::LinSpaced(nx, model.state_lo, model.state_hi);
  Eigen::ArrayXd as = Eigen::ArrayXd::LinSpaced(na, model.action_space.lo, model.action_space.hi);
  Eigen::ArrayXXd err(nx, na);
  double delta = 0.0;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < na; ++j) {
      const double e = qhat(xs[i], as[j]) - qstar_ref(xs[i], as[j]);
      err(i, j) = e;
      delta = std::max(delta, std::abs(e));
    }
  }
  // Centered-error Holder quotient over subsampled action pairs at shared x.
  double lambda = 0.0;
  Rng rng(spec.seed);
  const std::size_t total = static_cast<std::size_t>(nx) * na * (na - 1) / 2;
  const std::size_t n_pairs = std::min(spec.max_pairs, total);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const int i = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(nx)));
    const int j1 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(na)));
    int j2 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(na - 1)));
    if (j2 >= j1) ++j2;
    const double gap = std::abs(as[j1] - as[j2]);
    const double quot = std::abs(err(i, j1) - err(i, j2)) / std::pow(gap, q_exponent);
    lambda = std::max(lambda, quot);
  }
  const double floor = std::pow(static_cast<double>(std::max<std::size_t>(n_floor, 2)), -17.0);
  return {delta + floor, lambda + floor, q_exponent};
}

double sampled_holder_quotient(const ValueGrid& grid, double alpha, std::size_t n_pairs,
                               std::uint64_t seed) {
  grid.validate();
  Rng rng(seed);
  const Eigen::Index n = grid.nodes.size();
  double best = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const Eigen::Index i = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    Eigen::Index j = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    const double quot = std::abs(grid.values[i] - grid.values[j]) /
                        std::pow(std::abs(grid.nodes[i] - grid.nodes[j]), alpha);
    best = std::max(best, quot);
  }
  return best;
}

}  // namespace greedyreg::fitq
