#include "greedyreg/hard.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <nlohmann/json.hpp>

namespace greedyreg::hard {

namespace {

bool on_domain(double x) { return (x >= 0.0 && x <= 1.0) || x == kAbsorbingState; }

double envelope_floor(std::size_t n) {
  return std::pow(static_cast<double>(n), kEnvelopeFloorExponent);
}

}  // namespace

Family family_from_name(const std::string& name) {
  if (name == "plus") return Family::Plus;
  if (name == "minus") return Family::Minus;
  throw ContractError("unknown hard family: " + name);
}

void HardInstance::validate() const {
  params.validate();
  if (!(std::abs(theta) <= 1.0)) throw ContractError("HardInstance: |theta| <= 1");
  if (!(params.p > params.q)) throw ContractError("HardInstance: requires p > q");
}

double HardInstance::d_theta() const {
  const double t = std::abs(theta);
  if (family == Family::Plus) return std::pow(t / 2.0, 1.0 / params.m);
  return std::pow(t, 1.0 / (params.p - params.q));
}

double NoiseDataset::ybar() const {
  if (y.empty()) throw ContractError("NoiseDataset: empty");
  return pairwise_sum(y) / static_cast<double>(y.size());
}

double NoiseDataset::dbar() const {
  if (d.empty()) throw ContractError("NoiseDataset: empty");
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  // The mean of identical draws must be that draw exactly; letting the mean
  // round would open a spurious indicator sliver around the threshold.
  return std::clamp(pairwise_sum(d) / static_cast<double>(d.size()), *lo, *hi);
}

// ---------------------------------------------------------------------------
// Closed-form surfaces

double h_p(double a, double p) {
  if (!(p > 0.0)) throw ContractError("h_p: p > 0");
  if (!(a >= -1.0 && a <= 1.0)) throw ContractError("h_p: a in [-1,1]");
  const double up = std::pow(1.0 + a, p);
  const double dn = std::pow(1.0 - a, p);
  return up / (up + dn);
}

double q_plus(const HardInstance& inst, double x, double a) {
  if (!on_domain(x)) throw ContractError("q_plus: x outside [0,1] u {2}");
  if (x == kAbsorbingState) return 0.0;
  const double h = h_p(a, inst.params.p);
  const double base = std::pow(x, inst.params.m) * h;
  if (x <= inst.d_theta()) return base + inst.theta * (1.0 - h);
  return base;
}

double q_minus(const HardInstance& inst, double x, double a) {
  if (!on_domain(x)) throw ContractError("q_minus: x outside [0,1] u {2}");
  if (!(a >= -1.0 && a <= 1.0)) throw ContractError("q_minus: a in [-1,1]");
  if (x == kAbsorbingState) return 0.0;
  const double d = inst.d_theta();
  const double aa = std::abs(a);
  // |a|^q with the q = 0 convention sign(0) * ... = 0 handled by the sign factor.
  const double sgn = (a > 0.0) - (a < 0.0);
  const double aq = std::min(std::pow(aa, inst.params.q), std::pow(d, inst.params.q));
  return inst.theta * sgn * aq - std::pow(std::abs(aa - d), inst.params.p);
}

double q_value(const HardInstance& inst, double x, double a) {
  return inst.family == Family::Plus ? q_plus(inst, x, a) : q_minus(inst, x, a);
}

double OptimalActions::distance(double a) const {
  if (kind == Kind::FullInterval) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (double s : actions) best = std::min(best, std::abs(a - s));
  return best;
}

OptimalActions optimal_action_set(const HardInstance& inst, double x) {
  if (!on_domain(x)) throw ContractError("optimal_action_set: x outside domain");
  OptimalActions out;
  if (x == kAbsorbingState) {
    out.kind = OptimalActions::Kind::FullInterval;
    out.value = 0.0;
    return out;
  }
  if (inst.family == Family::Plus) {
    if (inst.theta > 0.0 && x <= inst.d_theta()) {
      out.actions = {-1.0};
      out.value = inst.theta;
    } else if (inst.theta == 0.0 && x == 0.0) {
      out.kind = OptimalActions::Kind::FullInterval;
      out.value = 0.0;
    } else {
      out.actions = {1.0};
      out.value = std::pow(x, inst.params.m);
    }
    return out;
  }
  const double d = inst.d_theta();
  const double v = std::pow(std::abs(inst.theta), inst.params.p / (inst.params.p - inst.params.q));
  if (inst.theta >= 0.0) {
    out.actions = {d};
  } else {
    out.actions = {-d};
  }
  out.value = v;
  return out;
}

double vstar(const HardInstance& inst, double x) { return optimal_action_set(inst, x).value; }

double growth_value(const HardInstance& inst, double x) {
  if (!on_domain(x)) throw ContractError("growth_value: x outside domain");
  if (inst.family == Family::Plus) {
    if (x == kAbsorbingState) return 2.0;
    return std::pow(2.0, -(inst.params.p + 1.0)) * std::pow(x, inst.params.m);
  }
  return growth_constant_minus(inst.params.p);
}

double margin_constant(const RateParams& params) {
  const double a = std::pow(2.0, (params.p + 1.0) / params.m - 1.0);
  const double b = std::pow(2.0, -1.0 / params.m);
  return std::max(a, b);
}

// Sup-Holder constant of h_p at exponent q: dense pair lattice, then local
// coordinate polish around the best pair.  Cached per (p, q, lattice_n).
double holder_constant_h(double p, double q, int lattice_n) {
  if (!(p > 0.0) || !(q >= 0.0 && q <= 1.0)) throw ContractError("holder_constant_h: bad exponents");
  static std::map<std::tuple<double, double, int>, double> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find({p, q, lattice_n});
    if (it != cache.end()) return it->second;
  }
  const int n = std::max(64, lattice_n);
  std::vector<double> hs(static_cast<std::size_t>(n));
  auto node = [&](int i) { return -1.0 + 2.0 * static_cast<double>(i) / (n - 1); };
  for (int i = 0; i < n; ++i) hs[static_cast<std::size_t>(i)] = h_p(node(i), p);
  double best = 0.0, ba = -1.0, bb = 1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double gap = node(j) - node(i);
      const double r = std::abs(hs[static_cast<std::size_t>(j)] - hs[static_cast<std::size_t>(i)]) /
                       std::pow(gap, q);
      if (r > best) {
        best = r;
        ba = node(i);
        bb = node(j);
      }
    }
  }
  // Local polish: alternate ternary passes in each endpoint around the best
  // lattice pair (window two lattice cells), keeping a < b.
  auto quot = [&](double a, double b) {
    if (!(b > a)) return 0.0;
    return std::abs(h_p(b, p) - h_p(a, p)) / std::pow(b - a, q);
  };
  const double w = 2.0 * 2.0 / (n - 1);
  for (int pass = 0; pass < 6; ++pass) {
    {
      double lo = std::max(-1.0, ba - w), hi = std::min(bb - 1e-14, ba + w);
      if (hi > lo) {
        auto r = maximize_on_interval([&](double a) { return quot(a, bb); }, lo, hi,
                                      {129, 1e-14, 200});
        if (r.value > best) { best = r.value; ba = r.arg; }
      }
    }
    {
      double lo = std::max(ba + 1e-14, bb - w), hi = std::min(1.0, bb + w);
      if (hi > lo) {
        auto r = maximize_on_interval([&](double b) { return quot(ba, b); }, lo, hi,
                                      {129, 1e-14, 200});
        if (r.value > best) { best = r.value; bb = r.arg; }
      }
    }
  }
  std::lock_guard<std::mutex> lk(mu);
  cache[{p, q, lattice_n}] = best;
  return best;
}

// inf over rho >= 0 of (1 + |1-rho|^p) / (1+rho)^p via golden-section on
// [0, 10]; the tail beyond 10 is bounded below by ((rho-1)/(rho+1))^p which
// is checked against the interior minimum.  Cached per p.
double growth_constant_minus(double p) {
  if (!(p > 0.0)) throw ContractError("growth_constant_minus: p > 0");
  static std::map<double, double> cache;
  static std::mutex mu;
  {
    std::lock_guard<std::mutex> lk(mu);
    auto it = cache.find(p);
    if (it != cache.end()) return it->second;
  }
  auto f = [p](double rho) {
    return (1.0 + std::pow(std::abs(1.0 - rho), p)) / std::pow(1.0 + rho, p);
  };
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 10.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - gr * (hi - lo); f1 = f(x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + gr * (hi - lo); f2 = f(x2);
    }
  }
  double c = std::min({f(0.5 * (lo + hi)), f1, f2, f(0.0), f(1.0)});
  const double tail_floor = std::pow(9.0 / 11.0, p);
  if (c > tail_floor) {
    // Interior search did not beat the certified tail floor; scan further out.
    for (double rho = 10.0; rho <= 1000.0; rho *= 1.5) c = std::min(c, f(rho));
  }
  std::lock_guard<std::mutex> lk(mu);
  cache[p] = c;
  return c;
}

// ---------------------------------------------------------------------------
// Data and estimators

void sample_dgp_into(const HardInstance& inst, std::size_t n, std::uint64_t seed, NoiseDataset& out) {
  inst.validate();
  if (n == 0) throw ContractError("sample_dgp: n >= 1");
  out.y.resize(n);
  out.d.resize(n);
  out.theta_truth = inst.theta;
  out.seed = seed;
  Rng rng(seed);
  const double prob_plus = 0.5 * (1.0 + inst.theta);
  const double d = inst.d_theta();
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = rng.sign_pm(prob_plus);
    out.d[i] = d;
  }
}

NoiseDataset sample_dgp(const HardInstance& inst, std::size_t n, std::uint64_t seed) {
  NoiseDataset out;
  sample_dgp_into(inst, n, seed, out);
  return out;
}

double PluginSurface::eval(double x, double a) const {
  if (!on_domain(x)) throw ContractError("PluginSurface: x outside domain");
  if (!(a >= -1.0 && a <= 1.0)) throw ContractError("PluginSurface: a in [-1,1]");
  if (x == kAbsorbingState) return 0.0;
  if (family == Family::Plus) {
    const double h = h_p(a, p);
    double v = std::pow(x, m) * h;
    if (x <= dbar) v += ybar * (1.0 - h);
    return v;
  }
  const double sgn = (a > 0.0) - (a < 0.0);
  const double aa = std::abs(a);
  const double aq = std::min(std::pow(aa, q), std::pow(dbar, q));
  return ybar * sgn * aq - std::pow(std::abs(aa - dbar), p);
}

QSurface PluginSurface::as_qsurface() const {
  PluginSurface s = *this;
  QSurface out;
  out.form = family == Family::Plus ? QForm::ClosedFormPlus : QForm::ClosedFormMinus;
  out.eval = [s](const Vec& x, double a) { return s.eval(x[0], a); };
  return out;
}

PluginSurface plugin_qhat(const HardInstance& shape, const NoiseDataset& data) {
  shape.validate();
  PluginSurface s;
  s.family = shape.family;
  s.p = shape.params.p;
  s.q = shape.params.q;
  s.m = shape.params.m;
  s.ybar = data.ybar();
  s.dbar = data.dbar();
  return s;
}

double GreedyRule::act(double x) const {
  if (!on_domain(x)) throw ContractError("GreedyRule: x outside domain");
  if (family == Family::Plus) {
    if (x == kAbsorbingState) return -1.0;  // constant surface, smallest action
    if (x <= dbar && ybar >= std::pow(x, m)) return -1.0;
    return 1.0;
  }
  return ybar > 0.0 ? dbar : -dbar;  // tie ybar == 0 resolves to the smaller action
}

std::vector<double> GreedyRule::state_breakpoints() const {
  if (family == Family::Minus) return {};
  const double xs = std::pow(std::clamp(ybar, 0.0, 1.0), 1.0 / m);
  return {dbar, xs};
}

Policy GreedyRule::as_policy() const {
  GreedyRule r = *this;
  Policy pi;
  pi.act = [r](const Vec& x) { return r.act(x[0]); };
  pi.state_breakpoints = state_breakpoints();
  return pi;
}

GreedyRule plugin_greedy(const PluginSurface& s) {
  return GreedyRule{s.family, s.ybar, s.dbar, s.m};
}

EnvelopePair envelopes_hard(const HardInstance& inst, const NoiseDataset& data, double q_exponent) {
  inst.validate();
  const double err = std::abs(data.ybar() - data.theta_truth);
  const double floor = envelope_floor(data.n());
  EnvelopePair out;
  out.q = q_exponent;
  out.delta = err + floor;
  if (inst.family == Family::Plus) {
    const double ell = holder_constant_h(inst.params.p, q_exponent);
    out.lambda = std::max(ell, 2.0) * err + floor;
  } else {
    out.lambda = 2.0 * err + floor;
  }
  return out;
}

double regret_exact_hard(const HardInstance& inst, const GreedyRule& rule, double abs_tol) {
  inst.validate();
  QuadratureSpec spec;
  spec.abs_tol = abs_tol;
  spec.breakpoints.push_back(inst.d_theta());
  for (double b : rule.state_breakpoints()) spec.breakpoints.push_back(b);
  auto gap = [&](double x) { return vstar(inst, x) - q_value(inst, x, rule.act(x)); };
  const QuadResult r = integrate_adaptive(gap, 0.0, 1.0, spec);
  if (r.err_estimate > abs_tol)
    throw NumericError("regret_exact_hard: quadrature did not converge", r.err_estimate);
  return r.value;
}

Simulator make_simulator(const HardInstance& inst) {
  inst.validate();
  Simulator sim;
  sim.r_max = 3.0;  // |r| <= 1 + theta bonus bounds, generous cap
  sim.sample_initial = [](Rng& rng) { return vec1(rng.uniform()); };
  HardInstance local = inst;
  sim.step = [local](const Vec& x, double a, Rng& rng) {
    double reward = 0.0;
    if (x[0] != kAbsorbingState) {
      // One noisy reward with conditional mean q_value(x, a): emit the mean
      // plus the centered +/-1 fluctuation scaled by the theta-coefficient.
      const double y = rng.sign_pm(0.5 * (1.0 + local.theta));
      const double fluct = y - local.theta;
      if (local.family == Family::Plus) {
        const double h = h_p(a, local.params.p);
        reward = q_plus(local, x[0], a);
        if (x[0] <= local.d_theta()) reward += fluct * (1.0 - h);
      } else {
        const double sgn = (a > 0.0) - (a < 0.0);
        const double d = local.d_theta();
        const double aq = std::min(std::pow(std::abs(a), local.params.q),
                                   std::pow(d, local.params.q));
        reward = q_minus(local, x[0], a) + fluct * sgn * aq;
      }
    }
    return std::make_pair(vec1(kAbsorbingState), reward);
  };
  sim.vstar_mu = [local]() {
    QuadratureSpec spec;
    spec.breakpoints.push_back(local.d_theta());
    return integrate_adaptive([&](double x) { return vstar(local, x); }, 0.0, 1.0, spec).value;
  };
  return sim;
}

// ---------------------------------------------------------------------------
// Two-point experiment

HardAlgorithm make_plugin_algorithm() {
  HardAlgorithm alg;
  alg.name = "greedy_plugin";
  alg.adapted = true;
  alg.build = [](const NoiseDataset& data, const HardInstance& shape) {
    return plugin_greedy(plugin_qhat(shape, data));
  };
  return alg;
}

HardAlgorithm make_oracle_algorithm() {
  HardAlgorithm alg;
  alg.name = "oracle_theta";
  alg.adapted = false;
  alg.build = [](const NoiseDataset& data, const HardInstance& shape) {
    // Peeks at theta_truth: the plug-in rule at the true parameter is an
    // exact optimal selector for both families.
    HardInstance truth = shape;
    truth.theta = data.theta_truth;
    return GreedyRule{truth.family, truth.theta, truth.d_theta(), truth.params.m};
  };
  return alg;
}

double two_point_rate_exponent(Family family, const RateParams& params) {
  if (family == Family::Plus) return (params.m + 1.0) / (2.0 * params.m);
  return params.p / (2.0 * (params.p - params.q));
}

double lower_bound_value(Family family, const RateParams& params, std::size_t n) {
  const double nn = static_cast<double>(n);
  if (family == Family::Plus) {
    return std::pow(2.0, -5.0 - 3.0 / params.m) * std::pow(nn, -(params.m + 1.0) / (2.0 * params.m));
  }
  const double e = params.p / (params.p - params.q);
  return std::pow(2.0, -2.0 - 2.0 * e) * std::pow(nn, -0.5 * e);
}

TwoPointResult two_point_experiment(Family family, const RateParams& params, std::size_t n,
                                    int replications, const HardAlgorithm& algorithm,
                                    std::uint64_t seed, int workers) {
  params.validate();
  if (replications < 2) throw ContractError("two_point_experiment: replications >= 2");
  if (n == 0) throw ContractError("two_point_experiment: n >= 1");
  const double xi = 1.0 / (4.0 * std::sqrt(static_cast<double>(n)));

  TwoPointResult out;
  out.algorithm_adapted = algorithm.adapted;
  out.lower_bound = lower_bound_value(family, params, n);

  MeanSe arms[2];
  for (int arm = 0; arm < 2; ++arm) {
    HardInstance inst;
    inst.family = family;
    inst.params = params;
    inst.theta = arm == 0 ? xi : -xi;
    inst.validate();
    std::vector<double> regrets(static_cast<std::size_t>(replications));
    parallel_for_indexed(regrets.size(), workers, [&](std::size_t rep) {
      NoiseDataset data;
      sample_dgp_into(inst, n, derive_seed(seed, static_cast<std::uint64_t>(arm) + 1, rep), data);
      const GreedyRule rule = algorithm.build(data, inst);
      regrets[rep] = regret_exact_hard(inst, rule);
    });
    arms[arm] = mean_and_se(regrets);
  }
  out.arm_plus = arms[0];
  out.arm_minus = arms[1];
  if (arms[0].mean >= arms[1].mean) {
    out.max_expected_regret = arms[0].mean;
    out.max_ci95 = ci95_halfwidth(arms[0].std_error);
  } else {
    out.max_expected_regret = arms[1].mean;
    out.max_ci95 = ci95_halfwidth(arms[1].std_error);
  }
  return out;
}

std::string instance_to_json(const HardInstance& inst) {
  nlohmann::json j;
  j["family"] = family_name(inst.family);
  j["theta"] = inst.theta;
  j["gamma"] = inst.params.gamma;
  j["p"] = inst.params.p;
  j["q"] = inst.params.q;
  j["m"] = inst.params.m;
  return j.dump();
}

HardInstance instance_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("instance_from_json: ") + e.what());
  }
  HardInstance inst;
  try {
    inst.family = family_from_name(j.at("family").get<std::string>());
    inst.theta = j.at("theta").get<double>();
    inst.params.gamma = j.at("gamma").get<double>();
    inst.params.p = j.at("p").get<double>();
    inst.params.q = j.at("q").get<double>();
    inst.params.m = j.at("m").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("instance_from_json: missing key: ") + e.what());
  }
  inst.validate();
  return inst;
}

}  // namespace greedyreg::hard
