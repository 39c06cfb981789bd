#include "greedyreg/ormodels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>

namespace greedyreg::orm {

namespace {

void check_nonnegative(const Arr& v, const char* what) {
  if ((v < 0.0).any()) throw ContractError(std::string(what) + ": negative entries");
}

void check_same_size(const Arr& a, const Arr& b, const char* what) {
  if (a.size() != b.size()) throw ContractError(std::string(what) + ": shape mismatch");
}

}  // namespace

Arr inventory_step(const Arr& x, const Arr& a, const Arr& d, const Arr& b) {
  check_same_size(x, a, "inventory_step");
  check_same_size(x, d, "inventory_step");
  check_same_size(x, b, "inventory_step");
  check_nonnegative(x, "inventory_step: x");
  check_nonnegative(a, "inventory_step: a");
  check_nonnegative(d, "inventory_step: d");
  check_nonnegative(b, "inventory_step: b");
  return ((x + a).min(b) - d).max(0.0);
}

Arr workload_step(const Arr& x, const Arr& xi, const Arr& a, const Arr& b) {
  check_same_size(x, xi, "workload_step");
  check_same_size(x, a, "workload_step");
  check_same_size(x, b, "workload_step");
  check_nonnegative(x, "workload_step: x");
  check_nonnegative(xi, "workload_step: xi");
  check_nonnegative(a, "workload_step: a");
  check_nonnegative(b, "workload_step: b");
  return (x + xi - a).max(0.0).min(b);
}

// ---------------------------------------------------------------------------
// Lost-sales desk model

fitq::ControlModel make_lost_sales_model(const LostSalesParams& params) {
  if (!(params.capacity > 0.0)) throw ContractError("lost_sales: capacity > 0");
  fitq::ControlModel m;
  m.name = "lost_sales_1item";
  const double b = params.capacity;
  m.transition = [b](double x, double a, double w) {
    return std::max(0.0, std::min(x + a, b) - w);
  };
  m.reward = [params, b](double x, double a, double w) {
    const double u = std::min(x + a, b);
    return params.price * std::min(u, w) - params.order_cost * a -
           params.holding_cost * std::max(0.0, u - w);
  };
  m.action_space = {0.0, b};
  m.state_lo = 0.0;
  m.state_hi = b;
  m.gamma = params.gamma;
  // |f(z,w)-f(z',w)| <= |x-x'| + |a-a'| <= sqrt(2) |z-z'|  (Euclidean).
  m.lipschitz_f = std::sqrt(2.0);
  m.alpha_r = 1.0;
  const double L = (params.price + params.holding_cost) * std::sqrt(2.0) + params.order_cost;
  m.reward_holder_L = [L](double) { return L; };
  return m;
}

std::vector<double> sample_uniform_demand(const LostSalesParams& params, std::size_t n,
                                          std::uint64_t seed) {
  if (n == 0) throw ContractError("sample_uniform_demand: n >= 1");
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& w : out) w = rng.uniform(0.0, params.capacity);
  return out;
}

// Sorted-sample state shared by all evaluator queries.
namespace {
struct SortedSample {
  std::vector<double> w;       // ascending
  std::vector<double> prefix;  // prefix[k] = sum of first k draws
};

SortedSample prepare(std::vector<double> sample) {
  std::sort(sample.begin(), sample.end());
  SortedSample s;
  s.prefix.resize(sample.size() + 1, 0.0);
  for (std::size_t i = 0; i < sample.size(); ++i) s.prefix[i + 1] = s.prefix[i] + sample[i];
  s.w = std::move(sample);
  return s;
}
}  // namespace

fitq::EmpiricalQ make_lost_sales_evaluator(const LostSalesParams& params,
                                           std::vector<double> sample) {
  if (sample.empty()) throw ContractError("make_lost_sales_evaluator: empty sample");
  auto ss = std::make_shared<SortedSample>(prepare(std::move(sample)));
  const LostSalesParams prm = params;
  return [ss, prm](double x, double a, const fitq::ValueGrid& v) {
    const double n = static_cast<double>(ss->w.size());
    const double u = std::min(x + a, prm.capacity);
    const auto first_ge = std::lower_bound(ss->w.begin(), ss->w.end(), u);
    const std::size_t cnt = static_cast<std::size_t>(first_ge - ss->w.begin());
    const double pc = ss->prefix[cnt];
    // E min(u, w) and E (u - w)^+ through the sorted prefix.
    const double sales = (pc + (n - static_cast<double>(cnt)) * u) / n;
    const double held = (static_cast<double>(cnt) * u - pc) / n;
    // E V((u - w)^+): draws at or above u land on the left grid edge; the
    // rest are aggregated cell by cell of the piecewise-linear grid.
    double vacc = (n - static_cast<double>(cnt)) * v.values[0];
    if (cnt > 0) {
      // Draws with w < u - nodes[k] land above node k; walking k downward from
      // the cell containing u sweeps the sorted draws from smallest w upward.
      const Eigen::Index K = v.cell(u);
      std::size_t lo = 0;
      for (Eigen::Index k = K; k >= 0 && lo < cnt; --k) {
        const double wmax = u - v.nodes[k];
        const std::size_t hi = static_cast<std::size_t>(
            std::lower_bound(ss->w.begin() + static_cast<std::ptrdiff_t>(lo),
                             ss->w.begin() + static_cast<std::ptrdiff_t>(cnt), wmax) -
            ss->w.begin());
        const std::size_t cntk = hi - lo;
        if (cntk > 0) {
          const double slope = (v.values[k + 1] - v.values[k]) / (v.nodes[k + 1] - v.nodes[k]);
          const double base = v.values[k] + slope * (u - v.nodes[k]);
          vacc += static_cast<double>(cntk) * base - slope * (ss->prefix[hi] - ss->prefix[lo]);
        }
        lo = hi;
      }
    }
    return prm.price * sales - prm.order_cost * a - prm.holding_cost * held +
           prm.gamma * vacc / n;
  };
}

fitq::EmpiricalQ make_lost_sales_uniform_evaluator(const LostSalesParams& params) {
  const LostSalesParams prm = params;
  return [prm](double x, double a, const fitq::ValueGrid& v) {
    const double b = prm.capacity;
    const double u = std::min(x + a, b);
    const double sales = u - u * u / (2.0 * b);
    const double held = u * u / (2.0 * b);
    // E V((u - w)^+) for w ~ Uniform[0, b]: mass (b - u)/b lands on the left
    // grid edge, the rest is the exact integral of the piecewise-linear grid
    // over [0, u] after substituting t = u - w.
    double vint = 0.0;
    if (u > v.nodes[0]) {
      const Eigen::Index K = v.cell(u);
      for (Eigen::Index k = 0; k < K; ++k)
        vint += (v.nodes[k + 1] - v.nodes[k]) * 0.5 * (v.values[k] + v.values[k + 1]);
      const double slope = (v.values[K + 1] - v.values[K]) / (v.nodes[K + 1] - v.nodes[K]);
      const double vu = v.values[K] + slope * (u - v.nodes[K]);
      vint += (u - v.nodes[K]) * 0.5 * (v.values[K] + vu);
    }
    const double vexp = v.values[0] * (b - u) / b + vint / b;
    return prm.price * sales - prm.order_cost * a - prm.holding_cost * held + prm.gamma * vexp;
  };
}

// ---------------------------------------------------------------------------
// DensityGrid

void DensityGrid::validate() const {
  if (dim != 1 && dim != 2) throw ContractError("DensityGrid: dim must be 1 or 2");
  if (axis0.size() < 2) throw ContractError("DensityGrid: axis0 too small");
  for (Eigen::Index i = 1; i < axis0.size(); ++i)
    if (!(axis0[i] > axis0[i - 1])) throw ContractError("DensityGrid: axis0 must increase");
  if (dim == 1) {
    if (values.size() != axis0.size()) throw ContractError("DensityGrid: values size mismatch");
  } else {
    if (axis1.size() < 2) throw ContractError("DensityGrid: axis1 too small");
    for (Eigen::Index i = 1; i < axis1.size(); ++i)
      if (!(axis1[i] > axis1[i - 1])) throw ContractError("DensityGrid: axis1 must increase");
    if (values.size() != axis0.size() * axis1.size())
      throw ContractError("DensityGrid: values size mismatch");
  }
  if ((values < 0.0).any()) throw ContractError("DensityGrid: negative density values");
}

namespace {
// Cell index and barycentric coordinate along one axis; -1 when outside.
inline Eigen::Index locate(const Arr& axis, double w, double& t) {
  if (w < axis[0] || w > axis[axis.size() - 1]) return -1;
  Eigen::Index i = std::upper_bound(axis.data(), axis.data() + axis.size(), w) - axis.data() - 1;
  i = std::min(std::max<Eigen::Index>(i, 0), axis.size() - 2);
  t = (w - axis[i]) / (axis[i + 1] - axis[i]);
  return i;
}
}  // namespace

double DensityGrid::eval1(double w) const {
  double t = 0.0;
  const Eigen::Index i = locate(axis0, w, t);
  if (i < 0) return 0.0;
  return values[i] + t * (values[i + 1] - values[i]);
}

double DensityGrid::eval2(double w0, double w1) const {
  double t0 = 0.0, t1 = 0.0;
  const Eigen::Index i = locate(axis0, w0, t0);
  if (i < 0) return 0.0;
  const Eigen::Index j = locate(axis1, w1, t1);
  if (j < 0) return 0.0;
  const Eigen::Index n1 = axis1.size();
  const double v00 = values[i * n1 + j], v01 = values[i * n1 + j + 1];
  const double v10 = values[(i + 1) * n1 + j], v11 = values[(i + 1) * n1 + j + 1];
  return (1 - t0) * ((1 - t1) * v00 + t1 * v01) + t0 * ((1 - t1) * v10 + t1 * v11);
}

double DensityGrid::mass() const {
  validate();
  if (dim == 1) {
    double m = 0.0;
    for (Eigen::Index i = 0; i + 1 < axis0.size(); ++i)
      m += 0.5 * (values[i] + values[i + 1]) * (axis0[i + 1] - axis0[i]);
    return m;
  }
  double m = 0.0;
  const Eigen::Index n1 = axis1.size();
  for (Eigen::Index i = 0; i + 1 < axis0.size(); ++i) {
    for (Eigen::Index j = 0; j + 1 < n1; ++j) {
      const double cell =
          0.25 * (values[i * n1 + j] + values[i * n1 + j + 1] + values[(i + 1) * n1 + j] +
                  values[(i + 1) * n1 + j + 1]);
      m += cell * (axis0[i + 1] - axis0[i]) * (axis1[j + 1] - axis1[j]);
    }
  }
  return m;
}

void DensityGrid::normalize() {
  const double m = mass();
  if (!(m > 0.0)) throw ContractError("DensityGrid::normalize: zero mass");
  values /= m;
}

void DensityGrid::save_csv(const std::string& path) const {
  validate();
  std::ofstream out(path);
  if (!out) throw ContractError("DensityGrid::save_csv: cannot open " + path);
  char buf[160];
  out << "# dim=" << dim << "\n";
  if (dim == 1) {
    out << "w,density\n";
    for (Eigen::Index i = 0; i < axis0.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", axis0[i], values[i]);
      out << buf;
    }
  } else {
    out << "w0,w1,density\n";
    const Eigen::Index n1 = axis1.size();
    for (Eigen::Index i = 0; i < axis0.size(); ++i)
      for (Eigen::Index j = 0; j < n1; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", axis0[i], axis1[j],
                      values[i * n1 + j]);
        out << buf;
      }
  }
}

DensityGrid DensityGrid::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("DensityGrid::load_csv: cannot open " + path);
  std::string line;
  int dim = 0;
  std::vector<double> c0, c1, vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::sscanf(line.c_str(), "# dim=%d", &dim);
      continue;
    }
    if (line[0] == 'w') continue;  // header row
    double a = 0, b = 0, c = 0;
    if (dim == 1) {
      if (std::sscanf(line.c_str(), "%lg,%lg", &a, &b) != 2)
        throw ContractError("DensityGrid::load_csv: malformed row: " + line);
      c0.push_back(a);
      vals.push_back(b);
    } else if (dim == 2) {
      if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &a, &b, &c) != 3)
        throw ContractError("DensityGrid::load_csv: malformed row: " + line);
      c0.push_back(a);
      c1.push_back(b);
      vals.push_back(c);
    } else {
      throw ContractError("DensityGrid::load_csv: missing or bad dim header");
    }
  }
  DensityGrid g;
  g.dim = dim;
  if (dim == 1) {
    g.axis0 = Eigen::Map<Arr>(c0.data(), static_cast<Eigen::Index>(c0.size()));
    g.values = Eigen::Map<Arr>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  } else {
    // Rows are produced in row-major order with axis values repeated.
    std::vector<double> a0(c0), a1(c1);
    std::sort(a0.begin(), a0.end());
    a0.erase(std::unique(a0.begin(), a0.end()), a0.end());
    std::sort(a1.begin(), a1.end());
    a1.erase(std::unique(a1.begin(), a1.end()), a1.end());
    g.axis0 = Eigen::Map<Arr>(a0.data(), static_cast<Eigen::Index>(a0.size()));
    g.axis1 = Eigen::Map<Arr>(a1.data(), static_cast<Eigen::Index>(a1.size()));
    if (static_cast<std::size_t>(g.axis0.size()) * static_cast<std::size_t>(g.axis1.size()) !=
        vals.size())
      throw ContractError("DensityGrid::load_csv: grid is not rectilinear");
    g.values = Eigen::Map<Arr>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }
  g.validate();
  return g;
}

DensityGrid uniform_density(double lo, double hi, int cells) {
  if (!(hi > lo) || cells < 1) throw ContractError("uniform_density: bad support");
  DensityGrid g;
  g.dim = 1;
  g.axis0 = Arr::LinSpaced(cells + 1, lo, hi);
  g.values = Arr::Constant(cells + 1, 1.0 / (hi - lo));
  return g;
}

DensityGrid gaussian_density(double mean, double sigma, double half_width, int cells) {
  if (!(sigma > 0.0) || !(half_width > 0.0) || cells < 8)
    throw ContractError("gaussian_density: bad parameters");
  DensityGrid g;
  g.dim = 1;
  g.axis0 = Arr::LinSpaced(cells + 1, mean - half_width, mean + half_width);
  g.values = (-0.5 * ((g.axis0 - mean) / sigma).square()).exp() /
             (sigma * std::sqrt(2.0 * M_PI));
  g.normalize();
  return g;
}

DensityGrid atom_spike_density(double lo, double hi, int cells, double atom_pos, double atom_mass) {
  if (!(atom_mass > 0.0 && atom_mass < 1.0)) throw ContractError("atom_spike_density: mass in (0,1)");
  if (!(atom_pos > lo && atom_pos < hi)) throw ContractError("atom_spike_density: atom outside support");
  DensityGrid g = uniform_density(lo, hi, cells);
  g.values *= (1.0 - atom_mass);
  const double step = (hi - lo) / cells;
  Eigen::Index k = static_cast<Eigen::Index>(std::lround((atom_pos - lo) / step));
  k = std::min(std::max<Eigen::Index>(k, 1), g.axis0.size() - 2);
  g.values[k] += atom_mass / step;  // triangular spike of integral atom_mass
  return g;
}

DensityGrid correlated_square_density(int cells_per_axis) {
  if (cells_per_axis < 8) throw ContractError("correlated_square_density: grid too coarse");
  DensityGrid g;
  g.dim = 2;
  g.axis0 = Arr::LinSpaced(cells_per_axis + 1, 0.0, 1.0);
  g.axis1 = Arr::LinSpaced(cells_per_axis + 1, 0.0, 1.0);
  const Eigen::Index n0 = g.axis0.size(), n1 = g.axis1.size();
  g.values = Arr::Zero(n0 * n1);
  for (Eigen::Index i = 0; i < n0; ++i) {
    const double u = g.axis0[i];
    for (Eigen::Index j = 0; j < n1; ++j) {
      const double v = g.axis1[j];
      if (v >= 0.5 * u && v <= 0.5 * u + 0.5) g.values[i * n1 + j] = 2.0;
    }
  }
  g.normalize();
  return g;
}

// ---------------------------------------------------------------------------
// Shift norms

namespace {

// Breakpoint-aligned axis mesh covering both p and p(. + h).
std::vector<double> shifted_mesh(const Arr& axis, double h) {
  std::vector<double> edges;
  edges.reserve(static_cast<std::size_t>(axis.size()) * 2);
  for (Eigen::Index i = 0; i < axis.size(); ++i) {
    edges.push_back(axis[i]);
    edges.push_back(axis[i] - h);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-15; }),
              edges.end());
  return edges;
}

double integrate_mesh_1d(const DensityGrid& grid, double h, int level) {
  const std::vector<double> edges = shifted_mesh(grid.axis0, h);
  const int sub = 1 << level;
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double w0 = edges[s], w1 = edges[s + 1], dw = (w1 - w0) / sub;
    double seg = 0.0;
    for (int i = 0; i < sub; ++i) {
      const double w = w0 + (i + 0.5) * dw;
      seg += std::abs(grid.eval1(w + h) - grid.eval1(w));
    }
    total += seg * dw;
  }
  return total;
}

double integrate_mesh_2d(const DensityGrid& grid, double h0, double h1, int level) {
  const std::vector<double> e0 = shifted_mesh(grid.axis0, h0);
  const std::vector<double> e1 = shifted_mesh(grid.axis1, h1);
  const int sub = 1 << level;
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < e0.size(); ++s) {
    const double dw0 = (e0[s + 1] - e0[s]) / sub;
    for (std::size_t t = 0; t + 1 < e1.size(); ++t) {
      const double dw1 = (e1[t + 1] - e1[t]) / sub;
      double cell = 0.0;
      for (int i = 0; i < sub; ++i) {
        const double w0 = e0[s] + (i + 0.5) * dw0;
        for (int j = 0; j < sub; ++j) {
          const double w1 = e1[t] + (j + 0.5) * dw1;
          cell += std::abs(grid.eval2(w0 + h0, w1 + h1) - grid.eval2(w0, w1));
        }
      }
      total += cell * dw0 * dw1;
    }
  }
  return total;
}

}  // namespace

double tv_shift_norm(const DensityGrid& grid, const Arr& h, double rel_tol) {
  grid.validate();
  if (h.size() != grid.dim) throw ContractError("tv_shift_norm: shift dimension mismatch");
  if (!(rel_tol > 0.0)) throw ContractError("tv_shift_norm: rel_tol > 0");
  const int max_level = grid.dim == 1 ? 12 : 5;
  double prev = grid.dim == 1 ? integrate_mesh_1d(grid, h[0], 0)
                              : integrate_mesh_2d(grid, h[0], h[1], 0);
  for (int level = 1; level <= max_level; ++level) {
    const double cur = grid.dim == 1 ? integrate_mesh_1d(grid, h[0], level)
                                     : integrate_mesh_2d(grid, h[0], h[1], level);
    if (std::abs(cur - prev) <= rel_tol * std::max(std::abs(cur), 1e-12)) return cur;
    prev = cur;
  }
  return prev;
}

TvFit fit_tv_exponent(const DensityGrid& grid, const std::vector<double>& h_magnitudes,
                      const Arr& direction, double rel_tol) {
  if (h_magnitudes.size() < 3) throw ContractError("fit_tv_exponent: need >= 3 magnitudes");
  const auto [mn, mx] = std::minmax_element(h_magnitudes.begin(), h_magnitudes.end());
  if (!(*mn > 0.0)) throw ContractError("fit_tv_exponent: magnitudes must be positive");
  if (*mx / *mn < 99.0)
    throw ContractError("fit_tv_exponent: magnitudes must span at least two decades");
  if (direction.size() != grid.dim) throw ContractError("fit_tv_exponent: direction dimension");
  const double norm = std::sqrt((direction * direction).sum());
  if (!(norm > 0.0)) throw ContractError("fit_tv_exponent: zero direction");

  TvFit out;
  std::vector<double> lx, ly;
  for (double mag : h_magnitudes) {
    const Arr h = direction * (mag / norm);
    const double tv = tv_shift_norm(grid, h, rel_tol);
    out.h.push_back(mag);
    out.tv.push_back(tv);
    if (tv > 0.0) {
      lx.push_back(std::log(mag));
      ly.push_back(std::log(tv));
    }
  }
  if (lx.size() < 3) throw ContractError("fit_tv_exponent: too few usable points");
  const OlsFit fit = ols_fit(lx, ly);
  out.q_bar = fit.slope;
  out.fit_stderr = fit.slope_stderr;
  double ell = 0.0;
  for (std::size_t i = 0; i < out.h.size(); ++i)
    ell = std::max(ell, out.tv[i] / std::pow(out.h[i], out.q_bar));
  out.ell = ell;
  out.regular = out.q_bar >= 0.25;  // atom-like fixtures fit a near-zero exponent
  return out;
}

TvAuditResult tv_action_regularity_audit(TransitionKind kind, const DensityGrid& noise,
                                         const Arr& state_hi, const Arr& action_hi,
                                         double ell, double q_bar, std::size_t n_draws,
                                         std::uint64_t seed, double simplex_budget) {
  noise.validate();
  if (state_hi.size() != noise.dim || action_hi.size() != noise.dim)
    throw ContractError("tv_action_regularity_audit: dimension mismatch");
  if (!(ell > 0.0)) throw ContractError("tv_action_regularity_audit: ell > 0");
  Rng rng(seed);
  const int k = noise.dim;
  TvAuditResult out;
  Arr x(k), a1(k), a2(k), s(k);
  auto draw_action = [&](Arr& a) {
    for (;;) {
      for (int i = 0; i < k; ++i) a[i] = rng.uniform(0.0, action_hi[i]);
      if (simplex_budget <= 0.0 || a.sum() <= simplex_budget) return;
    }
  };
  for (std::size_t t = 0; t < n_draws; ++t) {
    for (int i = 0; i < k; ++i) x[i] = rng.uniform(0.0, state_hi[i]);
    draw_action(a1);
    draw_action(a2);
    if (kind == TransitionKind::Inventory) {
      for (int i = 0; i < k; ++i)
        s[i] = std::min(x[i] + a1[i], state_hi[i]) - std::min(x[i] + a2[i], state_hi[i]);
    } else {
      s = a2 - a1;  // the pre-clip workload variable shifts by the action difference
    }
    const double snorm = std::sqrt((s * s).sum());
    const double anorm = std::sqrt(((a1 - a2) * (a1 - a2)).sum());
    if (anorm < 1e-12 || snorm < 1e-12) {
      ++out.skipped;
      continue;
    }
    const double tv_bound = 0.5 * tv_shift_norm(noise, s);
    const double ratio = tv_bound / (0.5 * ell * std::pow(anorm, q_bar));
    out.max_ratio = std::max(out.max_ratio, ratio);
    ++out.pairs;
  }
  return out;
}

}  // namespace greedyreg::orm
