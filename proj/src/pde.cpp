#include "perpetual/pde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace perpetual::pde {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct StartStencil {
  int first = 0;            // first node used
  int count = 1;            // 1 (on a node) or 4
  double w[4] = {1, 0, 0, 0};
};

StartStencil start_stencil(const GridSpec& g, double start) {
  StartStencil s;
  const double pos = (start - g.x_lo) / g.dx();
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-9) {
    s.first = static_cast<int>(nearest);
    return s;
  }
  int n0 = static_cast<int>(std::floor(pos)) - 1;
  n0 = std::clamp(n0, 0, g.N - 3);
  s.first = n0;
  s.count = 4;
  for (int i = 0; i < 4; ++i) {
    double w = 1.0;
    for (int j = 0; j < 4; ++j)
      if (j != i) w *= (pos - (n0 + j)) / double(i - j);
    s.w[i] = w;
  }
  return s;
}

}  // namespace

void GridSpec::validate() const {
  if (!(x_lo < x_hi)) throw ConfigError("grid requires x_lo < x_hi");
  if (!std::isfinite(x_lo) || !std::isfinite(x_hi)) throw ConfigError("grid bounds must be finite");
  if (N < 4) throw ConfigError("grid requires N >= 4");
  if (M < 1) throw ConfigError("grid requires M >= 1");
  if (!(T > 0.0)) throw ConfigError("grid requires T > 0");
  if (be_substeps < 1 || be_substeps > 1024) throw ConfigError("be_substeps must lie in [1, 1024]");
}

void Tridiagonal::factor() {
  const std::size_t n = size();
  cprime_.assign(n, 0.0);
  inv_pivot_.assign(n, 0.0);
  double piv = diag[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) piv = diag[i] - sub[i] * cprime_[i - 1];
    if (piv == 0.0 || !std::isfinite(piv))
      throw NumericalError("tridiagonal breakdown: zero pivot at node " + std::to_string(i));
    inv_pivot_[i] = 1.0 / piv;
    cprime_[i] = sup[i] * inv_pivot_[i];
  }
}

void Tridiagonal::solve(std::span<const double> rhs, std::span<double> x) const {
  const std::size_t n = size();
  x[0] = rhs[0] * inv_pivot_[0];
  for (std::size_t i = 1; i < n; ++i) x[i] = (rhs[i] - sub[i] * x[i - 1]) * inv_pivot_[i];
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= cprime_[i] * x[i + 1];
}

void Tridiagonal::multiply(std::span<const double> x, std::span<double> out) const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double v = diag[i] * x[i];
    if (i > 0) v += sub[i] * x[i - 1];
    if (i + 1 < n) v += sup[i] * x[i + 1];
    out[i] = v;
  }
}

double Tridiagonal::norm_inf() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m = std::max(m, std::abs(sub[i]) + std::abs(diag[i]) + std::abs(sup[i]));
  return m;
}

Stepper assemble(const Coefficients& coef, const GridSpec& grid, Boundaries bc, Stepper::Scheme scheme, double dt) {
  grid.validate();
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const int N = grid.N;
  const double dx = grid.dx();
  const bool cn = scheme == Stepper::Scheme::CrankNicolson;
  const double r1 = cn ? dt / (2.0 * dx) : dt / dx;
  const double r2 = cn ? dt / (2.0 * dx * dx) : dt / (dx * dx);

  Stepper s;
  s.scheme_ = scheme;
  s.dt_ = dt;
  const std::size_t n1 = static_cast<std::size_t>(N) + 1;
  s.lhs_ = Tridiagonal(n1);
  s.r_sub_.assign(n1, 0.0);
  s.r_diag_.assign(n1, 0.0);
  s.r_sup_.assign(n1, 0.0);
  s.A_.assign(n1, 0.0);
  s.B_.assign(n1, 0.0);
  s.C_.assign(n1, 0.0);
  s.D_.assign(n1, 0.0);

  auto sigma2 = [&](double x) {
    const double v = coef.sigma ? coef.sigma(x) : 1.0;
    return v * v;
  };
  for (int n = 1; n < N; ++n) {
    const double x = grid.x(n);
    double b, s2;
    try {
      b = coef.drift(x);
      s2 = sigma2(x);
    } catch (const std::exception& e) {
      throw NumericalError("node-shift required: coefficients not evaluable at node " + std::to_string(n) +
                           " (x = " + num(x) + "): " + e.what() + "; adjust the grid");
    }
    if (!std::isfinite(b) || !std::isfinite(s2))
      throw NumericalError("node-shift required: non-finite coefficient at node " + std::to_string(n) + " (x = " +
                           num(x) + "); adjust the grid");
    const std::size_t i = static_cast<std::size_t>(n);
    const double A = 0.5 * (b * r1 - s2 * r2);
    const double B = 1.0 + s2 * r2;
    const double C = 0.5 * (b * r1 + s2 * r2);
    const double D = 1.0 - s2 * r2;
    s.A_[i] = A;
    s.B_[i] = B;
    s.C_[i] = C;
    s.D_[i] = D;
    s.lhs_.sub[i] = A;
    s.lhs_.diag[i] = B;
    s.lhs_.sup[i] = -C;
    if (cn) {
      s.r_sub_[i] = -A;
      s.r_diag_[i] = D;
      s.r_sup_[i] = C;
    } else {
      s.r_diag_[i] = 1.0;
    }
  }
  auto boundary_row = [&](std::size_t i, std::size_t nb, BoundaryCondition c, double x) {
    switch (c) {
      case BoundaryCondition::DirichletOne:
      case BoundaryCondition::DirichletZero:
        s.lhs_.diag[i] = 1.0;
        s.r_diag_[i] = 0.0;
        break;
      case BoundaryCondition::NeumannZero: {
        // Ghost node mirrored across the boundary.
        const double q = sigma2(x) * r2;
        s.lhs_.diag[i] = 1.0 + q;
        (nb > i ? s.lhs_.sup[i] : s.lhs_.sub[i]) = -q;
        if (cn) {
          s.r_diag_[i] = 1.0 - q;
          (nb > i ? s.r_sup_[i] : s.r_sub_[i]) = q;
        } else {
          s.r_diag_[i] = 1.0;
        }
        break;
      }
    }
  };
  boundary_row(0, 1, bc.left, grid.x_lo);
  boundary_row(static_cast<std::size_t>(N), static_cast<std::size_t>(N) - 1, bc.right, grid.x_hi);
  s.lhs_.factor();
  return s;
}

Stepper assemble_cn(const Coefficients& coef, const GridSpec& grid, Boundaries bc) {
  return assemble(coef, grid, bc, Stepper::Scheme::CrankNicolson, grid.dt());
}

Stepper assemble_be(const Coefficients& coef, const GridSpec& grid, Boundaries bc, double substep_dt) {
  return assemble(coef, grid, bc, Stepper::Scheme::BackwardEuler, substep_dt);
}

Coefficients coefficients(const model::HittingProblem& problem) { return {problem.drift, nullptr}; }

Boundaries boundary_conditions(const model::HittingProblem& problem) {
  auto other = [&](model::Side side) {
    const model::BoundaryKind k = problem.kind(side);
    const double e = side == model::Side::Left ? problem.interval.lo : problem.interval.hi;
    if ((problem.reflect_at && *problem.reflect_at == e) || k == model::BoundaryKind::RegularReflecting ||
        k == model::BoundaryKind::EntranceNotExit)
      if (std::isfinite(e)) return BoundaryCondition::NeumannZero;
    return BoundaryCondition::DirichletZero;
  };
  Boundaries bc;
  if (problem.target_side() == model::Side::Right) {
    bc.right = BoundaryCondition::DirichletOne;
    bc.left = other(model::Side::Left);
  } else {
    bc.left = BoundaryCondition::DirichletOne;
    bc.right = other(model::Side::Right);
  }
  return bc;
}

Stepper assemble_cn(const model::HittingProblem& problem, const GridSpec& grid) {
  return assemble_cn(coefficients(problem), grid, boundary_conditions(problem));
}

Stepper assemble_be(const model::HittingProblem& problem, const GridSpec& grid, double substep_dt) {
  return assemble_be(coefficients(problem), grid, boundary_conditions(problem), substep_dt);
}

void Stepper::rhs(std::span<const double> u, std::span<double> out) const {
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) {
    double v = r_diag_[i] * u[i];
    if (i > 0) v += r_sub_[i] * u[i - 1];
    if (i + 1 < n) v += r_sup_[i] * u[i + 1];
    out[i] = v;
  }
}

void Stepper::step(std::span<const double> u_old, std::span<double> u_new, std::vector<double>& work) const {
  work.resize(u_old.size());
  rhs(u_old, work);
  // Dirichlet rows carry their value in the right-hand side.
  const std::size_t last = u_old.size() - 1;
  if (lhs_.sup[0] == 0.0 && lhs_.diag[0] == 1.0 && r_diag_[0] == 0.0) work[0] = u_old[0];
  if (lhs_.sub[last] == 0.0 && lhs_.diag[last] == 1.0 && r_diag_[last] == 0.0) work[last] = u_old[last];
  lhs_.solve(work, u_new);
}

GridSolution solve(const Coefficients& coef, Boundaries bc, const GridSpec& grid, double start,
                   const SolveOptions& opt) {
  grid.validate();
  if (!(start >= grid.x_lo && start <= grid.x_hi)) throw ConfigError("start outside the computational grid");
  const int N = grid.N, M = grid.M;
  const std::size_t n1 = static_cast<std::size_t>(N) + 1;

  GridSolution sol;
  sol.grid = grid;
  sol.start = start;
  const StartStencil st = start_stencil(grid, start);
  sol.start_index = static_cast<int>(std::lround((start - grid.x_lo) / grid.dx()));

  std::vector<double> u(n1, 0.0), next(n1, 0.0), work;
  if (bc.left == BoundaryCondition::DirichletOne) u[0] = 1.0;
  if (bc.right == BoundaryCondition::DirichletOne) u[n1 - 1] = 1.0;

  if (opt.keep_lattice) sol.u.reserve(n1 * (static_cast<std::size_t>(M) + 1));
  auto trace_value = [&](const std::vector<double>& row) {
    double v = 0.0;
    for (int i = 0; i < st.count; ++i) v += st.w[i] * row[static_cast<std::size_t>(st.first + i)];
    return v;
  };
  double lo = 0.0, hi = 0.0;
  auto record = [&](int m, const std::vector<double>& row) {
    for (std::size_t i = 0; i < n1; ++i) {
      const double v = row[i];
      if (!std::isfinite(v))
        throw NumericalError("non-finite value at time step " + std::to_string(m) + ", node " + std::to_string(i));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (opt.keep_lattice) sol.u.insert(sol.u.end(), row.begin(), row.end());
    sol.start_trace.push_back(trace_value(row));
  };
  record(0, u);

  const bool be_only = opt.backward_euler_only;
  const Stepper main = be_only ? assemble_be(coef, grid, bc, grid.dt()) : assemble_cn(coef, grid, bc);
  int m0 = 0;
  if (!be_only && opt.damp_first_step) {
    const Stepper sub = assemble_be(coef, grid, bc, grid.dt() / grid.be_substeps);
    for (int k = 0; k < grid.be_substeps; ++k) {
      sub.step(u, next, work);
      std::swap(u, next);
    }
    record(1, u);
    m0 = 1;
  }
  for (int m = m0; m < M; ++m) {
    main.step(u, next, work);
    std::swap(u, next);
    record(m + 1, u);
  }
  sol.final_row = u;
  sol.min_value = lo;
  sol.max_value = hi;
  sol.excursion_flag = lo < -kExcursionAllowance || hi > 1.0 + kExcursionAllowance;
  return sol;
}

GridSolution solve(const model::HittingProblem& problem, const GridSpec& grid, const SolveOptions& opt) {
  problem.validate();
  if (!std::isfinite(problem.target)) throw ConfigError("hitting problem has an infinite target");
  return solve(coefficients(problem), boundary_conditions(problem), grid, problem.start, opt);
}

std::vector<Sample> extract_cdf(const GridSolution& sol) {
  std::vector<Sample> out;
  out.reserve(sol.start_trace.size());
  for (std::size_t m = 0; m < sol.start_trace.size(); ++m)
    out.push_back({sol.t(static_cast<int>(m)), sol.start_trace[m]});
  return out;
}

std::vector<Sample> extract_density(const GridSolution& sol) {
  std::vector<Sample> out;
  const std::size_t M = sol.start_trace.size() - 1;
  if (M < 3) throw ConfigError("density extraction requires M >= 3");
  const double dt = sol.grid.dt();
  for (std::size_t m = 1; m < M; ++m)
    out.push_back({sol.t(static_cast<int>(m)), (sol.start_trace[m + 1] - sol.start_trace[m - 1]) / (2.0 * dt)});
  return out;
}

double cdf_at(const GridSolution& sol, double t) {
  const int M = sol.grid.M;
  if (!(t >= 0.0 && t <= sol.grid.T * (1.0 + 1e-12))) throw DomainError("cdf_at: t outside [0, T]");
  const double pos = t / sol.grid.dt();
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-9) return sol.start_trace[static_cast<std::size_t>(std::min<double>(nearest, M))];
  if (M < 3) {
    const int m = std::min(static_cast<int>(pos), M - 1);
    const double f = pos - m;
    return (1 - f) * sol.start_trace[static_cast<std::size_t>(m)] + f * sol.start_trace[static_cast<std::size_t>(m + 1)];
  }
  const int m0 = std::clamp(static_cast<int>(std::floor(pos)) - 1, 0, M - 3);
  double v = 0.0;
  for (int i = 0; i < 4; ++i) {
    double w = 1.0;
    for (int j = 0; j < 4; ++j)
      if (j != i) w *= (pos - (m0 + j)) / double(i - j);
    v += w * sol.start_trace[static_cast<std::size_t>(m0 + i)];
  }
  return v;
}

Truncation truncation(const model::HittingProblem& p, double T) {
  const double dir = p.target_side() == model::Side::Right ? -1.0 : 1.0;  // away from the target
  // Time-horizon cap: a unit-diffusion path rarely travels 7 sqrt(T) plus the outward drift times T.
  double outward = 0.0;
  double horizon = 7.0 * std::sqrt(T);
  for (int pass = 0; pass < 3; ++pass) {
    for (int i = 1; i <= 200; ++i) {
      const double z = p.start + dir * horizon * i / 200.0;
      try {
        outward = std::max(outward, dir * p.drift(z));
      } catch (const std::exception&) {
      }
    }
    horizon = 7.0 * std::sqrt(T) + outward * T;
  }
  // Mass rule on w(z) = exp(int 2G): stop once the exponential tail beyond z is below 1e-10 of the mass.
  double logw = 0.0, mass = 0.0, d = 0.0;
  double g_prev = p.drift(p.start);
  while (d < horizon) {
    const double h = 0.01 * (1.0 + d);
    const double z = p.start + dir * (d + h);
    double g;
    try {
      g = p.drift(z);
    } catch (const std::exception&) {
      break;
    }
    logw += dir * (g_prev + g) * h;  // int 2G dz, trapezoid
    g_prev = g;
    d += h;
    const double w = std::exp(logw);
    mass += w * h;
    const double inward = -dir * g;
    if (inward > 0.0 && w / (2.0 * inward) <= 1e-10 * mass) return {d, true};
  }
  return {horizon, false};
}

GridSpec make_grid(const model::HittingProblem& p, int N, int M, double T, int be_substeps, double cut_scale) {
  GridSpec g;
  g.N = N;
  g.M = M;
  g.T = T;
  g.be_substeps = be_substeps;
  double lo = p.interval.lo, hi = p.interval.hi;
  const bool right_target = p.target_side() == model::Side::Right;
  const double far = right_target ? lo : hi;
  if (!std::isfinite(far)) {
    const double dist = truncation(p, T).distance * cut_scale;
    const double target = right_target ? hi : lo;
    const double len0 = std::abs(target - p.start) + dist;
    // Put the start on a node by stretching the domain slightly.
    const double dstart = std::abs(target - p.start);
    const double k = std::max(1.0, std::round(N * dstart / len0));
    const double len = N * dstart / k;
    if (right_target)
      lo = hi - len;
    else
      hi = lo + len;
  }
  g.x_lo = lo;
  g.x_hi = hi;
  g.validate();
  return g;
}

namespace {

double sup_diff(const GridSolution& a, const GridSolution& b) {
  double d = 0.0;
  for (std::size_t m = 0; m < std::min(a.start_trace.size(), b.start_trace.size()); ++m)
    d = std::max(d, std::abs(a.start_trace[m] - b.start_trace[m]));
  return d;
}

}  // namespace

ConvergenceReport richardson(const model::HittingProblem& problem, const GridSpec& grid, double threshold) {
  SolveOptions opt;
  opt.keep_lattice = false;
  GridSpec half = grid, dbl = grid;
  half.N = std::max(4, grid.N / 2);
  dbl.N = grid.N * 2;
  const GridSolution s1 = solve(problem, half, opt);
  const GridSolution s2 = solve(problem, grid, opt);
  const GridSolution s4 = solve(problem, dbl, opt);
  const double d12 = sup_diff(s1, s2);
  const double d24 = sup_diff(s2, s4);
  ConvergenceReport r;
  r.observed_order = (d24 > 0.0 && d12 > 0.0) ? std::log2(d12 / d24) : 2.0;
  // err(N) ~ d24 / (1 - 2^-p); a slow observed order inflates the estimate.
  const double p = std::max(r.observed_order, 0.25);
  r.richardson_estimate = d24 / (1.0 - std::pow(2.0, -p));
  r.slow = r.richardson_estimate > threshold;
  return r;
}

double truncation_sensitivity(const model::HittingProblem& problem, const GridSpec& grid) {
  const double far = problem.target_side() == model::Side::Right ? problem.interval.lo : problem.interval.hi;
  if (std::isfinite(far)) return 0.0;
  SolveOptions opt;
  opt.keep_lattice = false;
  const GridSpec wide = make_grid(problem, grid.N, grid.M, grid.T, grid.be_substeps, 1.25);
  return sup_diff(solve(problem, grid, opt), solve(problem, wide, opt));
}

}  // namespace perpetual::pde
