#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "perpetual/model.hpp"

namespace perpetual::pde {

struct GridSpec {
  double x_lo = 0.0;
  double x_hi = 1.0;
  int N = 2000;  // space intervals
  double T = 1.0;
  int M = 2000;  // time steps
  int be_substeps = 64;

  void validate() const;
  double dx() const { return (x_hi - x_lo) / N; }
  double dt() const { return T / M; }
  double x(int n) const { return n == N ? x_hi : x_lo + n * dx(); }
};

enum class BoundaryCondition { DirichletOne, DirichletZero, NeumannZero };

struct Boundaries {
  BoundaryCondition left = BoundaryCondition::DirichletZero;
  BoundaryCondition right = BoundaryCondition::DirichletOne;
};

// u_t = 1/2 sigma^2 u_xx + b u_x; an empty sigma means sigma = 1.
struct Coefficients {
  std::function<double(double)> drift;
  std::function<double(double)> sigma;
};

// Tridiagonal matrix: sub[n] couples n to n-1, sup[n] couples n to n+1.
class Tridiagonal {
 public:
  explicit Tridiagonal(std::size_t n = 0) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}
  std::size_t size() const { return diag.size(); }

  // LU factorization (Thomas algorithm); throws NumericalError with the node index on a zero pivot.
  void factor();
  void solve(std::span<const double> rhs, std::span<double> x) const;
  void multiply(std::span<const double> x, std::span<double> out) const;
  double norm_inf() const;

  std::vector<double> sub, diag, sup;

 private:
  std::vector<double> cprime_, inv_pivot_;
};

// One time step: lhs * u_new = rhs_stencil(u_old).
class Stepper {
 public:
  enum class Scheme { CrankNicolson, BackwardEuler };

  Scheme scheme() const { return scheme_; }
  double dt() const { return dt_; }
  const Tridiagonal& lhs() const { return lhs_; }
  // Right-hand stencil (-A_n, D_n, C_n) for Crank-Nicolson; identity for backward Euler.
  const std::vector<double>& rhs_sub() const { return r_sub_; }
  const std::vector<double>& rhs_diag() const { return r_diag_; }
  const std::vector<double>& rhs_sup() const { return r_sup_; }
  // Interior coefficients A_n, B_n, C_n, D_n as defined by the scheme.
  double A(int n) const { return A_[static_cast<std::size_t>(n)]; }
  double B(int n) const { return B_[static_cast<std::size_t>(n)]; }
  double C(int n) const { return C_[static_cast<std::size_t>(n)]; }
  double D(int n) const { return D_[static_cast<std::size_t>(n)]; }

  void rhs(std::span<const double> u_old, std::span<double> out) const;
  void step(std::span<const double> u_old, std::span<double> u_new, std::vector<double>& work) const;

 private:
  friend Stepper assemble(const Coefficients&, const GridSpec&, Boundaries, Scheme, double);
  Scheme scheme_ = Scheme::CrankNicolson;
  double dt_ = 0.0;
  Tridiagonal lhs_;
  std::vector<double> r_sub_, r_diag_, r_sup_;
  std::vector<double> A_, B_, C_, D_;
};

Stepper assemble(const Coefficients& coef, const GridSpec& grid, Boundaries bc, Stepper::Scheme scheme, double dt);
Stepper assemble_cn(const Coefficients& coef, const GridSpec& grid, Boundaries bc);
Stepper assemble_be(const Coefficients& coef, const GridSpec& grid, Boundaries bc, double substep_dt);

Coefficients coefficients(const model::HittingProblem& problem);
// Target -> DirichletOne; reflecting or entrance -> NeumannZero; anything else -> DirichletZero.
Boundaries boundary_conditions(const model::HittingProblem& problem);
Stepper assemble_cn(const model::HittingProblem& problem, const GridSpec& grid);
Stepper assemble_be(const model::HittingProblem& problem, const GridSpec& grid, double substep_dt);

struct SolveOptions {
  bool keep_lattice = true;
  bool backward_euler_only = false;
  bool damp_first_step = true;  // replace the first C-N step by be_substeps backward-Euler steps
};

struct GridSolution {
  GridSpec grid;
  int start_index = 0;
  double start = 0.0;
  std::vector<double> u;            // (M+1) x (N+1), row-major; empty unless kept
  std::vector<double> start_trace;  // u(t_m, start), m = 0..M
  std::vector<double> final_row;
  double min_value = 0.0;
  double max_value = 0.0;
  bool excursion_flag = false;  // some value left [-0.02, 1.02]

  double at(int m, int n) const {
    return u[static_cast<std::size_t>(m) * static_cast<std::size_t>(grid.N + 1) + static_cast<std::size_t>(n)];
  }
  double t(int m) const { return m * grid.dt(); }
};

inline constexpr double kExcursionAllowance = 0.02;

GridSolution solve(const Coefficients& coef, Boundaries bc, const GridSpec& grid, double start,
                   const SolveOptions& opt = {});
GridSolution solve(const model::HittingProblem& problem, const GridSpec& grid, const SolveOptions& opt = {});

struct Sample {
  double t;
  double value;
};

std::vector<Sample> extract_cdf(const GridSolution& sol);
// Central differences at interior time levels.
std::vector<Sample> extract_density(const GridSolution& sol);
// Four-point Lagrange interpolation of the start trace in time; t in [0, T].
double cdf_at(const GridSolution& sol, double t);

// Far end of a computational domain for an infinite or natural non-target end.
struct Truncation {
  double distance;  // from the start
  bool mass_rule;   // false when the time-horizon cap was binding
};
Truncation truncation(const model::HittingProblem& problem, double T);

// Uniform grid for a hitting problem; a truncated end is nudged so the start falls on a node.
GridSpec make_grid(const model::HittingProblem& problem, int N, int M, double T, int be_substeps = 64,
                   double cut_scale = 1.0);

struct ConvergenceReport {
  double richardson_estimate = 0.0;  // estimated sup error of the N-grid CDF
  double observed_order = 0.0;
  bool slow = false;
};
inline constexpr double kRichardsonThreshold = 2.5e-4;

// Compares the CDF from N, 2N (and N/2 for the order estimate) space intervals with a fixed time grid.
ConvergenceReport richardson(const model::HittingProblem& problem, const GridSpec& grid,
                             double threshold = kRichardsonThreshold);

// Largest CDF change when the truncated end is moved 25% further out; 0 for untruncated domains.
double truncation_sensitivity(const model::HittingProblem& problem, const GridSpec& grid);

}  // namespace perpetual::pde
