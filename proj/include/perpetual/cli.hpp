#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "perpetual/catalog.hpp"
#include "perpetual/laplace.hpp"
#include "perpetual/mc.hpp"

namespace perpetual::cli {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutputDirEnv = "PERPETUAL_OUTPUT_DIR";

enum ExitCode { kOk = 0, kConfigError = 2, kNumericalFailure = 3, kUnavailable = 4 };

struct TGrid {
  double t_min = 0.05;
  double t_max = 10.0;
  int steps = 200;
  bool log = false;

  std::vector<double> points() const;
  void validate() const;
};

// "tmin:tmax:steps[:linear|log]".
TGrid parse_tgrid(const std::string& text);

struct CustomProblem {
  std::string sigma = "1";
  std::string drift = "0";
  std::string f = "1";
  std::string g;  // optional closed-form transform
  double lo = -model::kInf;
  double hi = model::kInf;
  double start = 0.0;
  bool one_sided = false;
  model::BoundaryKind left_kind = model::BoundaryKind::Natural;
  model::BoundaryKind right_kind = model::BoundaryKind::Natural;
  model::Params params;
};

struct RunConfig {
  std::string method;  // invert | pde | mc | compare
  std::optional<catalog::Id> example;
  model::Params params;  // catalog parameters given explicitly
  bool untransformed = false;
  std::optional<CustomProblem> custom;
  TGrid t;
  laplace::EulerParams euler;
  int N = 2000;
  int M = 2000;
  std::optional<double> T;
  int be_substeps = 64;
  bool richardson = false;
  mc::SimConfig sim;
  std::vector<std::string> methods;  // compare: subset of invert, pde, mc; empty = all available
  std::string output;                // CSV path; empty = default directory
  bool plot = true;
  std::vector<std::string> argv;  // echoed in the provenance header

  void validate() const;
};

// Parses flags (and an optional TOML config file; flags win). Throws ConfigError on bad input.
// Returns nullopt after printing help or version.
std::optional<RunConfig> parse_command_line(int argc, const char* const* argv, std::ostream& out);

// One CSV row; nullopt fields are left empty. Floats use 17 significant digits.
struct Row {
  double t = 0.0;
  std::optional<double> cdf, density, err_est;
};
std::string format_row(const Row& r);
std::string format_double(double v);

// Runs the configured method and writes its outputs; returns an ExitCode.
int run(const RunConfig& cfg, std::ostream& log);

// argv -> exit code, catching every error.
int main(int argc, const char* const* argv);

}  // namespace perpetual::cli
