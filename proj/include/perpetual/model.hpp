#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "perpetual/dual.hpp"
#include "perpetual/errors.hpp"
#include "perpetual/expr.hpp"

namespace perpetual::model {

using expr::Expr;
using expr::Params;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class BoundaryKind { Natural, EntranceNotExit, ExitNotEntrance, RegularReflecting, RegularKilling };
std::string_view to_string(BoundaryKind k);

enum class Side { Left, Right };
enum class Orientation { Increasing, Decreasing };

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool contains(double x) const { return lo < x && x < hi; }
};

// dY = sigma(Y) dB + b(Y) dt on (l, r).
struct DiffusionSpec {
  Interval interval;
  Expr sigma;
  Expr drift;
  Params params;
  BoundaryKind left_boundary = BoundaryKind::Natural;
  BoundaryKind right_boundary = BoundaryKind::Natural;
  double start = 0.0;

  double sigma_at(double x) const { return sigma.eval(x, params); }
  double drift_at(double x) const { return drift.eval(x, params); }
  BoundaryKind kind(Side s) const { return s == Side::Left ? left_boundary : right_boundary; }

  // sigma > 0 on a sample grid; start inside (l, r), or exactly at an entrance endpoint.
  void validate() const;
};

// A = int f(Y_s) ds, optionally only over {Y_s > 0}.
struct FunctionalSpec {
  Expr f;
  bool one_sided = false;
  std::optional<Expr> g;
  Params params;
};

// Strictly monotone C^2 map g with inverse.
class Transform {
 public:
  virtual ~Transform() = default;
  virtual Dual2 eval(double x) const = 0;
  virtual double inverse(double z) const = 0;
  virtual Orientation orientation() const = 0;
  virtual Interval domain() const = 0;
  // Limit of g at an endpoint of the domain; may be infinite.
  virtual double limit(Side s) const = 0;
};
using TransformPtr = std::shared_ptr<const Transform>;

TransformPtr closed_form_transform(Expr g, Params params, Interval domain);

// Hermite table of g = anchor_g +/- int sqrt(f)/sigma with exact g', g''.
class TabulatedTransform final : public Transform {
 public:
  struct Node {
    double x, g, dg;
  };

  Dual2 eval(double x) const override;
  double inverse(double z) const override;
  Orientation orientation() const override { return orientation_; }
  Interval domain() const override { return domain_; }
  double limit(Side s) const override { return s == Side::Left ? limit_lo_ : limit_hi_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  // Range of x covered by the table.
  Interval table_range() const { return {nodes_.front().x, nodes_.back().x}; }
  bool diverges(Side s) const { return s == Side::Left ? diverges_lo_ : diverges_hi_; }

 private:
  friend std::shared_ptr<const TabulatedTransform> derive_g(const Expr&, const Expr&, const Params&, Interval,
                                                            double, double, Orientation, bool);
  TabulatedTransform() = default;
  double slope(double x) const;
  double hermite(std::size_t seg, double x) const;

  Expr f_, sigma_;
  Params params_;
  Interval domain_;
  Orientation orientation_ = Orientation::Increasing;
  std::vector<Node> nodes_;
  double limit_lo_ = 0.0, limit_hi_ = 0.0;
  bool diverges_lo_ = false, diverges_hi_ = false;
};

class NonIntegrable : public NumericalError {
 public:
  NonIntegrable(double endpoint, const std::string& what) : NumericalError(what), endpoint_(endpoint) {}
  double endpoint() const noexcept { return endpoint_; }

 private:
  double endpoint_;
};

// Integrates sqrt(f)/sigma from anchor_x by adaptive Simpson and tabulates the result.
// With require_finite_limits, a divergent end throws NonIntegrable.
std::shared_ptr<const TabulatedTransform> derive_g(const Expr& f, const Expr& sigma, const Params& params,
                                                   Interval domain, double anchor_x, double anchor_g,
                                                   Orientation orientation, bool require_finite_limits = false);

// Unit-diffusion process Z with drift G, killed at target.
struct HittingProblem {
  Interval interval;
  std::function<double(double)> drift;
  double start = 0.0;
  double target = 0.0;
  std::optional<double> reflect_at;
  BoundaryKind left_kind = BoundaryKind::Natural;
  BoundaryKind right_kind = BoundaryKind::Natural;
  TransformPtr transform;  // g used by the reduction, if any
  std::string label;

  Side target_side() const { return target == interval.hi ? Side::Right : Side::Left; }
  BoundaryKind kind(Side s) const { return s == Side::Left ? left_kind : right_kind; }
  void validate() const;
};

struct Target {
  enum class Kind { Level, LeftEndpoint, RightEndpoint };
  Kind kind = Kind::RightEndpoint;
  double level = 0.0;

  static Target at(double y) { return {Kind::Level, y}; }
  static Target left() { return {Kind::LeftEndpoint, 0.0}; }
  static Target right() { return {Kind::RightEndpoint, 0.0}; }
};

// Time change A_t -> hitting time of g(target) by Z.
HittingProblem reduce(const DiffusionSpec& y, const FunctionalSpec& fs, Target target = Target::right());
HittingProblem reduce(const DiffusionSpec& y, const FunctionalSpec& fs, Target target, Orientation orientation);

// One-sided functional -> Z reflected at g(0), killed at g(r).
HittingProblem reduce_one_sided(const DiffusionSpec& y, const FunctionalSpec& fs);

// Feller integrals near an endpoint, accumulated along u with x(u) -> endpoint.
struct FellerReport {
  enum class Verdict { Convergent, Divergent, Inconclusive };
  Verdict exit_test = Verdict::Inconclusive;      // int s(y) M[y,c] dy
  Verdict entrance_test = Verdict::Inconclusive;  // int m(y) S[y,c] dy
  std::vector<double> exit_partials;
  std::vector<double> entrance_partials;
  double closest_distance = 0.0;
  double reference = 0.0;
};
std::string_view to_string(FellerReport::Verdict v);

class InconclusiveClassification : public NumericalError {
 public:
  InconclusiveClassification(const std::string& what, FellerReport report)
      : NumericalError(what), report_(std::move(report)) {}
  const FellerReport& report() const noexcept { return report_; }

 private:
  FellerReport report_;
};

FellerReport feller_tests(const std::function<double(double)>& drift, const std::function<double(double)>& sigma,
                          Interval interval, Side side);

// Regular endpoints resolve to killing when the declared kind is an exit/killing kind, reflecting otherwise.
BoundaryKind classify_boundary(const DiffusionSpec& y, Side side);

}  // namespace perpetual::model
