#include "perpetual/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace perpetual::model {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double interior_reference(Interval iv) {
  const bool lo_fin = std::isfinite(iv.lo), hi_fin = std::isfinite(iv.hi);
  if (lo_fin && hi_fin) return 0.5 * (iv.lo + iv.hi);
  if (lo_fin) return iv.lo + 1.0;
  if (hi_fin) return iv.hi - 1.0;
  return 0.0;
}

std::vector<double> sample_points(Interval iv, int n = 64) {
  std::vector<double> xs;
  const bool lo_fin = std::isfinite(iv.lo), hi_fin = std::isfinite(iv.hi);
  if (lo_fin && hi_fin) {
    for (int i = 0; i < n; ++i) xs.push_back(iv.lo + (i + 0.5) / n * (iv.hi - iv.lo));
  } else if (lo_fin || hi_fin) {
    const double e = lo_fin ? iv.lo : iv.hi;
    const double dir = lo_fin ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) xs.push_back(e + dir * 0.01 * std::pow(2000.0, double(i) / (n - 1)));
  } else {
    for (int i = 0; i < n; ++i) xs.push_back(-10.0 + 20.0 * (i + 0.5) / n);
  }
  return xs;
}

Params merged(const Params& a, const Params& b) {
  Params p = a;
  for (const auto& [k, v] : b) p[k] = v;
  return p;
}

double adaptive_simpson_rec(const std::function<double(double)>& h, double a, double b, double fa, double fm, double fb,
                            double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = h(lm), frm = h(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
  return adaptive_simpson_rec(h, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
         adaptive_simpson_rec(h, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& h, double a, double b, double eps) {
  const double fa = h(a), fb = h(b), fm = h(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(h, a, b, fa, fm, fb, whole, eps, 48);
}

class ClosedFormTransform final : public Transform {
 public:
  ClosedFormTransform(Expr g, Params params, Interval domain)
      : g_(std::move(g)), params_(std::move(params)), domain_(domain) {
    const double c = interior_reference(domain_);
    const double d1 = g_.eval_dual2(c, params_).d1;
    if (d1 == 0.0) throw ConfigError("transform g has zero derivative at " + num(c));
    orientation_ = d1 > 0.0 ? Orientation::Increasing : Orientation::Decreasing;
    limit_lo_ = endpoint_limit(Side::Left);
    limit_hi_ = endpoint_limit(Side::Right);
  }

  Dual2 eval(double x) const override { return g_.eval_dual2(x, params_); }
  Orientation orientation() const override { return orientation_; }
  Interval domain() const override { return domain_; }
  double limit(Side s) const override { return s == Side::Left ? limit_lo_ : limit_hi_; }

  double inverse(double z) const override {
    const double sgn = orientation_ == Orientation::Increasing ? 1.0 : -1.0;
    const double zlo = std::min(limit_lo_, limit_hi_), zhi = std::max(limit_lo_, limit_hi_);
    if (z == limit_lo_) return domain_.lo;
    if (z == limit_hi_) return domain_.hi;
    if (!(z > zlo && z < zhi)) throw DomainError("g inverse: " + num(z) + " outside the image of g");
    auto phi = [&](double x) { return sgn * (g_.eval(x, params_) - z); };
    // Bracket: phi(lo) < 0 < phi(hi), expanding from an interior point.
    const double c = interior_reference(domain_);
    const double pc = phi(c);
    if (pc == 0.0) return c;
    const double dir = pc < 0.0 ? 1.0 : -1.0;
    const double e = dir > 0 ? domain_.hi : domain_.lo;
    double lo = c, hi = c, last = c;
    for (int k = 0;; ++k) {
      const double x = std::isfinite(e) ? e - (e - c) * std::ldexp(1.0, -(k + 1)) : c + dir * std::ldexp(1.0, k);
      if (k > 2000 || x == last) throw NumericalError("g inverse: bracketing failed for z = " + num(z));
      last = x;
      const double v = phi(x);
      if (dir > 0) {
        if (v >= 0.0) { hi = x; break; }
        lo = x;
      } else {
        if (v <= 0.0) { lo = x; break; }
        hi = x;
      }
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
      const Dual2 gv = g_.eval_dual2(x, params_);
      const double val = sgn * (gv.v - z);
      if (val == 0.0) return x;
      if (val < 0.0)
        lo = x;
      else
        hi = x;
      if (hi - lo <= 2.0 * kEps * std::max(std::abs(lo), std::abs(hi))) return 0.5 * (lo + hi);
      double next = x - (gv.v - z) / gv.d1;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - x) <= kEps * std::abs(x)) return next;
      x = next;
    }
    return x;
  }

 private:
  double endpoint_limit(Side s) const {
    const double e = s == Side::Left ? domain_.lo : domain_.hi;
    const double dir = s == Side::Left ? -1.0 : 1.0;
    if (std::isfinite(e)) {
      try {
        const double v = g_.eval(e, params_);
        if (std::isfinite(v)) return v;
      } catch (const Error&) {
      }
    }
    const double c = interior_reference(domain_);
    double prev = g_.eval(c, params_);
    double prev_diff = kInf;
    for (int k = 0; k < 1100; ++k) {
      const double x = std::isfinite(e) ? e - dir * std::abs(e - c) * std::ldexp(1.0, -k - 1) : c + dir * std::ldexp(1.0, k);
      if (std::isfinite(e) && x == e) break;
      double v;
      try {
        v = g_.eval(x, params_);
      } catch (const Error&) {
        break;
      }
      if (std::abs(v) > 1e300) return v > 0 ? kInf : -kInf;
      const double diff = std::abs(v - prev);
      if (diff <= 4.0 * kEps * (1.0 + std::abs(v))) return v;
      prev = v;
      prev_diff = diff;
    }
    if (prev_diff < 1e-8 * (1.0 + std::abs(prev))) return prev;
    const double trend = g_.eval_dual2(c, params_).d1 * dir;
    return trend > 0 ? kInf : -kInf;
  }

  Expr g_;
  Params params_;
  Interval domain_;
  Orientation orientation_ = Orientation::Increasing;
  double limit_lo_ = 0.0, limit_hi_ = 0.0;
};

Dual2 hermite_dual(double x0, double x1, double g0, double g1, double s0, double s1, double x) {
  const double d = x1 - x0;
  const double t = (x - x0) / d;
  const double t2 = t * t, t3 = t2 * t;
  const double v = (2 * t3 - 3 * t2 + 1) * g0 + (t3 - 2 * t2 + t) * d * s0 + (-2 * t3 + 3 * t2) * g1 + (t3 - t2) * d * s1;
  const double dv = ((6 * t2 - 6 * t) * g0 + (3 * t2 - 4 * t + 1) * d * s0 + (-6 * t2 + 6 * t) * g1 + (3 * t2 - 2 * t) * d * s1) / d;
  return {v, dv, 0.0};
}

}  // namespace

std::string_view to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::Natural: return "natural";
    case BoundaryKind::EntranceNotExit: return "entrance-not-exit";
    case BoundaryKind::ExitNotEntrance: return "exit-not-entrance";
    case BoundaryKind::RegularReflecting: return "regular-reflecting";
    case BoundaryKind::RegularKilling: return "regular-killing";
  }
  return "?";
}

std::string_view to_string(FellerReport::Verdict v) {
  switch (v) {
    case FellerReport::Verdict::Convergent: return "convergent";
    case FellerReport::Verdict::Divergent: return "divergent";
    case FellerReport::Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

void DiffusionSpec::validate() const {
  if (!(interval.lo < interval.hi)) throw ConfigError("diffusion interval must satisfy l < r");
  const bool at_left = start == interval.lo && left_boundary == BoundaryKind::EntranceNotExit;
  const bool at_right = start == interval.hi && right_boundary == BoundaryKind::EntranceNotExit;
  if (!interval.contains(start) && !at_left && !at_right)
    throw ConfigError("start " + num(start) + " is not inside the diffusion interval");
  for (double x : sample_points(interval)) {
    double s;
    try {
      s = sigma_at(x);
    } catch (const DomainError& e) {
      throw ConfigError("sigma not evaluable at " + num(x) + ": " + e.what());
    }
    if (!(s > 0.0)) throw ConfigError("sigma must be positive; sigma(" + num(x) + ") = " + num(s));
  }
}

void HittingProblem::validate() const {
  if (!(interval.lo < interval.hi)) throw ConfigError("hitting problem interval must satisfy lo < hi");
  if (target != interval.lo && target != interval.hi) throw ConfigError("target must be an endpoint of the interval");
  const Side ts = target_side();
  const double other = ts == Side::Right ? interval.lo : interval.hi;
  const BoundaryKind other_kind = kind(ts == Side::Right ? Side::Left : Side::Right);
  if (reflect_at && *reflect_at != other) throw ConfigError("reflect_at must be the non-target endpoint");
  const bool at_other = start == other && (reflect_at || other_kind == BoundaryKind::EntranceNotExit);
  if (!interval.contains(start) && !at_other) throw ConfigError("start must lie strictly between target and the other boundary");
  if (!drift) throw ConfigError("hitting problem has no drift");
}

TransformPtr closed_form_transform(Expr g, Params params, Interval domain) {
  return std::make_shared<ClosedFormTransform>(std::move(g), std::move(params), domain);
}

double TabulatedTransform::slope(double x) const {
  const Dual2 f = f_.eval_dual2(x, params_);
  const Dual2 s = sigma_.eval_dual2(x, params_);
  const double sg = orientation_ == Orientation::Increasing ? 1.0 : -1.0;
  return sg * std::sqrt(f.v) / s.v;
}

double TabulatedTransform::hermite(std::size_t seg, double x) const {
  const Node& a = nodes_[seg];
  const Node& b = nodes_[seg + 1];
  return hermite_dual(a.x, b.x, a.g, b.g, a.dg, b.dg, x).v;
}

Dual2 TabulatedTransform::eval(double x) const {
  if (!(x >= nodes_.front().x && x <= nodes_.back().x))
    throw DomainError("tabulated g: " + num(x) + " outside the tabulated range");
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x, [](double v, const Node& n) { return v < n.x; });
  std::size_t seg = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - nodes_.begin()) - 1));
  if (seg + 1 >= nodes_.size()) seg = nodes_.size() - 2;
  const double v = hermite(seg, x);
  const Dual2 f = f_.eval_dual2(x, params_);
  const Dual2 s = sigma_.eval_dual2(x, params_);
  if (!(f.v > 0.0)) throw DomainError("f must be positive at " + num(x));
  const Dual2 q = perpetual::sqrt(f) / s;
  const double sg = orientation_ == Orientation::Increasing ? 1.0 : -1.0;
  return {v, sg * q.v, sg * q.d1};
}

double TabulatedTransform::inverse(double z) const {
  const bool inc = orientation_ == Orientation::Increasing;
  const double g_first = nodes_.front().g, g_last = nodes_.back().g;
  const double zmin = std::min(g_first, g_last), zmax = std::max(g_first, g_last);
  if (!(z >= zmin && z <= zmax)) throw DomainError("tabulated g inverse: " + num(z) + " outside the tabulated range");
  // Segment with z between node values.
  std::size_t lo = 0, hi = nodes_.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    const bool right = inc ? nodes_[mid].g <= z : nodes_[mid].g >= z;
    (right ? lo : hi) = mid;
  }
  const Node& a = nodes_[lo];
  const Node& b = nodes_[hi];
  if (z == a.g) return a.x;
  if (z == b.g) return b.x;
  const double sg = inc ? 1.0 : -1.0;
  double xl = a.x, xh = b.x;
  double x = a.x + (z - a.g) / (b.g - a.g) * (b.x - a.x);
  for (int it = 0; it < 200; ++it) {
    const Dual2 h = hermite_dual(a.x, b.x, a.g, b.g, a.dg, b.dg, x);
    const double val = sg * (h.v - z);
    if (val == 0.0) return x;
    (val < 0.0 ? xl : xh) = x;
    if (xh - xl <= 2.0 * kEps * std::max(std::abs(xl), std::abs(xh))) break;
    double next = x - (h.v - z) / h.d1;
    if (!(next > xl && next < xh)) next = 0.5 * (xl + xh);
    if (std::abs(next - x) <= kEps * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

std::shared_ptr<const TabulatedTransform> derive_g(const Expr& f, const Expr& sigma, const Params& params,
                                                   Interval domain, double anchor_x, double anchor_g,
                                                   Orientation orientation, bool require_finite_limits) {
  if (!domain.contains(anchor_x)) throw ConfigError("derive_g: anchor outside the domain");
  std::shared_ptr<TabulatedTransform> t(new TabulatedTransform());
  t->f_ = f;
  t->sigma_ = sigma;
  t->params_ = params;
  t->domain_ = domain;
  t->orientation_ = orientation;
  const double sg = orientation == Orientation::Increasing ? 1.0 : -1.0;

  const std::function<double(double)> h = [&](double x) {
    const double fv = f.eval(x, params);
    const double sv = sigma.eval(x, params);
    if (!(fv > 0.0)) throw DomainError("f must be positive; f(" + num(x) + ") = " + num(fv));
    if (!(sv > 0.0)) throw DomainError("sigma must be positive; sigma(" + num(x) + ") = " + num(sv));
    return std::sqrt(fv) / sv;
  };
  constexpr double kTableTol = 1e-10;
  constexpr double kQuadTol = 1e-14;

  std::vector<TabulatedTransform::Node> nodes;
  nodes.push_back({anchor_x, anchor_g, sg * h(anchor_x)});

  // Hermite refinement of [xa, xb] given exact values and slopes at both ends.
  std::function<void(double, double, double, double, double, double, int)> refine =
      [&](double xa, double xb, double ga, double gb, double sa, double sb, int depth) {
        const double xm = 0.5 * (xa + xb);
        const double gm = ga + sg * adaptive_simpson(h, xa, xm, kQuadTol);
        const double sm = sg * h(xm);
        const double herm = hermite_dual(xa, xb, ga, gb, sa, sb, xm).v;
        if (depth < 40 && std::abs(herm - gm) > kTableTol) {
          refine(xa, xm, ga, gm, sa, sm, depth + 1);
          refine(xm, xb, gm, gb, sm, sb, depth + 1);
        } else {
          nodes.push_back({xm, gm, sm});
          nodes.push_back({xb, gb, sb});
        }
      };

  for (int dir : {1, -1}) {
    const double e = dir > 0 ? domain.hi : domain.lo;
    const bool finite = std::isfinite(e);
    double prev = anchor_x;
    double g_prev = anchor_g;
    double s_prev = sg * h(anchor_x);
    double total = 0.0;
    double last_inc = kInf, ratio = 1.0;
    int shrinking = 0;
    bool converged = false, diverged = false;
    for (int k = 1; k < 1100; ++k) {
      const double p = finite ? e - (e - anchor_x) * std::ldexp(1.0, -k) : anchor_x + dir * (std::ldexp(1.0, k) - 1.0);
      if (finite && std::abs(e - p) < 1e-13 * std::max(1.0, std::abs(e))) break;
      double inc, sp;
      try {
        inc = adaptive_simpson(h, std::min(prev, p), std::max(prev, p), kQuadTol * std::max(1.0, std::abs(total)));
        sp = sg * h(p);
      } catch (const DomainError&) {
        break;
      }
      if (!std::isfinite(inc) || std::abs(total + inc) > 1e15) {
        diverged = true;
        break;
      }
      const double gp = g_prev + sg * dir * inc;
      if (dir > 0)
        refine(prev, p, g_prev, gp, s_prev, sp, 0);
      else
        refine(p, prev, gp, g_prev, sp, s_prev, 0);
      total += inc;
      ratio = inc / last_inc;
      shrinking = ratio < 0.9 ? shrinking + 1 : 0;
      last_inc = inc;
      prev = p;
      g_prev = gp;
      s_prev = sp;
      if (k >= 3 && inc <= 1e-15 * (1.0 + std::abs(total))) {
        converged = true;
        break;
      }
    }
    double limit;
    if (converged) {
      limit = g_prev;
    } else if (!diverged && shrinking >= 3) {
      limit = g_prev + sg * dir * last_inc * ratio / (1.0 - ratio);
    } else {
      limit = sg * dir > 0 ? kInf : -kInf;
      diverged = true;
    }
    if (diverged && require_finite_limits)
      throw NonIntegrable(e, "derive_g: sqrt(f)/sigma is not integrable near " + num(e));
    if (dir > 0) {
      t->limit_hi_ = limit;
      t->diverges_hi_ = diverged;
    } else {
      t->limit_lo_ = limit;
      t->diverges_lo_ = diverged;
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  nodes.erase(std::unique(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.x == b.x; }),
              nodes.end());
  if (nodes.size() < 2) throw NumericalError("derive_g: could not tabulate g");
  t->nodes_ = std::move(nodes);
  return t;
}

namespace {

void check_positive_f(const FunctionalSpec& fs, const Params& p, Interval iv) {
  for (double x : sample_points(iv)) {
    double v;
    try {
      v = fs.f.eval(x, p);
    } catch (const DomainError& e) {
      throw ConfigError("f not evaluable at " + num(x) + ": " + e.what());
    }
    if (!(v > 0.0)) throw ConfigError("g is not strictly monotone: f(" + num(x) + ") = " + num(v) + " is not positive");
  }
}

TransformPtr make_transform(const DiffusionSpec& y, const FunctionalSpec& fs, const Params& p, Interval iv,
                            double anchor_x, Orientation orientation) {
  if (fs.g) {
    auto g = closed_form_transform(*fs.g, p, y.interval);
    for (double x : sample_points(iv)) {
      const double gp = g->eval(x).d1;
      const double s = y.sigma.eval(x, p);
      const double fv = fs.f.eval(x, p);
      const double lhs = gp * s * gp * s;
      if (std::abs(lhs - fv) > 1e-8 * std::abs(fv))
        throw ConfigError("supplied g violates (g' sigma)^2 = f at x = " + num(x));
    }
    return g;
  }
  return derive_g(fs.f, y.sigma, p, y.interval, anchor_x, 0.0, orientation);
}

std::function<double(double)> make_drift(const DiffusionSpec& y, const FunctionalSpec& fs, const Params& p,
                                         TransformPtr g) {
  return [y, fs, p, g](double z) {
    const double x = g->inverse(z);
    const Dual2 gd = g->eval(x);
    const double s = y.sigma.eval(x, p);
    const double b = y.drift.eval(x, p);
    const double f = fs.f.eval(x, p);
    return (0.5 * s * s * gd.d2 + b * gd.d1) / f;
  };
}

double image_of(const Transform& g, double x, Interval dom) {
  if (x == dom.lo) return g.limit(Side::Left);
  if (x == dom.hi) return g.limit(Side::Right);
  return g.eval(x).v;
}

}  // namespace

HittingProblem reduce(const DiffusionSpec& y, const FunctionalSpec& fs, Target target) {
  return reduce(y, fs, target, Orientation::Increasing);
}

HittingProblem reduce(const DiffusionSpec& y, const FunctionalSpec& fs, Target target, Orientation orientation) {
  y.validate();
  if (fs.one_sided) throw ConfigError("reduce: one-sided functional; use reduce_one_sided");
  const Params p = merged(y.params, fs.params);
  const double x0 = y.start;

  Interval sub = y.interval;
  Side yside = Side::Right;  // target side in Y coordinates
  switch (target.kind) {
    case Target::Kind::Level:
      if (!y.interval.contains(target.level)) throw ConfigError("target level outside the diffusion interval");
      if (target.level == x0) throw ConfigError("target equals the start");
      yside = target.level > x0 ? Side::Right : Side::Left;
      (yside == Side::Right ? sub.hi : sub.lo) = target.level;
      break;
    case Target::Kind::RightEndpoint:
      yside = Side::Right;
      break;
    case Target::Kind::LeftEndpoint:
      yside = Side::Left;
      break;
  }
  if ((yside == Side::Right && x0 == sub.hi) || (yside == Side::Left && x0 == sub.lo))
    throw ConfigError("target outside the reachable side of the start");
  check_positive_f(fs, p, sub);

  const double anchor = y.interval.contains(x0) ? x0 : interior_reference(y.interval);
  TransformPtr g = make_transform(y, fs, p, sub, anchor, orientation);
  const bool inc = g->orientation() == Orientation::Increasing;

  const double z_lo_end = image_of(*g, sub.lo, y.interval);
  const double z_hi_end = image_of(*g, sub.hi, y.interval);
  HittingProblem hp;
  hp.interval = inc ? Interval{z_lo_end, z_hi_end} : Interval{z_hi_end, z_lo_end};
  hp.start = image_of(*g, x0, y.interval);
  const Side zside = (yside == Side::Right) == inc ? Side::Right : Side::Left;
  hp.target = zside == Side::Right ? hp.interval.hi : hp.interval.lo;

  const Side y_other = yside == Side::Right ? Side::Left : Side::Right;
  const BoundaryKind other_kind = y.kind(y_other);
  const BoundaryKind declared_target = y.kind(yside);
  const BoundaryKind target_kind =
      (target.kind != Target::Kind::Level && declared_target == BoundaryKind::ExitNotEntrance) ? declared_target
                                                                                                 : BoundaryKind::RegularKilling;
  if (zside == Side::Right) {
    hp.right_kind = target_kind;
    hp.left_kind = other_kind;
  } else {
    hp.left_kind = target_kind;
    hp.right_kind = other_kind;
  }
  if (other_kind == BoundaryKind::RegularReflecting) hp.reflect_at = zside == Side::Right ? hp.interval.lo : hp.interval.hi;
  hp.drift = make_drift(y, fs, p, g);
  hp.transform = g;
  return hp;
}

HittingProblem reduce_one_sided(const DiffusionSpec& y, const FunctionalSpec& fs) {
  y.validate();
  if (!fs.one_sided) throw ConfigError("reduce_one_sided: functional is not one-sided");
  if (!y.interval.contains(0.0)) throw ConfigError("reduce_one_sided: 0 must lie inside the diffusion interval");
  const Params p = merged(y.params, fs.params);
  const Interval sub{0.0, y.interval.hi};
  check_positive_f(fs, p, sub);
  TransformPtr g = make_transform(y, fs, p, sub, 0.0, Orientation::Increasing);
  const bool inc = g->orientation() == Orientation::Increasing;
  const double z0 = g->eval(0.0).v;
  const double zr = g->limit(Side::Right);

  HittingProblem hp;
  hp.start = g->eval(std::max(y.start, 0.0)).v;
  if (inc) {
    hp.interval = {z0, zr};
    hp.target = zr;
    hp.left_kind = BoundaryKind::RegularReflecting;
    hp.right_kind = BoundaryKind::RegularKilling;
  } else {
    hp.interval = {zr, z0};
    hp.target = zr;
    hp.left_kind = BoundaryKind::RegularKilling;
    hp.right_kind = BoundaryKind::RegularReflecting;
  }
  hp.reflect_at = z0;
  hp.drift = make_drift(y, fs, p, g);
  hp.transform = g;
  return hp;
}

namespace {

using Verdict = FellerReport::Verdict;

Verdict judge(const std::vector<double>& P) {
  const std::size_t n = P.size();
  if (n == 0) return Verdict::Inconclusive;
  if (!std::isfinite(P.back())) return Verdict::Divergent;
  // Geometric growth of the partial integral over six consecutive doublings.
  if (n >= 7) {
    bool grow = true;
    for (std::size_t k = n - 7; k + 1 < n; ++k)
      if (!(P[k] > 0.0 && P[k + 1] >= 1.5 * P[k])) grow = false;
    if (grow) return Verdict::Divergent;
  }
  if (n < 5) return Verdict::Inconclusive;
  std::vector<double> inc;
  for (std::size_t k = 1; k < n; ++k) inc.push_back(P[k] - P[k - 1]);
  const std::size_t m = inc.size();
  if (inc[m - 1] <= 1e-15 * std::abs(P.back()) && inc[m - 2] <= 1e-13 * std::abs(P.back())) return Verdict::Convergent;
  double r[3];
  for (int j = 0; j < 3; ++j) {
    const double a = inc[m - 4 + j], b = inc[m - 3 + j];
    r[j] = a > 0.0 ? b / a : (b > 0.0 ? kInf : 0.0);
  }
  if (r[0] >= 1.0 && r[1] >= 1.0 && r[2] >= 1.0 && inc[m - 1] > 0.0) return Verdict::Divergent;
  // Increments over dyadic blocks decaying geometrically: the tail is summable.
  if (r[0] <= 0.9 && r[1] <= 0.9 && r[2] <= 0.9) return Verdict::Convergent;
  return Verdict::Inconclusive;
}

}  // namespace

FellerReport feller_tests(const std::function<double(double)>& drift, const std::function<double(double)>& sigma,
                          Interval iv, Side side) {
  FellerReport rep;
  const double c = interior_reference(iv);
  rep.reference = c;
  const double e = side == Side::Left ? iv.lo : iv.hi;
  const bool finite = std::isfinite(e);
  const double dirn = side == Side::Left ? -1.0 : 1.0;
  const double span = finite ? std::abs(c - e) : 1.0;
  const double resolution = finite ? std::max(64.0 * kEps * std::abs(e), 1e-280) : 0.0;
  const double u_max = finite ? std::log(span / resolution) : std::log(1e300);

  // x(u) and log|dx/du|.
  auto xmap = [&](double u, double& logj) {
    if (finite) {
      logj = std::log(span) - u;
      return e + (c - e) * std::exp(-u);
    }
    logj = u;
    return c + dirn * std::expm1(u);
  };
  const double sgn = finite ? (e > c ? 1.0 : -1.0) : dirn;  // sign of dx/du

  // State: L = log s, S, M, Sigma, N.
  struct State {
    double L, S, M, Sig, N;
  };
  auto deriv = [&](double u, const State& y) {
    double logj;
    const double x = xmap(u, logj);
    const double b = drift(x), s = sigma(x);
    if (!std::isfinite(b) || !(s > 0.0) || !std::isfinite(s)) throw DomainError("coefficients not evaluable");
    const double s2 = s * s;
    const double dL = -2.0 * b / s2 * sgn * std::exp(logj);
    const double st = std::exp(y.L + logj);
    const double mt = 2.0 * std::exp(-y.L + logj) / s2;
    auto prod = [](double a, double b) { return (a == 0.0 || b == 0.0) ? 0.0 : a * b; };
    return State{dL, st, mt, prod(st, y.M), prod(mt, y.S)};
  };

  State y{0.0, 0.0, 0.0, 0.0, 0.0};
  double u = 0.0;
  double U = 0.5;
  constexpr int kSteps = 256;
  bool stop = false;
  while (!stop) {
    const double U_end = std::min(U, u_max);
    const double h = (U_end - u) / kSteps;
    if (h <= 0.0) break;
    try {
      for (int i = 0; i < kSteps; ++i) {
        const State k1 = deriv(u, y);
        auto add = [&](const State& a, const State& k, double w) {
          return State{a.L + w * k.L, a.S + w * k.S, a.M + w * k.M, a.Sig + w * k.Sig, a.N + w * k.N};
        };
        const State k2 = deriv(u + 0.5 * h, add(y, k1, 0.5 * h));
        const State k3 = deriv(u + 0.5 * h, add(y, k2, 0.5 * h));
        const State k4 = deriv(u + h, add(y, k3, h));
        y.L += h / 6.0 * (k1.L + 2 * k2.L + 2 * k3.L + k4.L);
        y.S += h / 6.0 * (k1.S + 2 * k2.S + 2 * k3.S + k4.S);
        y.M += h / 6.0 * (k1.M + 2 * k2.M + 2 * k3.M + k4.M);
        y.Sig += h / 6.0 * (k1.Sig + 2 * k2.Sig + 2 * k3.Sig + k4.Sig);
        y.N += h / 6.0 * (k1.N + 2 * k2.N + 2 * k3.N + k4.N);
        u += h;
        if (std::isnan(y.Sig) || std::isnan(y.N)) throw DomainError("nan");
      }
    } catch (const Error&) {
      break;
    }
    rep.exit_partials.push_back(y.Sig);
    rep.entrance_partials.push_back(y.N);
    double logj;
    rep.closest_distance = std::abs(xmap(u, logj) - e);
    rep.exit_test = judge(rep.exit_partials);
    rep.entrance_test = judge(rep.entrance_partials);
    if (rep.exit_test != Verdict::Inconclusive && rep.entrance_test != Verdict::Inconclusive &&
        rep.exit_partials.size() >= 8)
      stop = true;
    if (!std::isfinite(y.Sig) && !std::isfinite(y.N)) stop = true;
    if (U >= u_max) stop = true;
    U *= 2.0;
  }
  return rep;
}

BoundaryKind classify_boundary(const DiffusionSpec& y, Side side) {
  auto drift = [&](double x) { return y.drift_at(x); };
  auto sigma = [&](double x) { return y.sigma_at(x); };
  const FellerReport rep = feller_tests(drift, sigma, y.interval, side);
  if (rep.exit_test == Verdict::Inconclusive || rep.entrance_test == Verdict::Inconclusive) {
    std::string msg = "boundary classification inconclusive at the ";
    msg += side == Side::Left ? "left" : "right";
    msg += " endpoint (exit test ";
    msg += to_string(rep.exit_test);
    msg += ", entrance test ";
    msg += to_string(rep.entrance_test);
    msg += ")";
    throw InconclusiveClassification(msg, rep);
  }
  const bool exit = rep.exit_test == Verdict::Convergent;
  const bool entrance = rep.entrance_test == Verdict::Convergent;
  if (exit && entrance) {
    const BoundaryKind declared = y.kind(side);
    const bool killing = declared == BoundaryKind::RegularKilling || declared == BoundaryKind::ExitNotEntrance;
    return killing ? BoundaryKind::RegularKilling : BoundaryKind::RegularReflecting;
  }
  if (exit) return BoundaryKind::ExitNotEntrance;
  if (entrance) return BoundaryKind::EntranceNotExit;
  return BoundaryKind::Natural;
}

}  // namespace perpetual::model
