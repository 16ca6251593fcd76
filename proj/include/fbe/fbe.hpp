#pragma once

#include "prox.hpp"
#include "smooth.hpp"

#include <cmath>
#include <utility>

namespace fbe {

/// Composite objective phi = f + g over a common dimension.
struct CompositeProblem {
  CompositeProblem(SmoothOracle f, ProxOracle g)
      : smooth(std::move(f)), nonsmooth(std::move(g)) {
    check_dim("CompositeProblem: f dim vs g dim", smooth.dim(),
              nonsmooth.dim());
  }

  index_t dim() const { return smooth.dim(); }

  Counters counter_snapshot() const {
    return smooth.counter_snapshot() + nonsmooth.counter_snapshot();
  }

  SmoothOracle smooth;
  ProxOracle nonsmooth;
};

/// Everything the envelope needs at one point and one gamma:
/// the forward-backward step t = prox_{gamma g}(x - gamma grad f(x)), the
/// fixed-point residual r = (x - t)/gamma, and the envelope value
///   env = f(x) - gamma <grad f(x), r> + gamma/2 ||r||^2 + g(t).
/// Built from exactly one fused f-evaluation and one prox call.
struct FbCache {
  Vec x;
  double gamma = 0;
  double f_x = 0;
  Vec grad_f_x;
  Vec t_x;          ///< forward-backward step T_gamma(x)
  double g_at_t = 0;
  Vec r_x;          ///< fixed-point residual (x - t_x)/gamma
  double r_norm = 0;
  double env = 0;   ///< envelope value at x
};

namespace detail {

inline FbCache fb_cache_from_parts(const CompositeProblem &p, double gamma,
                                   Vec x, double f_x, Vec grad) {
  if (!(gamma > 0))
    throw InvalidParams("fb_cache: gamma must be positive");
  if (!std::isfinite(f_x))
    throw NonFiniteError("fb_cache: f is non-finite at the query point", x);
  if (!grad.allFinite())
    throw NonFiniteError("fb_cache: gradient is non-finite at the query point",
                         x);
  FbCache c;
  c.gamma = gamma;
  c.f_x = f_x;
  ProxResult pr = p.nonsmooth.prox(gamma, x - gamma * grad);
  c.t_x = std::move(pr.point);
  c.g_at_t = pr.g_at_point;
  c.r_x = (x - c.t_x) / gamma;
  c.r_norm = c.r_x.norm();
  c.env = f_x - gamma * grad.dot(c.r_x) + 0.5 * gamma * c.r_norm * c.r_norm +
          c.g_at_t;
  c.x = std::move(x);
  c.grad_f_x = std::move(grad);
  return c;
}

} // namespace detail

inline FbCache fb_cache(const CompositeProblem &p, double gamma, const Vec &x) {
  check_dim("fb_cache", p.dim(), x.size());
  SmoothEval e = p.smooth.eval_fg(x);
  return detail::fb_cache_from_parts(p, gamma, x, e.value, std::move(e.grad));
}

/// Rebuilds a cache at the same point for a new gamma, or at a point whose
/// smooth evaluation is already known; costs one prox call and no f-evals.
inline FbCache fb_cache_from_eval(const CompositeProblem &p, double gamma,
                                  const Vec &x, const SmoothEval &e) {
  check_dim("fb_cache_from_eval", p.dim(), x.size());
  return detail::fb_cache_from_parts(p, gamma, x, e.value, e.grad);
}

/// Envelope gradient (I - gamma hess f(x)) r_x; one HVP, or one extra
/// gradient evaluation when f has no analytic HVP.
inline Vec fbe_gradient(const CompositeProblem &p, const FbCache &c) {
  HvpResult h = hvp_or_fd(p.smooth, c.x, c.r_x, &c.grad_f_x);
  return c.r_x - c.gamma * h.value;
}

/// Adaptive-step test at a trial point w: true when
///   phi(T_gamma(w)) + beta*gamma/2 ||r_w||^2 > env(w),
/// i.e. gamma is too long for the local curvature and must shrink.
/// phi_at_tw = f(T_gamma(w)) + g(T_gamma(w)); the g part is c.g_at_t.
/// The relative slack absorbs rounding noise: near a solution both sides
/// agree to machine precision and the exact comparison fires on noise,
/// collapsing gamma even though the needed inequality holds.
inline bool gamma_condition(double beta, const FbCache &c, double phi_at_tw) {
  double lhs = phi_at_tw + 0.5 * beta * c.gamma * c.r_norm * c.r_norm;
  return lhs > c.env + 1e-12 * (1.0 + std::abs(c.env));
}

} // namespace fbe
