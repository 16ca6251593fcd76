#pragma once

#include "directions.hpp"
#include "fbe.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fbe {

enum class Variant {
  Adaptive,    ///< line-search method with backtracked gamma
  Fixed,       ///< fixed gamma in (0, (1-beta)/L_f], no gamma test
  ClassicalLs, ///< Wolfe line search on the envelope, next iterate is w
  Fbs,         ///< forward-backward splitting (d = 0, tau = 0, beta = 0)
  FastFbs,     ///< accelerated forward-backward with the same gamma test
};

enum class SolveStatus {
  Converged,
  MaxIters,
  DivergingObjective,
  LineSearchFailed ///< classical-ls only: no Armijo progress at accepted gamma
};

/// Optional stop rule phi(x^k) - phi_star <= epsilon.
struct ObjectiveStop {
  double phi_star = 0;
  double epsilon = 1e-6;
};

struct SolveParams {
  Variant variant = Variant::Adaptive;
  DirectionMode direction = DirectionMode::Lbfgs;
  int lbfgs_memory = 5;
  std::optional<double> gamma0; ///< required for Fixed; probed otherwise
  double beta = 0.05;  ///< gamma-test tightness; forced to 0 by fbs/fast-fbs
  double sigma = 0.5;  ///< gamma shrink factor
  int max_iters = 1000;
  double tol_abs = 1e-8; ///< stop when ||r|| <= tol_abs + tol_rel ||r_0||
  double tol_rel = 0.0;
  int ls_max_backtracks = 50;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int wolfe_max_iters = 25;
  double divergence_floor = -1e30;
  std::uint64_t seed = 0;      ///< drives the gamma0 curvature probe
  bool force_tau_zero = false; ///< pin tau = 0 (fbs-equivalence testing)
  bool keep_iterates = false;
  std::optional<ObjectiveStop> objective_stop;
};

/// One accepted iteration. `gamma` and the envelope values are at the
/// gamma accepted after any within-iteration shrinks (counted in
/// gamma_shrinks); `work` holds counter deltas charged to this iteration
/// (record 0 also carries run startup costs).
struct IterationRecord {
  int k = 0;
  double gamma = 0;
  double tau = 0; ///< step along d; momentum coefficient for fast-fbs
  double r_norm = 0;   ///< ||R_gamma(x^k)|| (at y^k for fast-fbs)
  double r_w_norm = 0; ///< ||R_gamma(w^k)||
  double phi_x = 0;    ///< f(x^k) + g(x^k), extended-real
  double env_x = 0;    ///< envelope at x^k (at y^k for fast-fbs)
  double env_w = 0;    ///< envelope at the line-search point w^k
  bool descent_replaced = false;
  int gamma_shrinks = 0;
  Counters work;
};

struct SolveTrace {
  std::vector<IterationRecord> records;
  Counters counters; ///< totals over the run (equal to the record sums)
  SolveStatus status = SolveStatus::MaxIters;
  std::string stop_reason; ///< residual | objective-gap | max-iters | ...
  double final_phi = 0;
  double final_r_norm = 0;
  double final_gamma = 0;
  int iterations = 0;
  std::vector<Vec> iterates; ///< x^0..x^K when keep_iterates (final included)
};

struct SolveResult {
  Vec x;
  SolveTrace trace;
};

/// Residual stop rule; r0_norm is the residual at x^0 under gamma_0.
inline bool check_termination(double r_norm, double r0_norm, double tol_abs,
                              double tol_rel) {
  return r_norm <= tol_abs + tol_rel * r0_norm;
}

/// Backtracking step search: tries tau = 1, 1/2, 1/4, ... (max_backtracks
/// halvings) and returns the first tau with env_at(tau) <= env_x, or 0 when
/// every trial increases the envelope.
inline double
backtrack_nonincrease(const std::function<double(double)> &env_at,
                      double env_x, int max_backtracks) {
  double tau = 1.0;
  for (int i = 0; i <= max_backtracks; ++i, tau *= 0.5)
    if (env_at(tau) <= env_x)
      return tau;
  return 0.0;
}

/// Weak Wolfe search by bracketing and bisection: finds tau with
///   phi(tau) <= phi(0) + c1 tau phi'(0)   and   phi'(tau) >= c2 phi'(0).
/// On budget exhaustion returns the last Armijo-feasible tau (0 when none)
/// and clears *ok. The initial slope must be negative.
inline double wolfe_search(const std::function<double(double)> &phi,
                           const std::function<double(double)> &slope,
                           double phi0, double slope0, double c1 = 1e-4,
                           double c2 = 0.9, int max_iters = 25,
                           bool *ok = nullptr) {
  if (!(slope0 < 0))
    throw InvalidParams("wolfe_search: initial slope must be negative");
  if (ok)
    *ok = true;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double t = 1.0;
  double last_armijo = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    if (phi(t) > phi0 + c1 * t * slope0) {
      hi = t;
      t = 0.5 * (lo + hi);
    } else {
      last_armijo = t;
      if (slope(t) >= c2 * slope0)
        return t;
      lo = t;
      t = std::isinf(hi) ? 2.0 * t : 0.5 * (lo + hi);
    }
  }
  if (ok)
    *ok = false;
  return last_armijo;
}

namespace detail {

inline void validate(const SolveParams &p, const CompositeProblem &prob) {
  if (p.beta < 0 || p.beta >= 1)
    throw InvalidParams("solve: beta must lie in [0, 1)");
  if (!(p.sigma > 0) || !(p.sigma < 1))
    throw InvalidParams("solve: sigma must lie in (0, 1)");
  if (p.max_iters < 0)
    throw InvalidParams("solve: max_iters must be nonnegative");
  if (p.tol_abs < 0 || p.tol_rel < 0)
    throw InvalidParams("solve: tolerances must be nonnegative");
  if (p.ls_max_backtracks < 0)
    throw InvalidParams("solve: ls_max_backtracks must be nonnegative");
  if (p.gamma0 && !(*p.gamma0 > 0))
    throw InvalidParams("solve: gamma0 must be positive");
  if (p.variant == Variant::Fixed) {
    if (!p.gamma0)
      throw InvalidParams("solve: fixed variant requires gamma0");
    auto L = prob.smooth.lipschitz();
    if (!L)
      throw InvalidParams("solve: fixed variant requires a known L_f");
    // Closed upper end: the gamma test provably never fires on
    // (0, (1-beta)/L_f], and the standard protocol sits exactly there.
    if (*p.gamma0 > (1.0 - p.beta) / *L * (1.0 + 1e-12))
      throw InvalidParams("solve: fixed variant needs gamma0 <= (1-beta)/L_f");
  }
}

/// Startup: resolve gamma0 (probing curvature near x0 when L_f is unknown)
/// and build the first cache. Costs one fused eval + one prox, plus one
/// extra fused eval when the probe runs.
inline FbCache startup_cache(const CompositeProblem &prob,
                             const SolveParams &p, const Vec &x0,
                             double beta_eff, double &gamma0_out) {
  SmoothEval e0 = prob.smooth.eval_fg(x0);
  if (p.gamma0) {
    gamma0_out = *p.gamma0;
  } else if (auto L = prob.smooth.lipschitz()) {
    gamma0_out = (1.0 - beta_eff) / *L;
  } else {
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec r(x0.size());
    for (index_t i = 0; i < r.size(); ++i)
      r[i] = gauss(rng);
    double rn = r.norm();
    if (rn == 0.0)
      r[0] = rn = 1.0;
    Vec delta = (1e-2 * (1.0 + x0.norm()) / rn) * r;
    SmoothEval ep = prob.smooth.eval_fg(x0 + delta);
    double Lhat = (ep.grad - e0.grad).norm() / delta.norm();
    gamma0_out = Lhat > 0 ? (1.0 - beta_eff) / Lhat : 1.0;
  }
  return fb_cache_from_eval(prob, gamma0_out, x0, e0);
}

inline SolveResult solve_fast_fbs(const CompositeProblem &prob,
                                  const SolveParams &p, const Vec &x0);

} // namespace detail

/// Runs the configured variant from x0. Iterates are produced by the
/// forward-backward step (or the line-search point for classical-ls); the
/// trace carries one record per accepted iteration plus run totals.
inline SolveResult solve(const CompositeProblem &prob, const SolveParams &p,
                         const Vec &x0) {
  check_dim("solve: x0", prob.dim(), x0.size());
  detail::validate(p, prob);
  if (p.variant == Variant::FastFbs)
    return detail::solve_fast_fbs(prob, p, x0);

  prob.nonsmooth.reset_state();
  const Counters base = prob.counter_snapshot();
  Counters marker = base; // work since `marker` is charged to the next record

  const bool plain_fb = p.variant == Variant::Fbs;
  const double beta_eff = plain_fb ? 0.0 : p.beta;
  const bool test_gamma = p.variant != Variant::Fixed;
  const DirectionMode dir_mode =
      plain_fb ? DirectionMode::Steepest : p.direction;
  const bool track_pairs = !plain_fb && dir_mode != DirectionMode::Steepest;

  SolveResult out;
  SolveTrace &tr = out.trace;

  double gamma = 0;
  FbCache cache = detail::startup_cache(prob, p, x0, beta_eff, gamma);
  double g_at_x = prob.nonsmooth.eval(x0);
  const double r0_norm = cache.r_norm;
  QnState qn(dir_mode, prob.dim(), p.lbfgs_memory);

  bool stopped = false;
  for (int k = 0; k < p.max_iters && !stopped; ++k) {
    const double phi_x = cache.f_x + g_at_x;
    if (p.keep_iterates)
      tr.iterates.push_back(cache.x);
    if (p.objective_stop &&
        phi_x - p.objective_stop->phi_star <= p.objective_stop->epsilon) {
      tr.status = SolveStatus::Converged;
      tr.stop_reason = "objective-gap";
      stopped = true;
      break;
    }
    if (check_termination(cache.r_norm, r0_norm, p.tol_abs, p.tol_rel)) {
      tr.status = SolveStatus::Converged;
      tr.stop_reason = "residual";
      stopped = true;
      break;
    }
    if (phi_x < p.divergence_floor) {
      tr.status = SolveStatus::DivergingObjective;
      tr.stop_reason = "objective-floor";
      stopped = true;
      break;
    }

    int shrinks = 0;
    bool ls_failed = false;
    try {
      for (;;) { // re-entered after each gamma shrink
        bool replaced = false;
        double tau = 0;
        FbCache cache_w = cache;
        Vec grad_x, grad_w;
        bool have_grad_w = false;
        Vec d;

        if (!plain_fb) {
          grad_x = fbe_gradient(prob, cache);
          d = qn.direction(grad_x);
          if (!descent_check(d, grad_x)) {
            d = -grad_x;
            replaced = true;
          }
          if (!p.force_tau_zero && d.dot(grad_x) < 0) {
            // Trial caches are remembered so the accepted one is reused.
            std::map<double, FbCache> trials;
            std::map<double, Vec> trial_grads;
            auto env_at = [&](double t) {
              if (t == 0.0)
                return cache.env;
              try {
                auto it =
                    trials.emplace(t, fb_cache(prob, gamma, cache.x + t * d))
                        .first;
                return it->second.env;
              } catch (const NonFiniteError &) {
                return kInf;
              }
            };
            if (p.variant == Variant::ClassicalLs) {
              auto slope_at = [&](double t) {
                auto it = trials.find(t);
                Vec g = fbe_gradient(prob, it->second);
                double s = g.dot(d);
                trial_grads[t] = std::move(g);
                return s;
              };
              double slope0 = d.dot(grad_x);
              tau = wolfe_search(env_at, slope_at, cache.env, slope0,
                                 p.wolfe_c1, p.wolfe_c2, p.wolfe_max_iters);
            } else {
              tau = backtrack_nonincrease(env_at, cache.env,
                                          p.ls_max_backtracks);
            }
            if (tau > 0) {
              cache_w = trials.at(tau);
              if (auto it = trial_grads.find(tau); it != trial_grads.end()) {
                grad_w = it->second;
                have_grad_w = true;
              }
            }
          }
        }

        SmoothEval eval_tw = prob.smooth.eval_fg(cache_w.t_x);
        double phi_tw = eval_tw.value + cache_w.g_at_t;
        if (test_gamma && gamma_condition(beta_eff, cache_w, phi_tw)) {
          gamma *= p.sigma;
          if (gamma < 1e-280)
            throw InvalidParams(
                "solve: gamma underflow; f may not be L-smooth");
          ++shrinks;
          qn.reset();
          cache = fb_cache_from_eval(prob, gamma, cache.x,
                                     {cache.f_x, cache.grad_f_x});
          continue;
        }

        // Classical iterates move only along d; tau = 0 with gamma already
        // accepted means the Wolfe search found no progress at all, and
        // repeating the iteration would loop forever on the same point.
        if (p.variant == Variant::ClassicalLs && tau == 0.0 &&
            !p.force_tau_zero) {
          ls_failed = true;
          break;
        }

        if (track_pairs && tau > 0) {
          if (!have_grad_w)
            grad_w = fbe_gradient(prob, cache_w);
          qn.observe(cache_w.x - cache.x, grad_w - grad_x);
        }

        IterationRecord rec;
        rec.k = k;
        rec.gamma = gamma;
        rec.tau = tau;
        rec.r_norm = cache.r_norm;
        rec.r_w_norm = cache_w.r_norm;
        rec.phi_x = phi_x;
        rec.env_x = cache.env;
        rec.env_w = cache_w.env;
        rec.descent_replaced = replaced;
        rec.gamma_shrinks = shrinks;

        if (p.variant == Variant::ClassicalLs) {
          g_at_x = prob.nonsmooth.eval(cache_w.x);
          cache = std::move(cache_w);
        } else {
          FbCache next = fb_cache_from_eval(prob, gamma, cache_w.t_x, eval_tw);
          g_at_x = cache_w.g_at_t;
          cache = std::move(next);
        }

        Counters now = prob.counter_snapshot();
        rec.work = now - marker;
        marker = now;
        tr.records.push_back(std::move(rec));
        break;
      }
    } catch (const NonFiniteError &) {
      tr.status = SolveStatus::DivergingObjective;
      tr.stop_reason = "non-finite objective";
      stopped = true;
      break;
    }
    if (ls_failed) {
      tr.status = SolveStatus::LineSearchFailed;
      tr.stop_reason = "line-search failure";
      stopped = true;
      break;
    }
  }

  if (!stopped) {
    tr.status = SolveStatus::MaxIters;
    tr.stop_reason = "max-iters";
    // Stops inside an iteration leave cache.x equal to the head iterate
    // already pushed; only the max-iters exit has an unrecorded final point.
    if (p.keep_iterates)
      tr.iterates.push_back(cache.x);
  }

  tr.counters = prob.counter_snapshot() - base;
  tr.iterations = static_cast<int>(tr.records.size());
  tr.final_phi = cache.f_x + g_at_x;
  tr.final_r_norm = cache.r_norm;
  tr.final_gamma = gamma;
  out.x = std::move(cache.x);
  return out;
}

namespace detail {

/// Accelerated forward-backward: x^{k+1} = T_gamma(y^k) with momentum
///   y^{k+1} = x^{k+1} + (t_k - 1)/t_{k+1} (x^{k+1} - x^k).
/// Keeps the same gamma-backtracking test as fbs (beta = 0); the record's
/// tau column carries the momentum coefficient.
inline SolveResult solve_fast_fbs(const CompositeProblem &prob,
                                  const SolveParams &p, const Vec &x0) {
  prob.nonsmooth.reset_state();
  const Counters base = prob.counter_snapshot();
  Counters marker = base;

  SolveResult out;
  SolveTrace &tr = out.trace;

  double gamma = 0;
  FbCache cache_y = startup_cache(prob, p, x0, 0.0, gamma);
  const double r0_norm = cache_y.r_norm;

  Vec x = x0;
  double f_x = cache_y.f_x; // y^0 = x^0
  double g_at_x = prob.nonsmooth.eval(x0);
  double t_momentum = 1.0;

  bool stopped = false;
  for (int k = 0; k < p.max_iters && !stopped; ++k) {
    const double phi_x = f_x + g_at_x;
    if (p.keep_iterates)
      tr.iterates.push_back(x);
    if (p.objective_stop &&
        phi_x - p.objective_stop->phi_star <= p.objective_stop->epsilon) {
      tr.status = SolveStatus::Converged;
      tr.stop_reason = "objective-gap";
      stopped = true;
      break;
    }
    if (check_termination(cache_y.r_norm, r0_norm, p.tol_abs, p.tol_rel)) {
      tr.status = SolveStatus::Converged;
      tr.stop_reason = "residual";
      stopped = true;
      break;
    }
    if (phi_x < p.divergence_floor) {
      tr.status = SolveStatus::DivergingObjective;
      tr.stop_reason = "objective-floor";
      stopped = true;
      break;
    }

    int shrinks = 0;
    try {
      for (;;) {
        Vec x_next = cache_y.t_x;
        SmoothEval eval_xn = prob.smooth.eval_fg(x_next);
        if (std::isnan(eval_xn.value) || eval_xn.value == -kInf)
          throw NonFiniteError("solve: f is non-finite at the new iterate",
                               x_next);
        double phi_xn = eval_xn.value + cache_y.g_at_t;
        if (gamma_condition(0.0, cache_y, phi_xn)) {
          gamma *= p.sigma;
          if (gamma < 1e-280)
            throw InvalidParams(
                "solve: gamma underflow; f may not be L-smooth");
          ++shrinks;
          cache_y = fb_cache_from_eval(prob, gamma, cache_y.x,
                                       {cache_y.f_x, cache_y.grad_f_x});
          continue;
        }

        double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum *
                                                         t_momentum));
        double coef = (t_momentum - 1.0) / t_next;
        Vec y_next = x_next + coef * (x_next - x);

        IterationRecord rec;
        rec.k = k;
        rec.gamma = gamma;
        rec.tau = coef;
        rec.r_norm = cache_y.r_norm;
        rec.r_w_norm = cache_y.r_norm;
        rec.phi_x = phi_x;
        rec.env_x = cache_y.env;
        rec.env_w = cache_y.env;
        rec.gamma_shrinks = shrinks;

        FbCache cache_next = fb_cache(prob, gamma, y_next);
        g_at_x = cache_y.g_at_t;
        f_x = eval_xn.value;
        x = std::move(x_next);
        t_momentum = t_next;
        cache_y = std::move(cache_next);

        Counters now = prob.counter_snapshot();
        rec.work = now - marker;
        marker = now;
        tr.records.push_back(std::move(rec));
        break;
      }
    } catch (const NonFiniteError &) {
      tr.status = SolveStatus::DivergingObjective;
      tr.stop_reason = "non-finite objective";
      stopped = true;
      break;
    }
  }

  if (!stopped) {
    tr.status = SolveStatus::MaxIters;
    tr.stop_reason = "max-iters";
    if (p.keep_iterates)
      tr.iterates.push_back(x);
  }

  tr.counters = prob.counter_snapshot() - base;
  tr.iterations = static_cast<int>(tr.records.size());
  tr.final_phi = f_x + g_at_x;
  tr.final_r_norm = cache_y.r_norm;
  tr.final_gamma = gamma;
  out.x = std::move(x);
  return out;
}

} // namespace detail

} // namespace fbe
