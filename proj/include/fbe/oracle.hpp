#pragma once

#include "solver.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace fbe {

struct FdConfig {
  double h_rel = 1e-6; ///< per-coordinate step h_i = h_rel * (1 + |x_i|)
};

/// Central-difference gradient of a scalar field; the independent check for
/// every analytic gradient in the library.
inline Vec fd_gradient(const std::function<double(const Vec &)> &field,
                       const Vec &x, FdConfig cfg = {}) {
  Vec g(x.size());
  Vec probe = x;
  for (index_t i = 0; i < x.size(); ++i) {
    double h = cfg.h_rel * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + h;
    double fp = field(probe);
    probe[i] = x[i] - h;
    double fm = field(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw InvalidParams("fd_gradient: non-finite field value at coordinate " +
                          std::to_string(i));
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Brute-force scalar prox: argmin over the grid {lo, lo+step, ..., hi} of
/// g(u) + (u - x)^2 / (2 gamma). Independent of every prox formula.
inline double prox_grid_oracle(const std::function<double(double)> &g_scalar,
                               double gamma, double x, double lo, double hi,
                               double step) {
  if (!(gamma > 0) || !(step > 0) || !(hi > lo))
    throw InvalidParams("prox_grid_oracle: invalid grid");
  double best_u = lo;
  double best_v = kInf;
  for (double u = lo; u <= hi; u += step) {
    double v = g_scalar(u) + (u - x) * (u - x) / (2.0 * gamma);
    if (v < best_v) {
      best_v = v;
      best_u = u;
    }
  }
  return best_u;
}

/// Grid prox with the default span 10 * gamma * (1 + |x|) around x.
inline double prox_grid_oracle(const std::function<double(double)> &g_scalar,
                               double gamma, double x, double step) {
  double span = 10.0 * gamma * (1.0 + std::abs(x));
  return prox_grid_oracle(g_scalar, gamma, x, x - span, x + span, step);
}

/// Envelope through the Moreau identity:
///   env(x) = f(x) - gamma/2 ||grad f(x)||^2 + g^gamma(x - gamma grad f(x)).
/// A second computation path used to cross-check fb_cache.
inline double fbe_via_moreau(const CompositeProblem &p, double gamma,
                             const Vec &x) {
  SmoothEval e = p.smooth.eval_fg(x);
  return e.value - 0.5 * gamma * e.grad.squaredNorm() +
         moreau_env(p.nonsmooth, gamma, x - gamma * e.grad);
}

/// Dense materialization of an operator (basis-vector probing); test-scale
/// only.
inline Mat materialize(const LinearOperator &op) {
  Mat A(op.rows(), op.cols());
  Vec e = Vec::Zero(op.cols());
  for (index_t j = 0; j < op.cols(); ++j) {
    e[j] = 1.0;
    A.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return A;
}

struct Reference {
  Vec x;
  double phi = 0;
  double residual = 0;
  bool converged = false;
};

/// High-accuracy solution used as phi_star for objective-gap stopping:
/// adaptive line search with lbfgs directions, restarted in chunks so a
/// residual stalled at the floating-point floor is detected long before
/// the budget runs out; falls back to steepest descent only when the
/// lbfgs pass neither converges nor makes progress. An unconverged
/// reference is returned flagged, with the residual it reached.
inline Reference reference_solution(const CompositeProblem &p,
                                    double tol = 1e-12,
                                    int max_iters = 200000) {
  Reference best;
  bool first = true;
  for (DirectionMode mode : {DirectionMode::Lbfgs, DirectionMode::Steepest}) {
    SolveParams sp;
    sp.variant = Variant::Adaptive;
    sp.direction = mode;
    sp.tol_abs = tol;
    const int chunk = 500;
    Vec x0 = Vec::Zero(p.dim());
    double prev_residual = kInf;
    bool conv = false;
    for (int used = 0; used < max_iters && !conv; used += chunk) {
      sp.max_iters = std::min(chunk, max_iters - used);
      SolveResult r = solve(p, sp, x0);
      conv = r.trace.status == SolveStatus::Converged;
      bool stalled = r.trace.final_r_norm > 0.5 * prev_residual;
      prev_residual = r.trace.final_r_norm;
      x0 = r.x;
      if (first || r.trace.final_phi < best.phi) {
        best.x = std::move(r.x);
        best.phi = r.trace.final_phi;
        best.residual = r.trace.final_r_norm;
        best.converged = conv;
        first = false;
      }
      if (!conv && stalled)
        break;
    }
    if (conv)
      break;
  }
  return best;
}

} // namespace fbe
