#pragma once

#include "linops.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>

namespace fbe {

/// Value and gradient from one fused pass.
struct SmoothEval {
  double value = 0;
  Vec grad;
};

/// Differentiable term f. The fused value+gradient evaluation is the
/// primitive; value-only calls go through the same path and cost the same.
/// Instances are immutable and copy-shareable; counters are atomic.
class SmoothOracle {
  struct Impl {
    index_t dim = 0;
    std::function<SmoothEval(const Vec &)> eval_fg;
    std::function<Vec(const Vec &, const Vec &)> hvp; // null if unavailable
    std::optional<double> lipschitz;
    std::vector<LinearOperator> ops; // operators whose matvecs this f incurs
    mutable std::atomic<long> f_evals{0};
    mutable std::atomic<long> hvp_calls{0};
  };

public:
  SmoothOracle(index_t dim, std::function<SmoothEval(const Vec &)> eval_fg,
               std::function<Vec(const Vec &, const Vec &)> hvp = nullptr,
               std::optional<double> lipschitz = std::nullopt,
               std::vector<LinearOperator> ops = {})
      : impl_(std::make_shared<Impl>()) {
    impl_->dim = dim;
    impl_->eval_fg = std::move(eval_fg);
    impl_->hvp = std::move(hvp);
    impl_->lipschitz = lipschitz;
    impl_->ops = std::move(ops);
  }

  index_t dim() const { return impl_->dim; }
  std::optional<double> lipschitz() const { return impl_->lipschitz; }
  bool has_hvp() const { return static_cast<bool>(impl_->hvp); }

  SmoothEval eval_fg(const Vec &x) const {
    check_dim("SmoothOracle::eval_fg", impl_->dim, x.size());
    impl_->f_evals.fetch_add(1, std::memory_order_relaxed);
    return impl_->eval_fg(x);
  }

  /// Value-only convenience; same cost as the fused primitive.
  double eval(const Vec &x) const { return eval_fg(x).value; }

  /// Hessian-vector product at x applied to v. Requires has_hvp().
  Vec hvp(const Vec &x, const Vec &v) const {
    if (!impl_->hvp)
      throw InvalidParams("SmoothOracle::hvp: no analytic HVP available");
    check_dim("SmoothOracle::hvp", impl_->dim, x.size());
    check_dim("SmoothOracle::hvp", impl_->dim, v.size());
    impl_->hvp_calls.fetch_add(1, std::memory_order_relaxed);
    return impl_->hvp(x, v);
  }

  /// Counter snapshot: fused evals count as one f-eval and one gradient
  /// eval; matvecs aggregate over the operators this oracle applies.
  Counters counter_snapshot() const {
    Counters c;
    c.f_evals = impl_->f_evals.load(std::memory_order_relaxed);
    c.grad_evals = c.f_evals;
    c.hvps = impl_->hvp_calls.load(std::memory_order_relaxed);
    for (const auto &op : impl_->ops)
      c.matvecs += op.matvec_count();
    return c;
  }

private:
  std::shared_ptr<Impl> impl_;
};

/// f(x) = 1/2 ||A x - b||^2. L_f defaults to 1.01 * power-iteration estimate
/// of ||A^T A|| (the safety factor covers the estimate converging from
/// below); pass `lipschitz` to override with an exact constant.
inline SmoothOracle
quadratic_loss(LinearOperator A, Vec b,
               std::optional<double> lipschitz = std::nullopt) {
  check_dim("quadratic_loss: b vs A rows", A.rows(), b.size());
  double L = lipschitz ? *lipschitz : 1.01 * norm_estimate(A).value;
  auto eval = [A, b](const Vec &x) {
    Vec r = A.apply(x) - b;
    SmoothEval e;
    e.value = 0.5 * r.squaredNorm();
    e.grad = A.apply_adjoint(r);
    return e;
  };
  auto hvp = [A](const Vec &, const Vec &v) {
    return A.apply_adjoint(A.apply(v));
  };
  return SmoothOracle(A.cols(), eval, hvp, L, {A});
}

namespace detail {

/// log(1 + e^t) without overflow for large |t|.
inline double log1p_exp(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/// 1/(1 + e^{-t}) evaluated stably at both tails.
inline double sigmoid(double t) {
  if (t >= 0)
    return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

} // namespace detail

/// f(x) = sum_i log(1 + exp(-b_i <a_i, x>)) with labels b_i in {-1, +1}.
/// L_f defaults to 1.01/4 * estimate of ||A^T A||.
inline SmoothOracle
logistic_loss(LinearOperator A, Vec labels,
              std::optional<double> lipschitz = std::nullopt) {
  check_dim("logistic_loss: labels vs A rows", A.rows(), labels.size());
  for (index_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 1.0 && labels[i] != -1.0)
      throw InvalidParams("logistic_loss: labels must be +1 or -1");
  double L = lipschitz ? *lipschitz : 0.25 * 1.01 * norm_estimate(A).value;
  Vec b = std::move(labels);
  auto eval = [A, b](const Vec &x) {
    Vec z = A.apply(x);
    SmoothEval e;
    Vec q(z.size());
    for (index_t i = 0; i < z.size(); ++i) {
      double t = -b[i] * z[i];
      e.value += detail::log1p_exp(t);
      q[i] = -b[i] * detail::sigmoid(t);
    }
    e.grad = A.apply_adjoint(q);
    return e;
  };
  auto hvp = [A, b](const Vec &x, const Vec &v) {
    Vec z = A.apply(x);
    Vec u = A.apply(v);
    for (index_t i = 0; i < z.size(); ++i) {
      double s = detail::sigmoid(-b[i] * z[i]);
      u[i] *= s * (1.0 - s);
    }
    return A.apply_adjoint(u);
  };
  return SmoothOracle(A.cols(), eval, hvp, L, {A});
}

/// f(x) = sum_i psi((Ax - b)_i) with psi(t) = log(1 + t^2); nonconvex since
/// psi'' changes sign at |t| = 1. L_f defaults to 2 * 1.01 * ||A^T A||
/// estimate (|psi''| <= 2).
inline SmoothOracle
robust_loss(LinearOperator A, Vec b,
            std::optional<double> lipschitz = std::nullopt) {
  check_dim("robust_loss: b vs A rows", A.rows(), b.size());
  double L = lipschitz ? *lipschitz : 2.0 * 1.01 * norm_estimate(A).value;
  auto eval = [A, b](const Vec &x) {
    Vec r = A.apply(x) - b;
    SmoothEval e;
    Vec q(r.size());
    for (index_t i = 0; i < r.size(); ++i) {
      double t = r[i];
      e.value += std::log1p(t * t);
      q[i] = 2.0 * t / (1.0 + t * t);
    }
    e.grad = A.apply_adjoint(q);
    return e;
  };
  auto hvp = [A, b](const Vec &x, const Vec &v) {
    Vec r = A.apply(x) - b;
    Vec u = A.apply(v);
    for (index_t i = 0; i < r.size(); ++i) {
      double t2 = r[i] * r[i];
      u[i] *= 2.0 * (1.0 - t2) / ((1.0 + t2) * (1.0 + t2));
    }
    return A.apply_adjoint(u);
  };
  return SmoothOracle(A.cols(), eval, hvp, L, {A});
}

struct HvpResult {
  Vec value;
  bool analytic = true;
};

/// Hessian-vector product, falling back to a forward difference of the
/// gradient when no analytic HVP exists. Pass grad_at_x (if already known)
/// to make the fallback cost a single extra gradient evaluation.
inline HvpResult hvp_or_fd(const SmoothOracle &f, const Vec &x, const Vec &v,
                           const Vec *grad_at_x = nullptr) {
  if (f.has_hvp())
    return {f.hvp(x, v), true};
  double vn = v.norm();
  if (vn == 0.0)
    return {Vec::Zero(x.size()), false};
  double eps =
      std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.norm()) / vn;
  Vec g0 = grad_at_x ? *grad_at_x : f.eval_fg(x).grad;
  Vec g1 = f.eval_fg(x + eps * v).grad;
  return {(g1 - g0) / eps, false};
}

} // namespace fbe
