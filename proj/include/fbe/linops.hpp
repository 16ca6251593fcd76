#pragma once

#include "common.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <utility>
#include <vector>

namespace fbe {

enum class OpKind {
  Dense,
  Sparse,
  EntrySelection,
  Orthonormal,
  Composition,
  Diagonal,
  Identity,
  Callback, ///< structured maps wrapped via make_operator (e.g. blur)
};

/// Immutable linear map with apply/adjoint and a per-instance matvec counter.
/// Copies share the underlying storage and counter; apply and apply_adjoint
/// each count one matvec (atomically, so shared use across threads is safe).
class LinearOperator {
public:
  /// One implementation per operator structure; kept public so builders in
  /// detail can derive, but instances only circulate inside shared_ptr.
  struct Impl {
    virtual ~Impl() = default;
    virtual Vec apply(const Vec &v) const = 0;
    virtual Vec apply_adjoint(const Vec &v) const = 0;
    index_t rows = 0;
    index_t cols = 0;
    OpKind kind = OpKind::Dense;
    mutable std::atomic<long> matvecs{0};
  };

public:
  /// Output dimension (rows of the matrix view).
  index_t rows() const { return impl_->rows; }
  /// Input dimension (cols of the matrix view).
  index_t cols() const { return impl_->cols; }
  OpKind kind() const { return impl_->kind; }
  /// True for maps with W^T W = W W^T = I; lets prox composition verify its
  /// precondition structurally.
  bool orthonormal() const {
    return impl_->kind == OpKind::Orthonormal ||
           impl_->kind == OpKind::Identity;
  }

  Vec apply(const Vec &v) const {
    check_dim("LinearOperator::apply", impl_->cols, v.size());
    impl_->matvecs.fetch_add(1, std::memory_order_relaxed);
    return impl_->apply(v);
  }

  Vec apply_adjoint(const Vec &v) const {
    check_dim("LinearOperator::apply_adjoint", impl_->rows, v.size());
    impl_->matvecs.fetch_add(1, std::memory_order_relaxed);
    return impl_->apply_adjoint(v);
  }

  long matvec_count() const {
    return impl_->matvecs.load(std::memory_order_relaxed);
  }

  friend LinearOperator dense_operator(Mat A);
  friend LinearOperator sparse_operator(SparseMat A);
  friend LinearOperator identity_operator(index_t n);
  friend LinearOperator diagonal_operator(Vec d);
  friend LinearOperator entry_selection_operator(index_t rows, index_t cols,
                                                 std::vector<index_t> idx);
  friend LinearOperator compose(LinearOperator outer, LinearOperator inner);
  friend LinearOperator make_operator(index_t rows, index_t cols, OpKind kind,
                                      std::function<Vec(const Vec &)> fwd,
                                      std::function<Vec(const Vec &)> adj);

private:
  explicit LinearOperator(std::shared_ptr<Impl> impl)
      : impl_(std::move(impl)) {}
  std::shared_ptr<Impl> impl_;
};

namespace detail {

struct DenseImpl final : LinearOperator::Impl {
  Mat A;
  Vec apply(const Vec &v) const override { return A * v; }
  Vec apply_adjoint(const Vec &v) const override { return A.transpose() * v; }
};

struct SparseImpl final : LinearOperator::Impl {
  SparseMat A;
  Vec apply(const Vec &v) const override { return A * v; }
  Vec apply_adjoint(const Vec &v) const override { return A.transpose() * v; }
};

struct IdentityImpl final : LinearOperator::Impl {
  Vec apply(const Vec &v) const override { return v; }
  Vec apply_adjoint(const Vec &v) const override { return v; }
};

struct DiagonalImpl final : LinearOperator::Impl {
  Vec d;
  Vec apply(const Vec &v) const override { return d.cwiseProduct(v); }
  Vec apply_adjoint(const Vec &v) const override { return d.cwiseProduct(v); }
};

/// Gathers a fixed index subset: (Av)_k = v[idx[k]]. Adjoint scatters.
struct EntrySelectionImpl final : LinearOperator::Impl {
  std::vector<index_t> idx;
  Vec apply(const Vec &v) const override {
    Vec out(static_cast<index_t>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k)
      out[static_cast<index_t>(k)] = v[idx[k]];
    return out;
  }
  Vec apply_adjoint(const Vec &v) const override {
    Vec out = Vec::Zero(cols);
    for (std::size_t k = 0; k < idx.size(); ++k)
      out[idx[k]] += v[static_cast<index_t>(k)];
    return out;
  }
};

/// outer * inner: apply runs right-to-left, adjoint left-to-right.
struct CompositionImpl final : LinearOperator::Impl {
  CompositionImpl(LinearOperator o, LinearOperator i)
      : outer(std::move(o)), inner(std::move(i)) {}
  LinearOperator outer, inner;
  Vec apply(const Vec &v) const override {
    return outer.apply(inner.apply(v));
  }
  Vec apply_adjoint(const Vec &v) const override {
    return inner.apply_adjoint(outer.apply_adjoint(v));
  }
};

struct CallbackImpl final : LinearOperator::Impl {
  std::function<Vec(const Vec &)> fwd, adj;
  Vec apply(const Vec &v) const override { return fwd(v); }
  Vec apply_adjoint(const Vec &v) const override { return adj(v); }
};

} // namespace detail

inline LinearOperator dense_operator(Mat A) {
  auto impl = std::make_shared<detail::DenseImpl>();
  impl->rows = A.rows();
  impl->cols = A.cols();
  impl->kind = OpKind::Dense;
  impl->A = std::move(A);
  return LinearOperator(std::move(impl));
}

inline LinearOperator sparse_operator(SparseMat A) {
  auto impl = std::make_shared<detail::SparseImpl>();
  impl->rows = A.rows();
  impl->cols = A.cols();
  impl->kind = OpKind::Sparse;
  impl->A = std::move(A);
  return LinearOperator(std::move(impl));
}

inline LinearOperator identity_operator(index_t n) {
  if (n <= 0)
    throw InvalidParams("identity_operator: dimension must be positive");
  auto impl = std::make_shared<detail::IdentityImpl>();
  impl->rows = impl->cols = n;
  impl->kind = OpKind::Identity;
  return LinearOperator(std::move(impl));
}

inline LinearOperator diagonal_operator(Vec d) {
  if (d.size() == 0)
    throw InvalidParams("diagonal_operator: empty diagonal");
  auto impl = std::make_shared<detail::DiagonalImpl>();
  impl->rows = impl->cols = d.size();
  impl->kind = OpKind::Diagonal;
  impl->d = std::move(d);
  return LinearOperator(std::move(impl));
}

/// Selection of `idx` (0-based, into a length-`cols` vector); `rows` must
/// equal idx.size(). Indices may repeat; the adjoint accumulates.
inline LinearOperator entry_selection_operator(index_t rows, index_t cols,
                                               std::vector<index_t> idx) {
  if (rows != static_cast<index_t>(idx.size()))
    throw InvalidParams("entry_selection_operator: rows != idx.size()");
  for (index_t i : idx)
    if (i < 0 || i >= cols)
      throw InvalidParams("entry_selection_operator: index out of range");
  auto impl = std::make_shared<detail::EntrySelectionImpl>();
  impl->rows = rows;
  impl->cols = cols;
  impl->kind = OpKind::EntrySelection;
  impl->idx = std::move(idx);
  return LinearOperator(std::move(impl));
}

inline LinearOperator compose(LinearOperator outer, LinearOperator inner) {
  check_dim("compose: outer.cols vs inner.rows", outer.cols(), inner.rows());
  auto impl =
      std::make_shared<detail::CompositionImpl>(std::move(outer),
                                                std::move(inner));
  impl->rows = impl->outer.rows();
  impl->cols = impl->inner.cols();
  impl->kind = OpKind::Composition;
  return LinearOperator(std::move(impl));
}

/// Wraps arbitrary forward/adjoint callbacks (used for blur and wavelet
/// transforms). Pass kind = Orthonormal only when W^T W = W W^T = I holds.
inline LinearOperator make_operator(index_t rows, index_t cols, OpKind kind,
                                    std::function<Vec(const Vec &)> fwd,
                                    std::function<Vec(const Vec &)> adj) {
  auto impl = std::make_shared<detail::CallbackImpl>();
  impl->rows = rows;
  impl->cols = cols;
  impl->kind = kind;
  impl->fwd = std::move(fwd);
  impl->adj = std::move(adj);
  return LinearOperator(std::move(impl));
}

struct NormEstimate {
  double value = 0;           ///< estimate of ||A^T A|| = sigma_max(A)^2
  int iterations = 0;
  bool converged = false;
  std::vector<double> rayleigh_history; ///< one Rayleigh quotient per sweep
};

/// Power iteration on A^T A from a seeded pseudo-random unit vector.
/// Stops when successive Rayleigh quotients agree to `tol` relative; the
/// history is monotone nondecreasing (Rayleigh quotients under power steps
/// on a PSD map). The returned value estimates ||A^T A|| from below.
inline NormEstimate norm_estimate(const LinearOperator &op,
                                  int max_iters = 200, double tol = 1e-4,
                                  std::uint64_t seed = 20120521) {
  NormEstimate res;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(op.cols());
  for (index_t i = 0; i < v.size(); ++i)
    v[i] = gauss(rng);
  double nv = v.norm();
  if (nv == 0.0)
    v[0] = nv = 1.0;
  v /= nv;

  double prev = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    Vec w = op.apply_adjoint(op.apply(v));
    double rayleigh = v.dot(w);
    res.rayleigh_history.push_back(rayleigh);
    res.value = rayleigh;
    res.iterations = it;
    double wn = w.norm();
    if (wn == 0.0) {
      // v is in the kernel of A^T A; the quotient is exactly 0 and stable.
      res.converged = true;
      return res;
    }
    if (it > 1 && std::abs(rayleigh - prev) <= tol * std::abs(rayleigh)) {
      res.converged = true;
      return res;
    }
    prev = rayleigh;
    v = w / wn;
  }
  return res;
}

} // namespace fbe
