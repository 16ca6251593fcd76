#pragma once

#include "linops.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace fbe {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Contiguous partition of {0..dim-1} into blocks, given by block sizes.
class BlockPartition {
public:
  explicit BlockPartition(std::vector<index_t> sizes)
      : sizes_(std::move(sizes)) {
    offsets_.reserve(sizes_.size());
    index_t off = 0;
    for (index_t s : sizes_) {
      if (s <= 0)
        throw InvalidParams("BlockPartition: block sizes must be positive");
      offsets_.push_back(off);
      off += s;
    }
    dim_ = off;
    if (sizes_.empty())
      throw InvalidParams("BlockPartition: at least one block required");
  }

  /// Builds from explicit (offset, size) spans over a vector of length dim;
  /// throws if the spans overlap or leave gaps.
  static BlockPartition
  from_spans(index_t dim, const std::vector<std::pair<index_t, index_t>> &spans) {
    auto sorted = spans;
    std::sort(sorted.begin(), sorted.end());
    index_t expect = 0;
    std::vector<index_t> sizes;
    for (auto [off, len] : sorted) {
      if (off < expect)
        throw InvalidParams("BlockPartition: overlapping blocks");
      if (off > expect)
        throw InvalidParams("BlockPartition: incomplete partition (gap)");
      sizes.push_back(len);
      expect = off + len;
    }
    if (expect != dim)
      throw InvalidParams("BlockPartition: incomplete partition (short)");
    return BlockPartition(std::move(sizes));
  }

  index_t dim() const { return dim_; }
  std::size_t count() const { return sizes_.size(); }
  index_t offset(std::size_t i) const { return offsets_[i]; }
  index_t size(std::size_t i) const { return sizes_[i]; }

private:
  std::vector<index_t> sizes_;
  std::vector<index_t> offsets_;
  index_t dim_ = 0;
};

/// Prox output: the point and g evaluated there (free for every builder).
struct ProxResult {
  Vec point;
  double g_at_point = 0;
};

enum class SvdPolicy { Full, RankAdaptive };

/// Nonsmooth term g with an exact proximal map. Instances are immutable and
/// copy-shareable except for the rank-adaptive SVD bookkeeping, which makes
/// an oracle single-owner for the duration of a solver run.
class ProxOracle {
  struct Impl {
    index_t dim = 0;
    std::function<double(const Vec &)> eval_g;
    std::function<ProxResult(double, const Vec &)> prox;
    std::vector<LinearOperator> ops;
    std::shared_ptr<Impl> child; // aggregated for svds/matvecs only
    std::function<void()> reset;
    std::function<int()> rank_state;
    std::shared_ptr<std::atomic<long>> svds =
        std::make_shared<std::atomic<long>>(0);
    mutable std::atomic<long> prox_calls{0};
  };

public:
  ProxOracle(index_t dim, std::function<double(const Vec &)> eval_g,
             std::function<ProxResult(double, const Vec &)> prox)
      : impl_(std::make_shared<Impl>()) {
    impl_->dim = dim;
    impl_->eval_g = std::move(eval_g);
    impl_->prox = std::move(prox);
  }

  index_t dim() const { return impl_->dim; }

  /// g(x), extended-real valued (+inf outside an indicator's set).
  double eval(const Vec &x) const {
    check_dim("ProxOracle::eval", impl_->dim, x.size());
    return impl_->eval_g(x);
  }

  ProxResult prox(double gamma, const Vec &x) const {
    if (!(gamma > 0))
      throw InvalidParams("ProxOracle::prox: gamma must be positive");
    check_dim("ProxOracle::prox", impl_->dim, x.size());
    impl_->prox_calls.fetch_add(1, std::memory_order_relaxed);
    return impl_->prox(gamma, x);
  }

  /// Clears mutable per-run state (the rank-adaptive SVD rank). Solvers call
  /// this once at the start of a run.
  void reset_state() const {
    if (impl_->reset)
      impl_->reset();
    if (impl_->child && impl_->child->reset)
      impl_->child->reset();
  }

  /// Current rank-adaptive state, when this oracle carries one.
  std::optional<int> rank_state() const {
    if (impl_->rank_state)
      return impl_->rank_state();
    if (impl_->child && impl_->child->rank_state)
      return impl_->child->rank_state();
    return std::nullopt;
  }

  Counters counter_snapshot() const {
    Counters c;
    c.prox_calls = impl_->prox_calls.load(std::memory_order_relaxed);
    c.svds = impl_->svds->load(std::memory_order_relaxed);
    for (const auto &op : impl_->ops)
      c.matvecs += op.matvec_count();
    if (impl_->child) {
      c.svds += impl_->child->svds->load(std::memory_order_relaxed);
      for (const auto &op : impl_->child->ops)
        c.matvecs += op.matvec_count();
    }
    return c;
  }

  friend ProxOracle orthogonal_compose(ProxOracle inner, LinearOperator W);
  friend ProxOracle nuclear_norm(double lambda, index_t rows, index_t cols,
                                 SvdPolicy policy);

private:
  std::shared_ptr<Impl> impl_;
};

/// g(x) = lambda ||x||_1. lambda = 0 degenerates to g == 0 with identity prox.
inline ProxOracle l1_norm(double lambda, index_t dim) {
  if (lambda < 0)
    throw InvalidParams("l1_norm: lambda must be nonnegative");
  if (dim <= 0)
    throw InvalidParams("l1_norm: dimension must be positive");
  auto eval = [lambda](const Vec &x) { return lambda * x.lpNorm<1>(); };
  auto prox = [lambda](double gamma, const Vec &x) {
    double t = gamma * lambda;
    ProxResult r;
    r.point.resize(x.size());
    for (index_t i = 0; i < x.size(); ++i) {
      double m = std::abs(x[i]) - t;
      r.point[i] = m > 0 ? (x[i] > 0 ? m : -m) : 0.0;
    }
    r.g_at_point = lambda * r.point.lpNorm<1>();
    return r;
  };
  return ProxOracle(dim, eval, prox);
}

/// g(x) = lambda * sum_i ||x_{B_i}||_2 over a contiguous block partition.
inline ProxOracle group_l2(double lambda, BlockPartition blocks) {
  if (lambda < 0)
    throw InvalidParams("group_l2: lambda must be nonnegative");
  auto eval = [lambda, blocks](const Vec &x) {
    double s = 0;
    for (std::size_t i = 0; i < blocks.count(); ++i)
      s += x.segment(blocks.offset(i), blocks.size(i)).norm();
    return lambda * s;
  };
  auto prox = [lambda, blocks](double gamma, const Vec &x) {
    double t = gamma * lambda;
    ProxResult r;
    r.point = Vec::Zero(x.size());
    for (std::size_t i = 0; i < blocks.count(); ++i) {
      auto seg = x.segment(blocks.offset(i), blocks.size(i));
      double n = seg.norm();
      if (n > t) {
        r.point.segment(blocks.offset(i), blocks.size(i)) =
            (1.0 - t / n) * seg;
        r.g_at_point += lambda * (n - t);
      }
    }
    return r;
  };
  return ProxOracle(blocks.dim(), eval, prox);
}

namespace detail {
/// Indicator feasibility slack: points within this distance of the set
/// evaluate to 0 rather than +inf.
inline double indicator_slack(const Vec &x) { return 1e-12 * (1.0 + x.norm()); }
} // namespace detail

/// g = indicator of the nonnegative orthant.
inline ProxOracle nonneg_indicator(index_t dim) {
  if (dim <= 0)
    throw InvalidParams("nonneg_indicator: dimension must be positive");
  auto eval = [](const Vec &x) {
    Vec p = x.cwiseMax(0.0);
    return (x - p).norm() <= detail::indicator_slack(x) ? 0.0 : kInf;
  };
  auto prox = [](double, const Vec &x) {
    return ProxResult{x.cwiseMax(0.0), 0.0};
  };
  return ProxOracle(dim, eval, prox);
}

/// g = indicator of the box [lo, hi] (componentwise).
inline ProxOracle box_indicator(Vec lo, Vec hi) {
  check_dim("box_indicator: lo vs hi", lo.size(), hi.size());
  if (lo.size() == 0)
    throw InvalidParams("box_indicator: empty bounds");
  for (index_t i = 0; i < lo.size(); ++i)
    if (lo[i] > hi[i])
      throw InvalidParams("box_indicator: lo must not exceed hi");
  auto clamp = [lo, hi](const Vec &x) {
    return x.cwiseMax(lo).cwiseMin(hi);
  };
  auto eval = [clamp](const Vec &x) {
    return (x - clamp(x)).norm() <= detail::indicator_slack(x) ? 0.0 : kInf;
  };
  auto prox = [clamp](double, const Vec &x) {
    return ProxResult{clamp(x), 0.0};
  };
  return ProxOracle(lo.size(), eval, prox);
}

/// g(X) = lambda ||X||_* on matrices flattened column-major to vectors of
/// length rows*cols. The full policy thresholds a complete SVD per call.
/// The rank-adaptive policy keeps a running rank guess nu (start 10): each
/// call computes the nu leading triples, grows nu by 5 until the smallest
/// computed singular value falls to gamma*lambda or nu hits min(rows, cols)
/// (so the returned prox always equals full thresholding), then sets the
/// next guess to the first index at or below the threshold. At this scale
/// every decomposition is served by one full factorization, and the SVD
/// counter records factorizations per call, not modeled partial costs.
inline ProxOracle nuclear_norm(double lambda, index_t rows, index_t cols,
                               SvdPolicy policy = SvdPolicy::Full) {
  if (lambda < 0)
    throw InvalidParams("nuclear_norm: lambda must be nonnegative");
  if (rows <= 0 || cols <= 0)
    throw InvalidParams("nuclear_norm: matrix dims must be positive");
  index_t dim = rows * cols;
  auto state = std::make_shared<int>(10);
  auto svds = std::make_shared<std::atomic<long>>(0);

  auto eval = [lambda, rows, cols, svds](const Vec &x) {
    if (lambda == 0)
      return 0.0;
    Eigen::Map<const Mat> M(x.data(), rows, cols);
    svds->fetch_add(1, std::memory_order_relaxed);
    Eigen::BDCSVD<Mat> svd(M);
    return lambda * svd.singularValues().sum();
  };

  bool adaptive = policy == SvdPolicy::RankAdaptive;
  auto prox = [lambda, rows, cols, adaptive, state, svds](double gamma,
                                                          const Vec &x) {
    ProxResult r;
    if (lambda == 0) {
      r.point = x;
      return r;
    }
    Eigen::Map<const Mat> M(x.data(), rows, cols);
    svds->fetch_add(1, std::memory_order_relaxed);
    Eigen::BDCSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec &sv = svd.singularValues();
    double t = gamma * lambda;
    if (adaptive) {
      index_t full = std::min(rows, cols);
      index_t nu = std::min<index_t>(*state, full);
      while (nu < full && sv[nu - 1] > t)
        nu = std::min<index_t>(nu + 5, full);
      if (sv[nu - 1] <= t) {
        index_t j = 0;
        while (sv[j] > t)
          ++j;
        *state = static_cast<int>(j + 1); // 1-based first index at threshold
      } else {
        *state = static_cast<int>(nu);
      }
    }
    Vec shrunk = (sv.array() - t).max(0.0);
    Mat P = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
    r.point = Eigen::Map<const Vec>(P.data(), P.size());
    r.g_at_point = lambda * shrunk.sum();
    return r;
  };

  ProxOracle g(dim, eval, prox);
  g.impl_->svds = svds;
  if (adaptive) {
    g.impl_->reset = [state] { *state = 10; };
    g.impl_->rank_state = [state] { return *state; };
  }
  return g;
}

/// g(x) = inner(W x) for square orthonormal W; prox_{gamma g}(x) =
/// W^T prox_{gamma inner}(W x), exact because W preserves distances.
inline ProxOracle orthogonal_compose(ProxOracle inner, LinearOperator W) {
  if (!W.orthonormal())
    throw InvalidParams("orthogonal_compose: W must be flagged orthonormal");
  if (W.rows() != W.cols())
    throw InvalidParams("orthogonal_compose: W must be square");
  check_dim("orthogonal_compose: inner dim vs W rows", inner.dim(), W.rows());
  auto eval = [inner, W](const Vec &x) { return inner.eval(W.apply(x)); };
  auto prox = [inner, W](double gamma, const Vec &x) {
    ProxResult q = inner.prox(gamma, W.apply(x));
    return ProxResult{W.apply_adjoint(q.point), q.g_at_point};
  };
  ProxOracle g(W.cols(), eval, prox);
  g.impl_->ops.push_back(W);
  g.impl_->child = inner.impl_;
  return g;
}

/// Moreau envelope g^gamma(x) = g(prox_{gamma g}(x)) + ||x - p||^2 / (2 gamma).
inline double moreau_env(const ProxOracle &g, double gamma, const Vec &x) {
  ProxResult p = g.prox(gamma, x);
  return p.g_at_point + (x - p.point).squaredNorm() / (2.0 * gamma);
}

} // namespace fbe
