#pragma once

#include "common.hpp"

#include <deque>
#include <vector>

namespace fbe {

enum class DirectionMode { Steepest, BfgsDense, Lbfgs };

/// True when d is a usable search direction for gradient `grad`
/// (nonpositive slope). The solver replaces failing directions by -grad.
inline bool descent_check(const Vec &d, const Vec &grad) {
  return d.dot(grad) <= 0.0;
}

/// Quasi-Newton state over (s, y) displacement/gradient-change pairs.
/// Pairs are accepted only when <s, y> > curvature_floor * ||s|| ||y||, which
/// keeps the inverse approximation positive definite; rejected or non-finite
/// pairs leave the state untouched. reset() drops all curvature information
/// (the solver calls it whenever gamma shrinks, since envelope gradients at
/// different gammas are not comparable).
class QnState {
public:
  QnState(DirectionMode mode, index_t dim, int memory = 5,
          double curvature_floor = 1e-12)
      : mode_(mode), dim_(dim), memory_(memory),
        curvature_floor_(curvature_floor) {
    if (dim <= 0)
      throw InvalidParams("QnState: dimension must be positive");
    if (mode == DirectionMode::Lbfgs && memory <= 0)
      throw InvalidParams("QnState: lbfgs memory must be positive");
    reset();
  }

  DirectionMode mode() const { return mode_; }
  int pair_count() const { return static_cast<int>(pairs_.size()); }
  bool has_memory() const {
    return mode_ == DirectionMode::BfgsDense ? seen_pair_ : !pairs_.empty();
  }

  void reset() {
    pairs_.clear();
    seen_pair_ = false;
    if (mode_ == DirectionMode::BfgsDense)
      H_ = Mat::Identity(dim_, dim_);
  }

  /// Feeds one pair; returns whether it was accepted into the memory.
  bool observe(const Vec &s, const Vec &y) {
    if (mode_ == DirectionMode::Steepest)
      return false;
    check_dim("QnState::observe", dim_, s.size());
    check_dim("QnState::observe", dim_, y.size());
    if (!s.allFinite() || !y.allFinite())
      return false;
    double sy = s.dot(y);
    if (sy <= curvature_floor_ * s.norm() * y.norm())
      return false;
    if (mode_ == DirectionMode::BfgsDense) {
      if (!seen_pair_)
        H_ *= sy / y.dot(y); // scale identity seed to the observed curvature
      double rho = 1.0 / sy;
      Vec Hy = H_ * y;
      double yHy = y.dot(Hy);
      H_ -= rho * (s * Hy.transpose() + Hy * s.transpose());
      H_ += (rho * rho * yHy + rho) * (s * s.transpose());
      seen_pair_ = true;
    } else {
      pairs_.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(pairs_.size()) > memory_)
        pairs_.pop_front();
    }
    return true;
  }

  /// Candidate direction for the current gradient; -grad when no curvature
  /// information has been accepted yet.
  Vec direction(const Vec &grad) const {
    check_dim("QnState::direction", dim_, grad.size());
    switch (mode_) {
    case DirectionMode::Steepest:
      return -grad;
    case DirectionMode::BfgsDense:
      return -(H_ * grad);
    case DirectionMode::Lbfgs:
      break;
    }
    if (pairs_.empty())
      return -grad;
    // Two-loop recursion on the inverse approximation, newest pair last.
    Vec q = grad;
    std::vector<double> alpha(pairs_.size());
    for (std::size_t i = pairs_.size(); i-- > 0;) {
      alpha[i] = pairs_[i].rho * pairs_[i].s.dot(q);
      q -= alpha[i] * pairs_[i].y;
    }
    const Pair &newest = pairs_.back();
    double h0 = newest.s.dot(newest.y) / newest.y.squaredNorm();
    Vec r = h0 * q;
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      double beta = pairs_[i].rho * pairs_[i].y.dot(r);
      r += (alpha[i] - beta) * pairs_[i].s;
    }
    return -r;
  }

  /// Dense inverse approximation (BfgsDense only; tests verify H y = s).
  const Mat &inverse_approx() const {
    if (mode_ != DirectionMode::BfgsDense)
      throw InvalidParams("QnState::inverse_approx: dense mode only");
    return H_;
  }

private:
  struct Pair {
    Vec s, y;
    double rho;
  };

  DirectionMode mode_;
  index_t dim_;
  int memory_;
  double curvature_floor_;
  bool seen_pair_ = false;
  Mat H_;
  std::deque<Pair> pairs_;
};

} // namespace fbe
