#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fbe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using index_t = Eigen::Index;

/// Error for operator/vector shape mismatches. Message names expected and
/// actual dimensions so callers can report them verbatim.
class DimensionError : public std::invalid_argument {
public:
  DimensionError(const std::string &where, index_t expected, index_t actual)
      : std::invalid_argument(where + ": expected dimension " +
                              std::to_string(expected) + ", got " +
                              std::to_string(actual)),
        expected(expected), actual(actual) {}
  index_t expected;
  index_t actual;
};

/// Raised when an oracle produces a non-finite value or gradient; carries the
/// evaluation point for diagnostics.
class NonFiniteError : public std::runtime_error {
public:
  NonFiniteError(const std::string &what, Vec at)
      : std::runtime_error(what), point(std::move(at)) {}
  Vec point;
};

class InvalidParams : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Work counters accumulated by oracles. Evaluations are fused
/// (value+gradient in one pass), so f_evals and grad_evals move together.
struct Counters {
  long f_evals = 0;
  long grad_evals = 0;
  long hvps = 0;
  long prox_calls = 0;
  long matvecs = 0;
  long svds = 0;

  Counters operator-(const Counters &o) const {
    return {f_evals - o.f_evals,   grad_evals - o.grad_evals,
            hvps - o.hvps,         prox_calls - o.prox_calls,
            matvecs - o.matvecs,   svds - o.svds};
  }
  Counters operator+(const Counters &o) const {
    return {f_evals + o.f_evals,   grad_evals + o.grad_evals,
            hvps + o.hvps,         prox_calls + o.prox_calls,
            matvecs + o.matvecs,   svds + o.svds};
  }
};

inline void check_dim(const char *where, index_t expected, index_t actual) {
  if (expected != actual)
    throw DimensionError(where, expected, actual);
}

} // namespace fbe
