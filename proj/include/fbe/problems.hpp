#pragma once

#include "fbe.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fbe {

enum class Family { Lasso, Logreg, GroupLasso, Matcomp, Imrestore };

inline Family family_from_string(const std::string &s) {
  if (s == "lasso")
    return Family::Lasso;
  if (s == "logreg")
    return Family::Logreg;
  if (s == "group-lasso")
    return Family::GroupLasso;
  if (s == "matcomp")
    return Family::Matcomp;
  if (s == "imrestore")
    return Family::Imrestore;
  throw InvalidParams("unknown family '" + s +
                      "' (expected lasso, logreg, group-lasso, matcomp, "
                      "imrestore)");
}

inline std::string to_string(Family f) {
  switch (f) {
  case Family::Lasso:
    return "lasso";
  case Family::Logreg:
    return "logreg";
  case Family::GroupLasso:
    return "group-lasso";
  case Family::Matcomp:
    return "matcomp";
  case Family::Imrestore:
    return "imrestore";
  }
  return "?";
}

/// Smallest lambda for which x = 0 minimizes the regularized problem:
/// lasso ||A^T b||_inf, logreg ||A^T b||_inf / 2, group lasso the largest
/// blockwise norm of A^T b. Costs one adjoint matvec.
inline double lambda_max(Family family, const LinearOperator &A, const Vec &b,
                         const BlockPartition *blocks = nullptr) {
  Vec atb = A.apply_adjoint(b);
  switch (family) {
  case Family::Lasso:
    return atb.lpNorm<Eigen::Infinity>();
  case Family::Logreg:
    return 0.5 * atb.lpNorm<Eigen::Infinity>();
  case Family::GroupLasso: {
    if (!blocks)
      throw InvalidParams("lambda_max: group-lasso requires a block partition");
    check_dim("lambda_max: blocks vs A cols", A.cols(), blocks->dim());
    double m = 0;
    for (std::size_t i = 0; i < blocks->count(); ++i)
      m = std::max(m, atb.segment(blocks->offset(i), blocks->size(i)).norm());
    return m;
  }
  default:
    throw InvalidParams("lambda_max: defined for lasso, logreg, group-lasso");
  }
}

// ---------------------------------------------------------------------------
// Direct builders from data.

inline CompositeProblem build_lasso(LinearOperator A, Vec b, double lambda) {
  index_t n = A.cols();
  return {quadratic_loss(std::move(A), std::move(b)), l1_norm(lambda, n)};
}

inline CompositeProblem build_logreg(LinearOperator A, Vec labels,
                                     double lambda) {
  index_t n = A.cols();
  return {logistic_loss(std::move(A), std::move(labels)), l1_norm(lambda, n)};
}

inline CompositeProblem build_group_lasso(LinearOperator A, Vec b,
                                          double lambda,
                                          BlockPartition blocks) {
  check_dim("build_group_lasso: blocks vs A cols", A.cols(), blocks.dim());
  return {quadratic_loss(std::move(A), std::move(b)),
          group_l2(lambda, std::move(blocks))};
}

/// Matrix completion: f(X) = 1/2 sum over observed (i, j) of (X_ij - v)^2,
/// g = lambda ||X||_* on the column-major flattening. Entry preprocessing
/// (deduplication, centering) is the caller's job; with distinct entries
/// L_f = 1 exactly.
inline CompositeProblem
build_matcomp(index_t rows, index_t cols,
              const std::vector<std::pair<index_t, index_t>> &entries,
              Vec values, double lambda, SvdPolicy policy = SvdPolicy::Full) {
  if (rows <= 0 || cols <= 0)
    throw InvalidParams("build_matcomp: matrix dims must be positive");
  check_dim("build_matcomp: values vs entries",
            static_cast<index_t>(entries.size()), values.size());
  std::vector<index_t> idx;
  idx.reserve(entries.size());
  for (auto [i, j] : entries) {
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      throw InvalidParams("build_matcomp: entry index out of range");
    idx.push_back(i + j * rows);
  }
  auto sorted = idx;
  std::sort(sorted.begin(), sorted.end());
  bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) ==
                  sorted.end();
  const index_t n_obs = static_cast<index_t>(idx.size());
  LinearOperator A =
      entry_selection_operator(n_obs, rows * cols, std::move(idx));
  std::optional<double> L;
  if (distinct)
    L = 1.0; // A^T A is a 0/1 diagonal projector
  return {quadratic_loss(std::move(A), std::move(values), L),
          nuclear_norm(lambda, rows, cols, policy)};
}

// ---------------------------------------------------------------------------
// Image operators.

namespace detail {

inline index_t reflect_index(index_t i, index_t n) {
  while (i < 0 || i >= n) {
    if (i < 0)
      i = -i - 1;
    if (i >= n)
      i = 2 * n - 1 - i;
  }
  return i;
}

inline Vec conv1d_gather(const Vec &in, const Vec &kern) {
  index_t n = in.size();
  index_t c = (kern.size() - 1) / 2;
  Vec out = Vec::Zero(n);
  for (index_t i = 0; i < n; ++i)
    for (index_t k = 0; k < kern.size(); ++k)
      out[i] += kern[k] * in[reflect_index(i + k - c, n)];
  return out;
}

/// Exact transpose of conv1d_gather (the boundary reflection makes the
/// matrix non-symmetric, so the adjoint must scatter).
inline Vec conv1d_scatter(const Vec &in, const Vec &kern) {
  index_t n = in.size();
  index_t c = (kern.size() - 1) / 2;
  Vec out = Vec::Zero(n);
  for (index_t i = 0; i < n; ++i)
    for (index_t k = 0; k < kern.size(); ++k)
      out[reflect_index(i + k - c, n)] += kern[k] * in[i];
  return out;
}

inline void haar_step_rows(Mat &M, index_t nr, index_t nc) {
  const double s = 1.0 / std::sqrt(2.0);
  Vec buf(nc);
  for (index_t r = 0; r < nr; ++r) {
    for (index_t j = 0; j < nc / 2; ++j) {
      double a = M(r, 2 * j), b = M(r, 2 * j + 1);
      buf[j] = (a + b) * s;
      buf[nc / 2 + j] = (a - b) * s;
    }
    M.row(r).head(nc) = buf.transpose();
  }
}

inline void haar_step_cols(Mat &M, index_t nr, index_t nc) {
  const double s = 1.0 / std::sqrt(2.0);
  Vec buf(nr);
  for (index_t c = 0; c < nc; ++c) {
    for (index_t i = 0; i < nr / 2; ++i) {
      double a = M(2 * i, c), b = M(2 * i + 1, c);
      buf[i] = (a + b) * s;
      buf[nr / 2 + i] = (a - b) * s;
    }
    M.col(c).head(nr) = buf;
  }
}

inline void haar_unstep_rows(Mat &M, index_t nr, index_t nc) {
  const double s = 1.0 / std::sqrt(2.0);
  Vec buf(nc);
  for (index_t r = 0; r < nr; ++r) {
    for (index_t j = 0; j < nc / 2; ++j) {
      double a = M(r, j), d = M(r, nc / 2 + j);
      buf[2 * j] = (a + d) * s;
      buf[2 * j + 1] = (a - d) * s;
    }
    M.row(r).head(nc) = buf.transpose();
  }
}

inline void haar_unstep_cols(Mat &M, index_t nr, index_t nc) {
  const double s = 1.0 / std::sqrt(2.0);
  Vec buf(nr);
  for (index_t c = 0; c < nc; ++c) {
    for (index_t i = 0; i < nr / 2; ++i) {
      double a = M(i, c), d = M(nr / 2 + i, c);
      buf[2 * i] = (a + d) * s;
      buf[2 * i + 1] = (a - d) * s;
    }
    M.col(c).head(nr) = buf;
  }
}

} // namespace detail

/// Orthonormal 2-D Haar analysis operator on images flattened column-major;
/// `levels` recursions on the approximation block. Dims must be divisible
/// by 2^levels. The adjoint is the exact inverse (synthesis).
inline LinearOperator haar2d_operator(index_t rows, index_t cols,
                                      int levels = 4) {
  if (levels < 1)
    throw InvalidParams("haar2d_operator: levels must be >= 1");
  index_t mult = index_t{1} << levels;
  if (rows <= 0 || cols <= 0 || rows % mult != 0 || cols % mult != 0)
    throw InvalidParams(
        "haar2d_operator: dims must be positive multiples of 2^levels");
  index_t n = rows * cols;
  auto fwd = [rows, cols, levels](const Vec &x) {
    Mat M = Eigen::Map<const Mat>(x.data(), rows, cols);
    for (int l = 0; l < levels; ++l) {
      detail::haar_step_rows(M, rows >> l, cols >> l);
      detail::haar_step_cols(M, rows >> l, cols >> l);
    }
    return Vec(Eigen::Map<const Vec>(M.data(), M.size()));
  };
  auto adj = [rows, cols, levels](const Vec &x) {
    Mat M = Eigen::Map<const Mat>(x.data(), rows, cols);
    for (int l = levels - 1; l >= 0; --l) {
      detail::haar_unstep_cols(M, rows >> l, cols >> l);
      detail::haar_unstep_rows(M, rows >> l, cols >> l);
    }
    return Vec(Eigen::Map<const Vec>(M.data(), M.size()));
  };
  return make_operator(n, n, OpKind::Orthonormal, fwd, adj);
}

/// Normalized 1-D Gaussian kernel of odd `size`.
inline Vec gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0)
    throw InvalidParams("gaussian_kernel: size must be odd and positive");
  if (!(sigma > 0))
    throw InvalidParams("gaussian_kernel: sigma must be positive");
  Vec k(size);
  double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i)
    k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
  k /= k.sum();
  return k;
}

/// Separable Gaussian blur with reflective boundary handling on images
/// flattened column-major. The kernel is normalized to unit sum, so blur of
/// a constant image is the same constant.
inline LinearOperator gaussian_blur_operator(index_t rows, index_t cols,
                                             int size = 9, double sigma = 4) {
  if (rows <= 0 || cols <= 0)
    throw InvalidParams("gaussian_blur_operator: dims must be positive");
  Vec kern = gaussian_kernel(size, sigma);
  index_t n = rows * cols;
  auto fwd = [rows, cols, kern](const Vec &x) {
    Mat M = Eigen::Map<const Mat>(x.data(), rows, cols);
    for (index_t c = 0; c < cols; ++c)
      M.col(c) = detail::conv1d_gather(M.col(c), kern);
    for (index_t r = 0; r < rows; ++r)
      M.row(r) = detail::conv1d_gather(M.row(r).transpose(), kern).transpose();
    return Vec(Eigen::Map<const Vec>(M.data(), M.size()));
  };
  auto adj = [rows, cols, kern](const Vec &x) {
    Mat M = Eigen::Map<const Mat>(x.data(), rows, cols);
    for (index_t r = 0; r < rows; ++r)
      M.row(r) = detail::conv1d_scatter(M.row(r).transpose(), kern).transpose();
    for (index_t c = 0; c < cols; ++c)
      M.col(c) = detail::conv1d_scatter(M.col(c), kern);
    return Vec(Eigen::Map<const Vec>(M.data(), M.size()));
  };
  return make_operator(n, n, OpKind::Callback, fwd, adj);
}

// ---------------------------------------------------------------------------
// Seeded synthetic instances.

/// One generated instance with its provenance. Fields that do not apply to
/// a family are left empty.
struct GeneratedProblem {
  CompositeProblem problem;
  double lambda = 0;
  double lambda_max = 0;
  Vec x_true;
  Vec b;
  Mat A;
  std::vector<std::pair<index_t, index_t>> observed;
  Mat image;
  std::vector<index_t> block_sizes;
  std::uint64_t noise_hash = 0;
};

namespace detail {

inline std::uint64_t fnv1a_hash(const Vec &v) {
  const unsigned char *bytes =
      reinterpret_cast<const unsigned char *>(v.data());
  std::size_t len = static_cast<std::size_t>(v.size()) * sizeof(double);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline Mat randn_matrix(index_t m, index_t n, std::mt19937_64 &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat A(m, n);
  for (index_t j = 0; j < n; ++j)
    for (index_t i = 0; i < m; ++i)
      A(i, j) = gauss(rng);
  return A;
}

inline Vec randn_vector(index_t n, std::mt19937_64 &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(n);
  for (index_t i = 0; i < n; ++i)
    v[i] = gauss(rng);
  return v;
}

/// First k positions of a seeded shuffle of 0..n-1.
inline std::vector<index_t> sample_without_replacement(index_t n, index_t k,
                                                       std::mt19937_64 &rng) {
  std::vector<index_t> all(n);
  std::iota(all.begin(), all.end(), index_t{0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(k);
  return all;
}

} // namespace detail

struct LassoParams {
  index_t m = 512, n = 1024, nnz = 20;
  double noise_sigma = 0.1;
  double lambda_fraction = 0.05;
};

/// A standard normal, x_true with nnz standard-normal entries at random
/// positions, b = A x_true + noise. lambda = fraction * ||A^T b||_inf.
inline GeneratedProblem gen_lasso(const LassoParams &p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mat A = detail::randn_matrix(p.m, p.n, rng);
  Vec x_true = Vec::Zero(p.n);
  for (index_t i : detail::sample_without_replacement(p.n, p.nnz, rng))
    x_true[i] = detail::randn_vector(1, rng)[0];
  Vec noise = p.noise_sigma * detail::randn_vector(p.m, rng);
  Vec b = A * x_true + noise;
  LinearOperator op = dense_operator(A);
  double lmax = lambda_max(Family::Lasso, op, b);
  double lambda = p.lambda_fraction * lmax;
  GeneratedProblem g{build_lasso(op, b, lambda)};
  g.lambda = lambda;
  g.lambda_max = lmax;
  g.x_true = std::move(x_true);
  g.b = std::move(b);
  g.A = std::move(A);
  g.noise_hash = detail::fnv1a_hash(noise);
  return g;
}

struct LogregParams {
  index_t m = 512, n = 1024, nnz = 20;
  double noise_sigma = 0.1;
  double lambda_fraction = 0.05;
};

/// Same recipe as lasso with labels sign(A x_true + noise), ties to +1.
inline GeneratedProblem gen_logreg(const LogregParams &p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mat A = detail::randn_matrix(p.m, p.n, rng);
  Vec x_true = Vec::Zero(p.n);
  for (index_t i : detail::sample_without_replacement(p.n, p.nnz, rng))
    x_true[i] = detail::randn_vector(1, rng)[0];
  Vec noise = p.noise_sigma * detail::randn_vector(p.m, rng);
  Vec margin = A * x_true + noise;
  Vec labels(p.m);
  for (index_t i = 0; i < p.m; ++i)
    labels[i] = margin[i] < 0 ? -1.0 : 1.0;
  LinearOperator op = dense_operator(A);
  double lmax = lambda_max(Family::Logreg, op, labels);
  double lambda = p.lambda_fraction * lmax;
  GeneratedProblem g{build_logreg(op, labels, lambda)};
  g.lambda = lambda;
  g.lambda_max = lmax;
  g.x_true = std::move(x_true);
  g.b = std::move(labels);
  g.A = std::move(A);
  g.noise_hash = detail::fnv1a_hash(noise);
  return g;
}

struct GroupLassoParams {
  index_t blocks = 100, block_size = 10, m = 512, active_blocks = 5;
  double noise_sigma = 0.1;
  double lambda_fraction = 0.1;
};

/// Equal-size contiguous blocks; x_true fills a few random blocks.
inline GeneratedProblem gen_group_lasso(const GroupLassoParams &p,
                                        std::uint64_t seed) {
  if (p.active_blocks > p.blocks)
    throw InvalidParams("gen_group_lasso: active_blocks > blocks");
  std::mt19937_64 rng(seed);
  index_t n = p.blocks * p.block_size;
  Mat A = detail::randn_matrix(p.m, n, rng);
  Vec x_true = Vec::Zero(n);
  for (index_t blk :
       detail::sample_without_replacement(p.blocks, p.active_blocks, rng)) {
    Vec vals = detail::randn_vector(p.block_size, rng);
    x_true.segment(blk * p.block_size, p.block_size) = vals;
  }
  Vec noise = p.noise_sigma * detail::randn_vector(p.m, rng);
  Vec b = A * x_true + noise;
  std::vector<index_t> sizes(p.blocks, p.block_size);
  BlockPartition part(sizes);
  LinearOperator op = dense_operator(A);
  double lmax = lambda_max(Family::GroupLasso, op, b, &part);
  double lambda = p.lambda_fraction * lmax;
  GeneratedProblem g{build_group_lasso(op, b, lambda, part)};
  g.lambda = lambda;
  g.lambda_max = lmax;
  g.x_true = std::move(x_true);
  g.b = std::move(b);
  g.A = std::move(A);
  g.block_sizes = std::move(sizes);
  g.noise_hash = detail::fnv1a_hash(noise);
  return g;
}

struct MatcompParams {
  index_t rows = 50, cols = 40, rank = 2;
  double obs_fraction = 0.6;
  double noise_sigma = 0.0;
  double lambda_fraction = 0.05;
  std::optional<double> lambda; ///< absolute override
  SvdPolicy policy = SvdPolicy::Full;
};

/// Rank-`rank` ground truth L R^T with a random observed subset; lambda
/// defaults to a fraction of the spectral norm of the observed data matrix.
inline GeneratedProblem gen_matcomp(const MatcompParams &p,
                                    std::uint64_t seed) {
  if (!(p.obs_fraction > 0) || p.obs_fraction > 1)
    throw InvalidParams("gen_matcomp: obs_fraction must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  Mat L = detail::randn_matrix(p.rows, p.rank, rng);
  Mat R = detail::randn_matrix(p.cols, p.rank, rng);
  Mat M = L * R.transpose();
  index_t total = p.rows * p.cols;
  index_t k = std::max<index_t>(
      1, static_cast<index_t>(std::llround(p.obs_fraction * total)));
  std::vector<index_t> flat = detail::sample_without_replacement(total, k, rng);
  std::sort(flat.begin(), flat.end());
  std::vector<std::pair<index_t, index_t>> entries;
  entries.reserve(flat.size());
  Vec noise = p.noise_sigma * detail::randn_vector(k, rng);
  Vec values(k);
  Mat data = Mat::Zero(p.rows, p.cols);
  for (index_t t = 0; t < k; ++t) {
    index_t i = flat[t] % p.rows;
    index_t j = flat[t] / p.rows;
    entries.emplace_back(i, j);
    values[t] = M(i, j) + noise[t];
    data(i, j) = values[t];
  }
  double lmax = Eigen::BDCSVD<Mat>(data).singularValues()[0];
  double lambda = p.lambda ? *p.lambda : p.lambda_fraction * lmax;
  GeneratedProblem g{
      build_matcomp(p.rows, p.cols, entries, values, lambda, p.policy)};
  g.lambda = lambda;
  g.lambda_max = lmax;
  g.x_true = Eigen::Map<const Vec>(M.data(), M.size());
  g.b = std::move(values);
  g.observed = std::move(entries);
  g.noise_hash = detail::fnv1a_hash(noise);
  return g;
}

/// Seeded piecewise-constant test image in [0, 1] (random rectangles on a
/// dark background); compressible in the Haar basis.
inline Mat make_test_image(index_t rows, index_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Mat img = Mat::Constant(rows, cols, 0.1);
  for (int rect = 0; rect < 6; ++rect) {
    index_t r0 = static_cast<index_t>(uni(rng) * rows * 0.8);
    index_t c0 = static_cast<index_t>(uni(rng) * cols * 0.8);
    index_t h = 1 + static_cast<index_t>(uni(rng) * rows * 0.4);
    index_t w = 1 + static_cast<index_t>(uni(rng) * cols * 0.4);
    double val = 0.2 + 0.8 * uni(rng);
    img.block(r0, c0, std::min(h, rows - r0), std::min(w, cols - c0))
        .setConstant(val);
  }
  return img.cwiseMin(1.0).cwiseMax(0.0);
}

struct ImrestoreParams {
  int blur_size = 9;
  double blur_sigma = 4.0;
  double noise_sigma = 1e-3;
  double lambda = 1e-4;
  int levels = 4;
};

/// Robust-loss deblurring of `image` under an l1 penalty on 2-D Haar
/// coefficients: f(x) = sum log(1 + ((Ax - b)_i)^2), g(x) = lambda ||W x||_1
/// with A the blur and W the orthonormal wavelet analysis; b is the blurred
/// image plus seeded noise.
inline GeneratedProblem build_imrestore(const Mat &image,
                                        const ImrestoreParams &p,
                                        std::uint64_t seed) {
  index_t rows = image.rows(), cols = image.cols();
  LinearOperator A = gaussian_blur_operator(rows, cols, p.blur_size,
                                            p.blur_sigma);
  LinearOperator W = haar2d_operator(rows, cols, p.levels);
  Vec x_true = Eigen::Map<const Vec>(image.data(), image.size());
  std::mt19937_64 rng(seed);
  Vec noise = p.noise_sigma * detail::randn_vector(rows * cols, rng);
  Vec b = A.apply(x_true) + noise;
  GeneratedProblem g{
      {robust_loss(A, b),
       orthogonal_compose(l1_norm(p.lambda, rows * cols), W)}};
  g.lambda = p.lambda;
  g.x_true = std::move(x_true);
  g.b = b;
  g.image = image;
  g.noise_hash = detail::fnv1a_hash(noise);
  return g;
}

} // namespace fbe
