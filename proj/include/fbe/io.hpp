#pragma once

#include "solver.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fbe {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string location(const std::string &path, int line) {
  return path + ":" + std::to_string(line);
}

inline double parse_double(const std::string &tok, const std::string &path,
                           int line) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception &) {
    throw IoError(location(path, line) + ": expected a number, got '" + tok +
                  "'");
  }
  if (pos != tok.size())
    throw IoError(location(path, line) + ": trailing characters in '" + tok +
                  "'");
  return v;
}

} // namespace detail

/// MatrixMarket coordinate data (0-based after parsing).
struct MmData {
  index_t rows = 0, cols = 0;
  std::vector<Eigen::Triplet<double>> entries;

  SparseMat to_sparse() const {
    SparseMat A(rows, cols);
    A.setFromTriplets(entries.begin(), entries.end());
    return A;
  }
};

/// Reads "matrix coordinate real general" MatrixMarket files. Errors carry
/// file and line.
inline MmData read_matrix_market(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path + "'");
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line))
    throw IoError(path + ": empty file");
  ++lineno;
  {
    std::istringstream hs(line);
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || object != "matrix" ||
        format != "coordinate" || field != "real" || symmetry != "general")
      throw IoError(detail::location(path, lineno) +
                    ": expected header '%%MatrixMarket matrix coordinate "
                    "real general'");
  }
  MmData mm;
  index_t declared_nnz = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%')
      continue;
    std::istringstream ls(line);
    if (declared_nnz < 0) {
      if (!(ls >> mm.rows >> mm.cols >> declared_nnz) || mm.rows <= 0 ||
          mm.cols <= 0 || declared_nnz < 0)
        throw IoError(detail::location(path, lineno) +
                      ": expected 'rows cols nnz'");
      continue;
    }
    index_t i = 0, j = 0;
    std::string vtok;
    if (!(ls >> i >> j >> vtok))
      throw IoError(detail::location(path, lineno) +
                    ": expected 'row col value'");
    if (i < 1 || i > mm.rows || j < 1 || j > mm.cols)
      throw IoError(detail::location(path, lineno) +
                    ": index out of declared bounds");
    double v = detail::parse_double(vtok, path, lineno);
    mm.entries.emplace_back(i - 1, j - 1, v);
  }
  if (declared_nnz < 0)
    throw IoError(path + ": missing size line");
  if (static_cast<index_t>(mm.entries.size()) != declared_nnz)
    throw IoError(path + ": entry count " +
                  std::to_string(mm.entries.size()) +
                  " does not match declared nnz " +
                  std::to_string(declared_nnz));
  return mm;
}

/// Dense comma-separated matrix, one row per line; rows must agree in width.
inline Mat read_csv_matrix(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      // trim spaces
      std::size_t a = cell.find_first_not_of(" \t\r");
      std::size_t b = cell.find_last_not_of(" \t\r");
      if (a == std::string::npos)
        throw IoError(detail::location(path, lineno) + ": empty cell");
      row.push_back(detail::parse_double(cell.substr(a, b - a + 1), path,
                                         lineno));
    }
    if (row.empty())
      throw IoError(detail::location(path, lineno) + ": empty row");
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(detail::location(path, lineno) + ": ragged row (got " +
                    std::to_string(row.size()) + " cells, expected " +
                    std::to_string(rows.front().size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw IoError(path + ": no data");
  Mat M(static_cast<index_t>(rows.size()),
        static_cast<index_t>(rows.front().size()));
  for (index_t i = 0; i < M.rows(); ++i)
    for (index_t j = 0; j < M.cols(); ++j)
      M(i, j) = rows[i][j];
  return M;
}

struct LibsvmData {
  Vec labels;   ///< normalized to +-1 (nonpositive raw labels map to -1)
  SparseMat A;  ///< one sample per row, 0-based features
};

/// LIBSVM text rows "label idx:val idx:val ..." with 1-based indices.
/// n_features = 0 deduces the width from the largest index; a positive value
/// declares the width and out-of-bounds indices are an error.
inline LibsvmData read_libsvm(const std::string &path, index_t n_features = 0) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path + "'");
  std::vector<double> labels;
  std::vector<Eigen::Triplet<double>> trips;
  index_t max_idx = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok))
      continue;
    double lab = detail::parse_double(tok, path, lineno);
    index_t row = static_cast<index_t>(labels.size());
    labels.push_back(lab <= 0 ? -1.0 : 1.0);
    while (ls >> tok) {
      std::size_t colon = tok.find(':');
      if (colon == std::string::npos)
        throw IoError(detail::location(path, lineno) +
                      ": expected 'index:value', got '" + tok + "'");
      long idx1 = 0;
      try {
        idx1 = std::stol(tok.substr(0, colon));
      } catch (const std::exception &) {
        throw IoError(detail::location(path, lineno) + ": bad index in '" +
                      tok + "'");
      }
      if (idx1 < 1)
        throw IoError(detail::location(path, lineno) +
                      ": indices are 1-based, got " + std::to_string(idx1));
      if (n_features > 0 && idx1 > n_features)
        throw IoError(detail::location(path, lineno) + ": index " +
                      std::to_string(idx1) + " exceeds declared bound " +
                      std::to_string(n_features));
      double v = detail::parse_double(tok.substr(colon + 1), path, lineno);
      trips.emplace_back(row, static_cast<index_t>(idx1 - 1), v);
      max_idx = std::max<index_t>(max_idx, idx1);
    }
  }
  if (labels.empty())
    throw IoError(path + ": no samples");
  LibsvmData d;
  d.labels = Eigen::Map<const Vec>(labels.data(),
                                   static_cast<index_t>(labels.size()));
  index_t width = n_features > 0 ? n_features : max_idx;
  if (width == 0)
    throw IoError(path + ": no features");
  d.A.resize(static_cast<index_t>(labels.size()), width);
  d.A.setFromTriplets(trips.begin(), trips.end());
  return d;
}

/// Binary 8-bit PGM (P5, maxval <= 255), rescaled to [0, 1].
inline Mat read_pgm(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open '" + path + "'");
  auto next_token = [&]() {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n')
          ;
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty())
          return tok;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
    return tok;
  };
  if (next_token() != "P5")
    throw IoError(path + ": expected binary PGM magic 'P5'");
  auto parse_dim = [&](const char *what) {
    std::string tok = next_token();
    try {
      long v = std::stol(tok);
      if (v <= 0)
        throw std::invalid_argument("nonpositive");
      return static_cast<index_t>(v);
    } catch (const std::exception &) {
      throw IoError(path + ": bad " + std::string(what) + " '" + tok + "'");
    }
  };
  index_t width = parse_dim("width");
  index_t height = parse_dim("height");
  index_t maxval = parse_dim("maxval");
  if (maxval > 255)
    throw IoError(path + ": only 8-bit PGM supported (maxval <= 255)");
  std::vector<unsigned char> buf(static_cast<std::size_t>(width * height));
  in.read(reinterpret_cast<char *>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw IoError(path + ": truncated pixel data");
  Mat img(height, width);
  for (index_t r = 0; r < height; ++r)
    for (index_t c = 0; c < width; ++c)
      img(r, c) = buf[static_cast<std::size_t>(r * width + c)] /
                  static_cast<double>(maxval);
  return img;
}

/// Writes [0, 1]-valued matrices as 8-bit binary PGM (values clamped).
inline void write_pgm(const std::string &path, const Mat &img) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  out << "P5\n" << img.cols() << " " << img.rows() << "\n255\n";
  for (index_t r = 0; r < img.rows(); ++r)
    for (index_t c = 0; c < img.cols(); ++c) {
      double v = std::min(1.0, std::max(0.0, img(r, c)));
      out.put(static_cast<char>(std::lround(v * 255.0)));
    }
  if (!out)
    throw IoError("write failed for '" + path + "'");
}

/// Dense matrix as plain comma-separated rows (max precision round-trip).
inline void write_csv_matrix(const std::string &path, const Mat &M) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  char buf[64];
  for (index_t r = 0; r < M.rows(); ++r) {
    for (index_t c = 0; c < M.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", M(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out)
    throw IoError("write failed for '" + path + "'");
}

/// Coordinate-format MatrixMarket file (1-based indices on disk).
inline void write_matrix_market(const std::string &path, index_t rows,
                                index_t cols,
                                const std::vector<Eigen::Triplet<double>> &tr) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << rows << " " << cols << " " << tr.size() << "\n";
  char buf[96];
  for (const auto &t : tr) {
    std::snprintf(buf, sizeof buf, "%ld %ld %.17g", t.row() + 1L, t.col() + 1L,
                  t.value());
    out << buf << "\n";
  }
  if (!out)
    throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Trace serialization.

inline const char *to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::Converged:
    return "converged";
  case SolveStatus::MaxIters:
    return "max-iters";
  case SolveStatus::DivergingObjective:
    return "diverging-objective";
  case SolveStatus::LineSearchFailed:
    return "line-search-failed";
  }
  return "?";
}

/// Fixed CSV schema, one row per accepted iteration. Counter columns are
/// per-iteration deltas; for runs that stop at an iteration boundary their
/// column sums equal the run totals (row 0 also carries startup work;
/// mid-iteration aborts leave the partial iteration's work uncharged).
/// Floating-point cells use max precision so identical runs produce
/// bitwise-identical files.
inline constexpr const char *kTraceCsvHeader =
    "k,gamma,tau,r_norm,r_w_norm,phi_x,env_x,env_w,descent_replaced,"
    "gamma_shrinks,f_evals,grad_evals,hvps,prox_calls,matvecs,svds";

inline void write_trace_csv(const SolveTrace &tr, const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  out << kTraceCsvHeader << "\n";
  char buf[512];
  for (const IterationRecord &r : tr.records) {
    std::snprintf(buf, sizeof buf,
                  "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,"
                  "%ld,%ld,%ld,%ld,%ld,%ld",
                  r.k, r.gamma, r.tau, r.r_norm, r.r_w_norm, r.phi_x, r.env_x,
                  r.env_w, r.descent_replaced ? 1 : 0, r.gamma_shrinks,
                  r.work.f_evals, r.work.grad_evals, r.work.hvps,
                  r.work.prox_calls, r.work.matvecs, r.work.svds);
    out << buf << "\n";
  }
  if (!out)
    throw IoError("write failed for '" + path + "'");
}

/// Tidy per-iteration progress data for plotting: cumulative matvec count
/// against objective value, optimality gap (nan when no reference is
/// known), and residual.
inline void write_plot_csv(const SolveTrace &tr, double phi_star,
                           const std::string &path) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  out << "k,cum_matvecs,phi,gap,r_norm\n";
  long cum = 0;
  char buf[256];
  for (const IterationRecord &r : tr.records) {
    cum += r.work.matvecs;
    std::snprintf(buf, sizeof buf, "%d,%ld,%.17g,%.17g,%.17g", r.k, cum,
                  r.phi_x, r.phi_x - phi_star, r.r_norm);
    out << buf << "\n";
  }
  if (!out)
    throw IoError("write failed for '" + path + "'");
}

inline nlohmann::json to_json(const Counters &c) {
  return {{"f_evals", c.f_evals},       {"grad_evals", c.grad_evals},
          {"hvps", c.hvps},             {"prox_calls", c.prox_calls},
          {"matvecs", c.matvecs},       {"svds", c.svds}};
}

inline nlohmann::json params_json(const SolveParams &p) {
  nlohmann::json j;
  switch (p.variant) {
  case Variant::Adaptive:
    j["variant"] = "adaptive";
    break;
  case Variant::Fixed:
    j["variant"] = "fixed";
    break;
  case Variant::ClassicalLs:
    j["variant"] = "classical-ls";
    break;
  case Variant::Fbs:
    j["variant"] = "fbs";
    break;
  case Variant::FastFbs:
    j["variant"] = "fast-fbs";
    break;
  }
  switch (p.direction) {
  case DirectionMode::Steepest:
    j["direction"] = "steepest";
    break;
  case DirectionMode::BfgsDense:
    j["direction"] = "bfgs";
    break;
  case DirectionMode::Lbfgs:
    j["direction"] = "lbfgs";
    break;
  }
  j["lbfgs_memory"] = p.lbfgs_memory;
  if (p.gamma0)
    j["gamma0"] = *p.gamma0;
  j["beta"] = p.beta;
  j["sigma"] = p.sigma;
  j["max_iters"] = p.max_iters;
  j["tol_abs"] = p.tol_abs;
  j["tol_rel"] = p.tol_rel;
  j["seed"] = p.seed;
  if (p.objective_stop) {
    j["objective_stop"] = {{"phi_star", p.objective_stop->phi_star},
                           {"epsilon", p.objective_stop->epsilon}};
  }
  return j;
}

/// JSON trace: run totals, status, and the solver parameters echoed back.
inline void write_trace_json(const SolveTrace &tr, const SolveParams &params,
                             const nlohmann::json &problem_info,
                             const std::string &path) {
  nlohmann::json j;
  j["params"] = params_json(params);
  j["problem"] = problem_info;
  j["status"] = to_string(tr.status);
  j["stop_reason"] = tr.stop_reason;
  j["iterations"] = tr.iterations;
  j["final_phi"] = tr.final_phi;
  j["final_r_norm"] = tr.final_r_norm;
  j["final_gamma"] = tr.final_gamma;
  j["counters"] = to_json(tr.counters);
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out)
    throw IoError("write failed for '" + path + "'");
}

} // namespace fbe
