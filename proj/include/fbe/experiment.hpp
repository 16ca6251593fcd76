#pragma once

#include "io.hpp"
#include "oracle.hpp"
#include "problems.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fbe {

/// Flat key=value problem/run description ('#' starts a comment). Paths are
/// resolved relative to the spec file's directory.
struct ProblemSpec {
  Family family = Family::Lasso;
  std::string source = "synthetic"; // synthetic | files
  std::uint64_t seed = 0;

  // file sources
  std::string data_a;  // design matrix: .mtx (sparse) or .csv (dense)
  std::string data_b;  // right-hand side / labels: single-column .csv
  std::string data;    // libsvm samples (logreg)
  std::string entries; // observed entries: .mtx (matcomp)
  std::string image;   // ground-truth image: .pgm (imrestore)

  // synthetic shape
  index_t m = 512, n = 1024, nnz = 20;
  index_t blocks = 100, block_size = 10, active_blocks = 5;
  index_t rows = 32, cols = 32, rank = 2;
  double obs_fraction = 0.6;
  double noise_sigma = 0.1;

  // regularization
  std::optional<double> lambda; ///< absolute; else fraction below applies
  double lambda_fraction = 0.05;
  std::string svd_policy = "full"; // full | rank-adaptive

  // imrestore
  int blur_size = 9;
  double blur_sigma = 4.0;
  double image_noise_sigma = 1e-3;

  // run configuration
  std::vector<std::string> solvers = {"alg1-lbfgs"};
  std::string stop = "residual"; // residual | gap
  double stop_tol = 1e-8;        // residual tolerance, or gap fraction
  int max_iters = 5000;
  std::string out_dir = "out";
};

namespace detail {

inline std::string trim(const std::string &s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos)
    return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string &s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, sep)) {
    tok = trim(tok);
    if (!tok.empty())
      out.push_back(tok);
  }
  return out;
}

} // namespace detail

inline ProblemSpec parse_problem_spec(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open '" + path + "'");
  ProblemSpec spec;
  bool have_family = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty())
      continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError(detail::location(path, lineno) +
                    ": expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw IoError(detail::location(path, lineno) + ": empty key or value");
    auto as_num = [&](double lo) {
      double v = detail::parse_double(val, path, lineno);
      if (v < lo)
        throw IoError(detail::location(path, lineno) + ": " + key +
                      " must be >= " + std::to_string(lo));
      return v;
    };
    auto as_index = [&]() { return static_cast<index_t>(as_num(0)); };
    if (key == "family") {
      spec.family = family_from_string(val);
      have_family = true;
    } else if (key == "source")
      spec.source = val;
    else if (key == "seed")
      spec.seed = static_cast<std::uint64_t>(as_num(0));
    else if (key == "data_a")
      spec.data_a = val;
    else if (key == "data_b")
      spec.data_b = val;
    else if (key == "data")
      spec.data = val;
    else if (key == "entries")
      spec.entries = val;
    else if (key == "image")
      spec.image = val;
    else if (key == "m")
      spec.m = as_index();
    else if (key == "n")
      spec.n = as_index();
    else if (key == "nnz")
      spec.nnz = as_index();
    else if (key == "blocks")
      spec.blocks = as_index();
    else if (key == "block_size")
      spec.block_size = as_index();
    else if (key == "active_blocks")
      spec.active_blocks = as_index();
    else if (key == "rows")
      spec.rows = as_index();
    else if (key == "cols")
      spec.cols = as_index();
    else if (key == "rank")
      spec.rank = as_index();
    else if (key == "obs_fraction")
      spec.obs_fraction = as_num(0);
    else if (key == "noise_sigma")
      spec.noise_sigma = as_num(0);
    else if (key == "lambda")
      spec.lambda = as_num(0);
    else if (key == "lambda_fraction")
      spec.lambda_fraction = as_num(0);
    else if (key == "svd_policy")
      spec.svd_policy = val;
    else if (key == "blur_size")
      spec.blur_size = static_cast<int>(as_num(1));
    else if (key == "blur_sigma")
      spec.blur_sigma = as_num(0);
    else if (key == "image_noise_sigma")
      spec.image_noise_sigma = as_num(0);
    else if (key == "solvers")
      spec.solvers = detail::split(val, ',');
    else if (key == "stop")
      spec.stop = val;
    else if (key == "stop_tol")
      spec.stop_tol = as_num(0);
    else if (key == "max_iters")
      spec.max_iters = static_cast<int>(as_num(0));
    else if (key == "out")
      spec.out_dir = val;
    else
      throw IoError(detail::location(path, lineno) + ": unknown key '" + key +
                    "'");
  }
  if (!have_family)
    throw IoError(path + ": missing required key 'family'");
  if (spec.stop != "residual" && spec.stop != "gap")
    throw IoError(path + ": stop must be 'residual' or 'gap'");
  if (spec.source != "synthetic" && spec.source != "files")
    throw IoError(path + ": source must be 'synthetic' or 'files'");
  if (spec.svd_policy != "full" && spec.svd_policy != "rank-adaptive")
    throw IoError(path + ": svd_policy must be 'full' or 'rank-adaptive'");
  if (spec.solvers.empty())
    throw IoError(path + ": solvers list is empty");
  return spec;
}

/// A constructed instance plus provenance echoed into trace files.
struct BuiltProblem {
  CompositeProblem problem;
  double lambda = 0;
  nlohmann::json info;
};

namespace detail {

inline std::string resolve_path(const std::string &base_dir,
                                const std::string &rel) {
  std::filesystem::path p(rel);
  if (p.is_absolute() || base_dir.empty())
    return rel;
  return (std::filesystem::path(base_dir) / p).string();
}

inline LinearOperator load_design(const std::string &path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".mtx")
    return sparse_operator(read_matrix_market(path).to_sparse());
  return dense_operator(read_csv_matrix(path));
}

inline Vec load_vector(const std::string &path) {
  Mat M = read_csv_matrix(path);
  if (M.cols() != 1)
    throw IoError(path + ": expected a single-column vector");
  return M.col(0);
}

inline double resolve_lambda(const ProblemSpec &spec, double lmax) {
  return spec.lambda ? *spec.lambda : spec.lambda_fraction * lmax;
}

} // namespace detail

/// Builds the problem described by `spec`. Pure: identical specs produce
/// identical instances (fresh oracle counters each time).
inline BuiltProblem build_from_spec(const ProblemSpec &spec,
                                    const std::string &base_dir = "") {
  const bool synthetic = spec.source == "synthetic";
  nlohmann::json info;
  info["family"] = to_string(spec.family);
  info["source"] = spec.source;
  info["seed"] = spec.seed;

  auto finish = [&](CompositeProblem prob, double lambda,
                    double lmax) -> BuiltProblem {
    info["lambda"] = lambda;
    if (lmax > 0)
      info["lambda_max"] = lmax;
    info["dim"] = prob.dim();
    return {std::move(prob), lambda, std::move(info)};
  };

  switch (spec.family) {
  case Family::Lasso: {
    if (synthetic) {
      LassoParams p{spec.m, spec.n, spec.nnz, spec.noise_sigma,
                    spec.lambda_fraction};
      GeneratedProblem g = gen_lasso(p, spec.seed);
      if (spec.lambda) {
        double lambda = *spec.lambda;
        return finish(build_lasso(dense_operator(g.A), g.b, lambda), lambda,
                      g.lambda_max);
      }
      info["noise_hash"] = g.noise_hash;
      return finish(std::move(g.problem), g.lambda, g.lambda_max);
    }
    LinearOperator A = detail::load_design(
        detail::resolve_path(base_dir, spec.data_a));
    Vec b = detail::load_vector(detail::resolve_path(base_dir, spec.data_b));
    double lmax = lambda_max(Family::Lasso, A, b);
    double lambda = detail::resolve_lambda(spec, lmax);
    return finish(build_lasso(std::move(A), std::move(b), lambda), lambda,
                  lmax);
  }
  case Family::Logreg: {
    if (synthetic) {
      LogregParams p{spec.m, spec.n, spec.nnz, spec.noise_sigma,
                     spec.lambda_fraction};
      GeneratedProblem g = gen_logreg(p, spec.seed);
      if (spec.lambda) {
        double lambda = *spec.lambda;
        return finish(build_logreg(dense_operator(g.A), g.b, lambda), lambda,
                      g.lambda_max);
      }
      info["noise_hash"] = g.noise_hash;
      return finish(std::move(g.problem), g.lambda, g.lambda_max);
    }
    std::optional<LinearOperator> A;
    Vec labels;
    if (!spec.data.empty()) {
      LibsvmData d = read_libsvm(detail::resolve_path(base_dir, spec.data));
      info["samples"] = d.A.rows();
      A = sparse_operator(std::move(d.A));
      labels = std::move(d.labels);
    } else {
      A = detail::load_design(detail::resolve_path(base_dir, spec.data_a));
      labels = detail::load_vector(detail::resolve_path(base_dir, spec.data_b));
      for (index_t i = 0; i < labels.size(); ++i)
        labels[i] = labels[i] <= 0 ? -1.0 : 1.0;
    }
    double lmax = lambda_max(Family::Logreg, *A, labels);
    double lambda = detail::resolve_lambda(spec, lmax);
    return finish(build_logreg(std::move(*A), std::move(labels), lambda),
                  lambda, lmax);
  }
  case Family::GroupLasso: {
    if (synthetic) {
      GroupLassoParams p{spec.blocks, spec.block_size, spec.m,
                         spec.active_blocks, spec.noise_sigma,
                         spec.lambda_fraction};
      GeneratedProblem g = gen_group_lasso(p, spec.seed);
      info["noise_hash"] = g.noise_hash;
      info["blocks"] = spec.blocks;
      if (spec.lambda) {
        BlockPartition part(g.block_sizes);
        return finish(build_group_lasso(dense_operator(g.A), g.b,
                                        *spec.lambda, part),
                      *spec.lambda, g.lambda_max);
      }
      return finish(std::move(g.problem), g.lambda, g.lambda_max);
    }
    LinearOperator A = detail::load_design(
        detail::resolve_path(base_dir, spec.data_a));
    Vec b = detail::load_vector(detail::resolve_path(base_dir, spec.data_b));
    if (A.cols() % spec.block_size != 0)
      throw InvalidParams("group-lasso: block_size must divide A cols");
    std::vector<index_t> sizes(
        static_cast<std::size_t>(A.cols() / spec.block_size),
        spec.block_size);
    BlockPartition part(sizes);
    double lmax = lambda_max(Family::GroupLasso, A, b, &part);
    double lambda = detail::resolve_lambda(spec, lmax);
    return finish(
        build_group_lasso(std::move(A), std::move(b), lambda, part), lambda,
        lmax);
  }
  case Family::Matcomp: {
    SvdPolicy policy = spec.svd_policy == "rank-adaptive"
                           ? SvdPolicy::RankAdaptive
                           : SvdPolicy::Full;
    if (synthetic) {
      MatcompParams p;
      p.rows = spec.rows;
      p.cols = spec.cols;
      p.rank = spec.rank;
      p.obs_fraction = spec.obs_fraction;
      p.noise_sigma = spec.noise_sigma;
      p.lambda_fraction = spec.lambda_fraction;
      p.lambda = spec.lambda;
      p.policy = policy;
      GeneratedProblem g = gen_matcomp(p, spec.seed);
      info["noise_hash"] = g.noise_hash;
      info["rows"] = spec.rows;
      info["cols"] = spec.cols;
      info["observed"] = g.b.size();
      return finish(std::move(g.problem), g.lambda, g.lambda_max);
    }
    MmData mm = read_matrix_market(detail::resolve_path(base_dir,
                                                        spec.entries));
    std::vector<std::pair<index_t, index_t>> obs;
    Vec values(static_cast<index_t>(mm.entries.size()));
    for (std::size_t t = 0; t < mm.entries.size(); ++t) {
      obs.emplace_back(mm.entries[t].row(), mm.entries[t].col());
      values[static_cast<index_t>(t)] = mm.entries[t].value();
    }
    double lmax =
        Eigen::BDCSVD<Mat>(Mat(mm.to_sparse())).singularValues()[0];
    double lambda = detail::resolve_lambda(spec, lmax);
    info["rows"] = mm.rows;
    info["cols"] = mm.cols;
    info["observed"] = values.size();
    return finish(
        build_matcomp(mm.rows, mm.cols, obs, std::move(values), lambda,
                      policy),
        lambda, lmax);
  }
  case Family::Imrestore: {
    Mat img;
    if (synthetic)
      img = make_test_image(spec.rows, spec.cols, spec.seed);
    else
      img = read_pgm(detail::resolve_path(base_dir, spec.image));
    ImrestoreParams p;
    p.blur_size = spec.blur_size;
    p.blur_sigma = spec.blur_sigma;
    p.noise_sigma = spec.image_noise_sigma;
    p.lambda = spec.lambda ? *spec.lambda : 1e-4;
    GeneratedProblem g = build_imrestore(img, p, spec.seed);
    info["rows"] = img.rows();
    info["cols"] = img.cols();
    info["noise_hash"] = g.noise_hash;
    return finish(std::move(g.problem), g.lambda, 0.0);
  }
  }
  throw InvalidParams("build_from_spec: unreachable family");
}

// ---------------------------------------------------------------------------
// Solver presets.

inline const std::vector<std::string> &preset_names() {
  static const std::vector<std::string> names = {
      "fbs",        "fast-fbs",   "lbfgs-classical",
      "alg1-lbfgs", "alg2-lbfgs", "alg2-bfgs"};
  return names;
}

/// Benchmark presets: beta = 0.05, sigma = 0.5, lbfgs memory 5, and
/// gamma0 = 0.95/L_f whenever L_f is known (the fixed-step presets require
/// it). Unknown names raise an error listing the valid presets.
inline SolveParams make_preset(const std::string &name,
                               std::optional<double> lipschitz) {
  SolveParams p;
  p.beta = 0.05;
  p.sigma = 0.5;
  p.lbfgs_memory = 5;
  if (lipschitz)
    p.gamma0 = 0.95 / *lipschitz;
  if (name == "fbs") {
    p.variant = Variant::Fbs;
  } else if (name == "fast-fbs") {
    p.variant = Variant::FastFbs;
  } else if (name == "lbfgs-classical") {
    p.variant = Variant::ClassicalLs;
    p.direction = DirectionMode::Lbfgs;
  } else if (name == "alg1-lbfgs") {
    p.variant = Variant::Adaptive;
    p.direction = DirectionMode::Lbfgs;
  } else if (name == "alg2-lbfgs") {
    p.variant = Variant::Fixed;
    p.direction = DirectionMode::Lbfgs;
  } else if (name == "alg2-bfgs") {
    p.variant = Variant::Fixed;
    p.direction = DirectionMode::BfgsDense;
  } else {
    std::string msg = "unknown solver preset '" + name + "' (valid:";
    for (const auto &n : preset_names())
      msg += " " + n;
    throw InvalidParams(msg + ")");
  }
  if (p.variant == Variant::Fixed && !lipschitz)
    throw InvalidParams("preset '" + name + "' requires a known L_f");
  return p;
}

// ---------------------------------------------------------------------------
// Experiment runner.

struct ExperimentRow {
  std::string solver;
  SolveStatus status = SolveStatus::MaxIters;
  int iterations = 0;
  double final_phi = 0;
  double final_r_norm = 0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  Counters counters;
  double wall_ms = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  double phi_star = std::numeric_limits<double>::quiet_NaN();
  bool all_converged = false;
};

namespace detail {

inline std::string format_summary_table(const ExperimentResult &res) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %-11s %8s %14s %12s %9s %9s %9s %7s %9s\n",
                "solver", "status", "iters", "phi", "r_norm", "f_evals",
                "hvps", "prox", "svds", "matvecs");
  os << buf;
  for (const auto &r : res.rows) {
    std::snprintf(buf, sizeof buf,
                  "%-16s %-11s %8d %14.6e %12.3e %9ld %9ld %9ld %7ld %9ld\n",
                  r.solver.c_str(), to_string(r.status), r.iterations,
                  r.final_phi, r.final_r_norm, r.counters.f_evals,
                  r.counters.hvps, r.counters.prox_calls, r.counters.svds,
                  r.counters.matvecs);
    os << buf;
  }
  return os.str();
}

} // namespace detail

/// Runs every solver in spec.solvers on a freshly built instance each,
/// writing per-solver trace CSV/JSON plus summary.csv and summary.txt under
/// spec.out_dir. Gap stopping computes a reference solution first (on its
/// own instance, so its work never pollutes solver counters). Returns rows
/// plus the all-converged flag (the CLI exit code).
inline ExperimentResult run_experiment(const ProblemSpec &spec,
                                       const std::string &base_dir = "",
                                       bool quiet = false) {
  std::filesystem::create_directories(spec.out_dir);
  ExperimentResult res;

  if (spec.stop == "gap") {
    BuiltProblem ref_prob = build_from_spec(spec, base_dir);
    Reference ref = reference_solution(ref_prob.problem, 1e-12,
                                       std::max(spec.max_iters, 200000));
    res.phi_star = ref.phi;
    if (!quiet && !ref.converged)
      std::cerr << "warning: reference solve stopped at residual "
                << ref.residual << " before reaching tolerance\n";
  }

  bool all_ok = true;
  for (const std::string &solver : spec.solvers) {
    BuiltProblem built = build_from_spec(spec, base_dir);
    SolveParams params =
        make_preset(solver, built.problem.smooth.lipschitz());
    params.max_iters = spec.max_iters;
    params.seed = spec.seed;
    if (spec.stop == "gap") {
      params.tol_abs = 0.0;
      params.objective_stop =
          ObjectiveStop{res.phi_star,
                        spec.stop_tol * (1.0 + std::abs(res.phi_star))};
    } else {
      params.tol_abs = spec.stop_tol;
    }

    Vec x0 = Vec::Zero(built.problem.dim());
    auto t0 = std::chrono::steady_clock::now();
    SolveResult sol = solve(built.problem, params, x0);
    auto t1 = std::chrono::steady_clock::now();

    ExperimentRow row;
    row.solver = solver;
    row.status = sol.trace.status;
    row.iterations = sol.trace.iterations;
    row.final_phi = sol.trace.final_phi;
    row.final_r_norm = sol.trace.final_r_norm;
    if (spec.stop == "gap")
      row.gap = sol.trace.final_phi - res.phi_star;
    row.counters = sol.trace.counters;
    row.wall_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    all_ok = all_ok && row.status == SolveStatus::Converged;

    std::filesystem::path out(spec.out_dir);
    write_trace_csv(sol.trace, (out / (solver + ".trace.csv")).string());
    write_trace_json(sol.trace, params, built.info,
                     (out / (solver + ".trace.json")).string());
    write_plot_csv(sol.trace, res.phi_star,
                   (out / (solver + ".plot.csv")).string());
    res.rows.push_back(std::move(row));
  }
  res.all_converged = all_ok;

  std::filesystem::path out(spec.out_dir);
  {
    std::ofstream csv(out / "summary.csv");
    csv << "solver,status,iterations,final_phi,final_r_norm,gap,f_evals,"
           "grad_evals,hvps,prox_calls,matvecs,svds,wall_ms\n";
    char buf[512];
    for (const auto &r : res.rows) {
      std::snprintf(buf, sizeof buf,
                    "%s,%s,%d,%.17g,%.17g,%.17g,%ld,%ld,%ld,%ld,%ld,%ld,%.3f",
                    r.solver.c_str(), to_string(r.status), r.iterations,
                    r.final_phi, r.final_r_norm, r.gap, r.counters.f_evals,
                    r.counters.grad_evals, r.counters.hvps,
                    r.counters.prox_calls, r.counters.matvecs,
                    r.counters.svds, r.wall_ms);
      csv << buf << "\n";
    }
  }
  std::string table = detail::format_summary_table(res);
  {
    std::ofstream txt(out / "summary.txt");
    txt << table;
  }
  if (!quiet)
    std::cout << table;
  return res;
}

// ---------------------------------------------------------------------------
// Built-in invariant checks (`check` verb).

namespace detail {

struct CheckReporter {
  bool all_ok = true;
  void report(const std::string &name, bool ok, const std::string &detail_msg
              = "") {
    std::cout << (ok ? "PASS " : "FAIL ") << name;
    if (!ok && !detail_msg.empty())
      std::cout << " (" << detail_msg << ")";
    std::cout << "\n";
    all_ok = all_ok && ok;
  }
};

} // namespace detail

/// Fast self-contained invariant suite on built-in instances; prints one
/// PASS/FAIL line per check and returns overall success.
inline bool run_selfcheck() {
  detail::CheckReporter rep;
  std::mt19937_64 rng(7);

  { // composition adjoint against dense materialization
    Mat A = detail::randn_matrix(7, 5, rng);
    Mat B = detail::randn_matrix(5, 9, rng);
    LinearOperator C = compose(dense_operator(A), dense_operator(B));
    Mat dense = materialize(C);
    double err = (dense - A * B).norm();
    Vec u = detail::randn_vector(9, rng), v = detail::randn_vector(7, rng);
    double adj =
        std::abs(C.apply(u).dot(v) - u.dot(C.apply_adjoint(v)));
    rep.report("composition matches dense materialization", err < 1e-12);
    rep.report("composition adjoint identity", adj < 1e-10);
  }
  { // power iteration against a dense eigensolver
    Mat A = detail::randn_matrix(30, 80, rng);
    NormEstimate est = norm_estimate(dense_operator(A), 10000, 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat> eig(A.transpose() * A);
    double truth = eig.eigenvalues().maxCoeff();
    rep.report("power iteration matches dense eigensolver",
               std::abs(est.value - truth) <= 1e-6 * truth);
  }
  { // envelope value agrees across its two computation routes
    LassoParams lp;
    lp.m = 20;
    lp.n = 12;
    lp.nnz = 3;
    GeneratedProblem g = gen_lasso(lp, 11);
    double L = *g.problem.smooth.lipschitz();
    bool ok = true;
    for (double gamma : {0.1 / L, 0.5 / L, 0.95 / L}) {
      Vec x = detail::randn_vector(12, rng);
      FbCache c = fb_cache(g.problem, gamma, x);
      double other = fbe_via_moreau(g.problem, gamma, x);
      ok = ok && std::abs(c.env - other) <= 1e-9 * (1.0 + std::abs(c.env));
    }
    rep.report("envelope value agrees across both routes", ok);
  }
  { // envelope gradient against finite differences
    LassoParams lp;
    lp.m = 16;
    lp.n = 10;
    lp.nnz = 3;
    GeneratedProblem g = gen_lasso(lp, 13);
    double gamma = 0.5 / *g.problem.smooth.lipschitz();
    Vec x = detail::randn_vector(10, rng);
    FbCache c = fb_cache(g.problem, gamma, x);
    Vec grad = fbe_gradient(g.problem, c);
    Vec fd = fd_gradient(
        [&](const Vec &z) { return fb_cache(g.problem, gamma, z).env; }, x);
    rep.report("envelope gradient matches finite differences",
               (grad - fd).norm() <= 1e-5 * (1.0 + grad.norm()));
  }
  { // scalar proxes against the grid oracle
    bool ok = true;
    ProxOracle l1 = l1_norm(0.7, 1);
    Vec x1(1);
    x1 << 1.0;
    double p = l1.prox(0.3, x1).point[0];
    double grid = prox_grid_oracle(
        [](double u) { return 0.7 * std::abs(u); }, 0.3, 1.0, 1e-4);
    ok = ok && std::abs(p - grid) <= 1e-3;
    ProxOracle pos = nonneg_indicator(1);
    Vec x2(1);
    x2 << -1.0;
    double p2 = pos.prox(0.5, x2).point[0];
    double grid2 = prox_grid_oracle(
        [](double u) { return u >= 0 ? 0.0 : kInf; }, 0.5, -1.0, 1e-4);
    ok = ok && std::abs(p2 - grid2) <= 1e-3;
    rep.report("scalar prox matches grid search", ok);
  }
  { // BFGS secant identity
    QnState qn(DirectionMode::BfgsDense, 6);
    Vec s = detail::randn_vector(6, rng);
    Vec y = s + 0.3 * detail::randn_vector(6, rng);
    if (s.dot(y) < 0)
      y = -y;
    qn.observe(s, y);
    rep.report("BFGS update satisfies the secant identity",
               (qn.inverse_approx() * y - s).norm() <= 1e-10);
  }
  { // solver descent on a lasso toy
    LassoParams lp;
    lp.m = 40;
    lp.n = 25;
    lp.nnz = 5;
    GeneratedProblem g = gen_lasso(lp, 17);
    SolveParams sp;
    sp.variant = Variant::Adaptive;
    sp.direction = DirectionMode::Lbfgs;
    sp.tol_abs = 1e-9;
    sp.max_iters = 500;
    SolveResult r = solve(g.problem, sp, Vec::Zero(25));
    bool mono = r.trace.status == SolveStatus::Converged;
    for (std::size_t i = 1; i < r.trace.records.size(); ++i)
      mono = mono && r.trace.records[i].phi_x <=
                         r.trace.records[i - 1].phi_x + 1e-9;
    rep.report("line-search solver decreases the objective", mono);
  }
  { // fbs residual monotonicity on a convex toy
    LassoParams lp;
    lp.m = 30;
    lp.n = 20;
    lp.nnz = 4;
    GeneratedProblem g = gen_lasso(lp, 19);
    SolveParams sp = make_preset("fbs", g.problem.smooth.lipschitz());
    sp.tol_abs = 1e-10;
    sp.max_iters = 20000;
    SolveResult r = solve(g.problem, sp, Vec::Zero(20));
    bool mono = true;
    for (std::size_t i = 1; i < r.trace.records.size(); ++i)
      mono = mono && r.trace.records[i].r_norm <=
                         r.trace.records[i - 1].r_norm + 1e-12;
    rep.report("fbs residual is monotone on a convex instance", mono);
  }
  return rep.all_ok;
}

} // namespace fbe
