// Benchmark CLI: generate instances, run solver presets, self-check.
#include <fbe/experiment.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace fbe;

std::string spec_dir(const std::string &spec_path) {
  return std::filesystem::path(spec_path).parent_path().string();
}

struct RunOverrides {
  std::string solvers, out, stop;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iters;
  std::optional<double> tol;
};

int cmd_run(const std::string &spec_path, const RunOverrides &ov) {
  ProblemSpec spec = parse_problem_spec(spec_path);
  if (!ov.solvers.empty())
    spec.solvers = detail::split(ov.solvers, ',');
  if (!ov.out.empty())
    spec.out_dir = ov.out;
  if (!ov.stop.empty())
    spec.stop = ov.stop;
  if (ov.seed)
    spec.seed = *ov.seed;
  if (ov.max_iters)
    spec.max_iters = *ov.max_iters;
  if (ov.tol)
    spec.stop_tol = *ov.tol;
  if (spec.stop != "residual" && spec.stop != "gap")
    throw InvalidParams("--stop must be 'residual' or 'gap'");
  for (const std::string &s : spec.solvers)
    make_preset(s, 1.0); // validate names before any work
  ExperimentResult res = run_experiment(spec, spec_dir(spec_path));
  std::cout << "wrote traces and summary to " << spec.out_dir << "\n";
  return res.all_converged ? 0 : 1;
}

void write_spec_file(const std::string &path, const ProblemSpec &spec,
                     const std::vector<std::pair<std::string, std::string>>
                         &file_keys) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write '" + path + "'");
  out << "# generated instance; paths are relative to this file\n";
  out << "family = " << to_string(spec.family) << "\n";
  out << "source = files\n";
  for (const auto &[k, v] : file_keys)
    out << k << " = " << v << "\n";
  char buf[64];
  if (spec.lambda) {
    std::snprintf(buf, sizeof buf, "%.17g", *spec.lambda);
    out << "lambda = " << buf << "\n";
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", spec.lambda_fraction);
    out << "lambda_fraction = " << buf << "\n";
  }
  if (spec.family == Family::GroupLasso)
    out << "block_size = " << spec.block_size << "\n";
  if (spec.family == Family::Matcomp && spec.svd_policy != "full")
    out << "svd_policy = " << spec.svd_policy << "\n";
  if (spec.family == Family::Imrestore) {
    out << "blur_size = " << spec.blur_size << "\n";
    out << "blur_sigma = " << spec.blur_sigma << "\n";
    out << "image_noise_sigma = " << spec.image_noise_sigma << "\n";
    out << "seed = " << spec.seed << "\n";
  }
  out << "solvers = fbs, fast-fbs, alg1-lbfgs\n";
  out << "stop = residual\n";
  out << "stop_tol = 1e-8\n";
  out << "max_iters = " << spec.max_iters << "\n";
  out << "out = results\n";
  if (!out)
    throw IoError("write failed for '" + path + "'");
}

int cmd_gen(const std::string &family_name, const std::string &out_dir,
            ProblemSpec spec) {
  spec.family = family_from_string(family_name);
  spec.source = "synthetic";
  std::filesystem::create_directories(out_dir);
  std::filesystem::path out(out_dir);
  std::vector<std::pair<std::string, std::string>> file_keys;

  switch (spec.family) {
  case Family::Lasso:
  case Family::Logreg:
  case Family::GroupLasso: {
    GeneratedProblem g =
        spec.family == Family::Lasso
            ? gen_lasso({spec.m, spec.n, spec.nnz, spec.noise_sigma,
                         spec.lambda_fraction},
                        spec.seed)
            : spec.family == Family::Logreg
                  ? gen_logreg({spec.m, spec.n, spec.nnz, spec.noise_sigma,
                                spec.lambda_fraction},
                               spec.seed)
                  : gen_group_lasso({spec.blocks, spec.block_size, spec.m,
                                     spec.active_blocks, spec.noise_sigma,
                                     spec.lambda_fraction},
                                    spec.seed);
    write_csv_matrix((out / "A.csv").string(), g.A);
    write_csv_matrix((out / "b.csv").string(), g.b);
    file_keys = {{"data_a", "A.csv"}, {"data_b", "b.csv"}};
    break;
  }
  case Family::Matcomp: {
    MatcompParams p;
    p.rows = spec.rows;
    p.cols = spec.cols;
    p.rank = spec.rank;
    p.obs_fraction = spec.obs_fraction;
    p.noise_sigma = spec.noise_sigma;
    p.lambda_fraction = spec.lambda_fraction;
    p.lambda = spec.lambda;
    GeneratedProblem g = gen_matcomp(p, spec.seed);
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t t = 0; t < g.observed.size(); ++t)
      trips.emplace_back(static_cast<int>(g.observed[t].first),
                         static_cast<int>(g.observed[t].second),
                         g.b[static_cast<index_t>(t)]);
    write_matrix_market((out / "entries.mtx").string(), spec.rows, spec.cols,
                        trips);
    file_keys = {{"entries", "entries.mtx"}};
    break;
  }
  case Family::Imrestore: {
    Mat img = make_test_image(spec.rows, spec.cols, spec.seed);
    write_pgm((out / "image.pgm").string(), img);
    file_keys = {{"image", "image.pgm"}};
    break;
  }
  }
  write_spec_file((out / "problem.spec").string(), spec, file_keys);
  std::cout << "wrote instance and problem.spec to " << out_dir << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"forward-backward envelope solver benchmark"};
  app.require_subcommand(1);

  // run
  auto *run = app.add_subcommand("run", "run solvers described by a spec file");
  std::string spec_path;
  RunOverrides ov;
  std::uint64_t run_seed = 0;
  int run_max_iters = 0;
  double run_tol = 0;
  run->add_option("spec", spec_path, "problem/run spec file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--solvers", ov.solvers, "comma list of presets");
  run->add_option("--out", ov.out, "output directory");
  run->add_option("--stop", ov.stop, "stopping rule: residual | gap");
  auto *seed_opt = run->add_option("--seed", run_seed, "instance seed");
  auto *mi_opt = run->add_option("--max-iters", run_max_iters, "iteration cap");
  auto *tol_opt = run->add_option("--tol", run_tol, "stopping tolerance");

  // gen
  auto *gen = app.add_subcommand("gen", "generate a synthetic instance");
  std::string family_name, gen_out;
  ProblemSpec gspec;
  double gen_lambda = -1;
  gen->add_option("family", family_name,
                  "lasso | logreg | group-lasso | matcomp | imrestore")
      ->required();
  gen->add_option("-o,--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gspec.seed, "rng seed");
  gen->add_option("--m", gspec.m, "rows of A / samples");
  gen->add_option("--n", gspec.n, "cols of A / features");
  gen->add_option("--nnz", gspec.nnz, "nonzeros in the planted signal");
  gen->add_option("--blocks", gspec.blocks, "group count");
  gen->add_option("--block-size", gspec.block_size, "group width");
  gen->add_option("--active-blocks", gspec.active_blocks, "planted groups");
  gen->add_option("--rows", gspec.rows, "matrix/image rows");
  gen->add_option("--cols", gspec.cols, "matrix/image cols");
  gen->add_option("--rank", gspec.rank, "planted rank");
  gen->add_option("--obs-fraction", gspec.obs_fraction, "observed fraction");
  gen->add_option("--noise", gspec.noise_sigma, "noise level");
  auto *lam_opt = gen->add_option("--lambda", gen_lambda, "absolute lambda");
  gen->add_option("--lambda-fraction", gspec.lambda_fraction,
                  "lambda as a fraction of lambda_max");
  gen->add_option("--blur-size", gspec.blur_size, "blur kernel size (odd)");
  gen->add_option("--blur-sigma", gspec.blur_sigma, "blur kernel sigma");
  gen->add_option("--image-noise", gspec.image_noise_sigma,
                  "imrestore noise level");
  gen->add_option("--svd-policy", gspec.svd_policy, "full | rank-adaptive");
  gen->add_option("--max-iters", gspec.max_iters, "iteration cap in the spec");

  // check
  auto *check = app.add_subcommand("check", "run built-in invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (seed_opt->count())
        ov.seed = run_seed;
      if (mi_opt->count())
        ov.max_iters = run_max_iters;
      if (tol_opt->count())
        ov.tol = run_tol;
      return cmd_run(spec_path, ov);
    }
    if (gen->parsed()) {
      if (lam_opt->count())
        gspec.lambda = gen_lambda;
      return cmd_gen(family_name, gen_out, gspec);
    }
    if (check->parsed())
      return run_selfcheck() ? 0 : 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
