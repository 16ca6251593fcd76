// Tests for the composite solver: convergence of every variant, the
// step-size floor and halving grid, per-iteration descent, plain
// forward-backward equivalence, counter accounting, stop rules, and the
// line-search primitives.
#include <catch2/catch_amalgamated.hpp>

#include <fbe/oracle.hpp>
#include <fbe/problems.hpp>
#include <fbe/solver.hpp>

#include <random>

namespace {

fbe::Vec randv(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  fbe::Vec v(n);
  for (int i = 0; i < n; ++i)
    v[i] = nd(rng);
  return v;
}

fbe::Mat randm(int r, int c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  fbe::Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i)
      m(i, j) = nd(rng);
  return m;
}

// Small well-conditioned sparse regression instance used across tests.
fbe::CompositeProblem small_lasso(unsigned seed = 1) {
  fbe::Mat A = randm(12, 8, seed);
  fbe::Vec b = randv(12, seed + 1);
  auto op = fbe::dense_operator(A);
  double lmax = (A.transpose() * b).cwiseAbs().maxCoeff();
  return fbe::build_lasso(op, b, 0.2 * lmax);
}

double phi_of(const fbe::CompositeProblem &p, const fbe::Vec &x) {
  return p.smooth.eval(x) + p.nonsmooth.eval(x);
}

} // namespace

TEST_CASE("every variant converges on a small sparse regression") {
  auto run_one = [](fbe::Variant v, fbe::DirectionMode d) {
    auto p = small_lasso();
    fbe::SolveParams sp;
    sp.variant = v;
    sp.direction = d;
    sp.tol_abs = 1e-9;
    sp.max_iters = 5000;
    if (v == fbe::Variant::Fixed)
      sp.gamma0 = (1.0 - sp.beta) / *p.smooth.lipschitz();
    auto res = fbe::solve(p, sp, fbe::Vec::Zero(8));
    INFO("variant " << static_cast<int>(v));
    REQUIRE(res.trace.status == fbe::SolveStatus::Converged);
    REQUIRE(res.trace.stop_reason == "residual");
    REQUIRE(res.trace.final_r_norm <= 1e-9);
    REQUIRE(res.trace.iterations == static_cast<int>(res.trace.records.size()));
    return res;
  };

  auto fbs = run_one(fbe::Variant::Fbs, fbe::DirectionMode::Steepest);
  auto fast = run_one(fbe::Variant::FastFbs, fbe::DirectionMode::Steepest);
  auto lb = run_one(fbe::Variant::Adaptive, fbe::DirectionMode::Lbfgs);
  auto dense = run_one(fbe::Variant::Adaptive, fbe::DirectionMode::BfgsDense);
  auto cls = run_one(fbe::Variant::ClassicalLs, fbe::DirectionMode::Lbfgs);
  auto fixed = run_one(fbe::Variant::Fixed, fbe::DirectionMode::Lbfgs);

  // All variants agree on the minimizer to solver tolerance.
  auto p = small_lasso();
  double ref = phi_of(p, lb.x);
  for (const auto *r : {&fbs, &fast, &dense, &cls, &fixed})
    REQUIRE(phi_of(p, r->x) == Catch::Approx(ref).margin(1e-10));

  // Curvature-aware variants need far fewer iterations than plain splitting.
  REQUIRE(lb.trace.iterations < fbs.trace.iterations / 2);
}

TEST_CASE("step-size trace: halving grid, floor, and monotonicity") {
  // Exact curvature constant, deliberately huge initial step: the adaptive
  // test must walk gamma down the sigma-grid but never below
  // min(gamma0, sigma (1-beta) / L).
  fbe::Vec d(4);
  d << 1.0, 0.8, 0.5, 0.3; // H = diag(d^2), exact L = 1
  fbe::Mat A = d.asDiagonal();
  auto f = fbe::quadratic_loss(fbe::dense_operator(A), randv(4, 31), 1.0);
  fbe::CompositeProblem p{f, fbe::l1_norm(0.05, 4)};

  fbe::SolveParams sp;
  sp.variant = fbe::Variant::Adaptive;
  sp.direction = fbe::DirectionMode::Lbfgs;
  sp.gamma0 = 20.0;
  sp.sigma = 0.5;
  sp.beta = 0.05;
  sp.tol_abs = 1e-10;
  auto res = fbe::solve(p, sp, randv(4, 32));
  REQUIRE(res.trace.status == fbe::SolveStatus::Converged);

  double floor = sp.sigma * (1.0 - sp.beta) / 1.0;
  double min_gamma = 20.0;
  double prev = 20.0;
  int total_shrinks = 0;
  for (const auto &rec : res.trace.records) {
    REQUIRE(rec.gamma <= prev); // never grows back
    // Every accepted gamma sits exactly on the halving grid from gamma0.
    double lg = std::log2(20.0 / rec.gamma);
    REQUIRE(lg == Catch::Approx(std::round(lg)).margin(0.0));
    min_gamma = std::min(min_gamma, rec.gamma);
    total_shrinks += rec.gamma_shrinks;
    prev = rec.gamma;
  }
  REQUIRE(min_gamma < 20.0);      // the test actually fired
  REQUIRE(min_gamma >= floor);    // exact comparison: halving is exact in FP
  REQUIRE(res.trace.final_gamma == min_gamma);
  REQUIRE(total_shrinks ==
          static_cast<int>(std::round(std::log2(20.0 / min_gamma))));
}

TEST_CASE("plain splitting equivalence: pinned step direction reproduces it") {
  // The adaptive driver with steepest direction, tau pinned to zero, and a
  // zero-tightness test must reproduce plain forward-backward bit for bit.
  auto p1 = small_lasso(5);
  auto p2 = small_lasso(5);

  fbe::SolveParams a;
  a.variant = fbe::Variant::Adaptive;
  a.direction = fbe::DirectionMode::Steepest;
  a.force_tau_zero = true;
  a.beta = 0.0;
  a.tol_abs = 1e-9;
  a.max_iters = 4000;
  a.keep_iterates = true;

  fbe::SolveParams b;
  b.variant = fbe::Variant::Fbs;
  b.tol_abs = 1e-9;
  b.max_iters = 4000;
  b.keep_iterates = true;

  fbe::Vec x0 = randv(8, 41);
  auto ra = fbe::solve(p1, a, x0);
  auto rb = fbe::solve(p2, b, x0);

  REQUIRE(ra.trace.iterations == rb.trace.iterations);
  REQUIRE(ra.trace.iterates.size() == rb.trace.iterates.size());
  for (std::size_t i = 0; i < ra.trace.iterates.size(); ++i)
    REQUIRE((ra.trace.iterates[i] - rb.trace.iterates[i]).norm() == 0.0);
  REQUIRE((ra.x - rb.x).norm() == 0.0);
  for (int i = 0; i < ra.trace.iterations; ++i) {
    REQUIRE(ra.trace.records[i].gamma == rb.trace.records[i].gamma);
    REQUIRE(ra.trace.records[i].r_norm == rb.trace.records[i].r_norm);
    REQUIRE(ra.trace.records[i].tau == 0.0);
  }
}

TEST_CASE("per-iteration descent of the objective along the run") {
  // phi(x^{k+1}) <= phi(x^k) - beta gamma_k/2 ||r_w||^2 - gamma_k/2 ||r_x||^2
  // for the envelope-based variants, up to roundoff.
  for (auto mode : {fbe::DirectionMode::Lbfgs, fbe::DirectionMode::BfgsDense}) {
    auto p = small_lasso(7);
    fbe::SolveParams sp;
    sp.variant = fbe::Variant::Adaptive;
    sp.direction = mode;
    sp.tol_abs = 1e-9;
    auto res = fbe::solve(p, sp, randv(8, 51));
    REQUIRE(res.trace.status == fbe::SolveStatus::Converged);
    const auto &recs = res.trace.records;
    for (std::size_t k = 0; k < recs.size(); ++k) {
      double phi_next = k + 1 < recs.size() ? recs[k + 1].phi_x
                                            : res.trace.final_phi;
      double bound = recs[k].phi_x -
                     0.5 * sp.beta * recs[k].gamma * recs[k].r_w_norm *
                         recs[k].r_w_norm -
                     0.5 * recs[k].gamma * recs[k].r_norm * recs[k].r_norm;
      REQUIRE(phi_next <= bound + 1e-9 * (1.0 + std::abs(recs[k].phi_x)));
      // The line-search point never increases the envelope.
      REQUIRE(recs[k].env_w <=
              recs[k].env_x + 1e-12 * (1.0 + std::abs(recs[k].env_x)));
    }
  }
}

TEST_CASE("plain splitting has a monotone residual on convex problems") {
  auto p = small_lasso(9);
  fbe::SolveParams sp;
  sp.variant = fbe::Variant::Fbs;
  sp.tol_abs = 1e-10;
  sp.max_iters = 8000;
  auto res = fbe::solve(p, sp, randv(8, 61));
  REQUIRE(res.trace.status == fbe::SolveStatus::Converged);
  double prev = fbe::kInf;
  for (const auto &rec : res.trace.records) {
    REQUIRE(rec.r_norm <= prev + 1e-12 * (1.0 + prev));
    prev = rec.r_norm;
  }
}

TEST_CASE("over-regularized problem: the origin is optimal immediately") {
  fbe::Mat A = randm(10, 6, 71);
  fbe::Vec b = randv(10, 72);
  auto op = fbe::dense_operator(A);
  double lmax = fbe::lambda_max(fbe::Family::Lasso, op, b);
  auto p = fbe::build_lasso(op, b, 1.0001 * lmax);

  fbe::SolveParams sp;
  sp.tol_abs = 1e-12;
  auto res = fbe::solve(p, sp, fbe::Vec::Zero(6));
  REQUIRE(res.trace.status == fbe::SolveStatus::Converged);
  REQUIRE(res.trace.iterations == 0);
  REQUIRE(res.x.norm() == 0.0);
  REQUIRE(res.trace.final_r_norm == 0.0);
}

TEST_CASE("objective-gap stop rule") {
  auto p = small_lasso(11);
  // Reference optimum from a long plain run.
  fbe::SolveParams longp;
  longp.variant = fbe::Variant::Adaptive;
  longp.tol_abs = 1e-12;
  longp.max_iters = 20000;
  double phi_star = fbe::solve(p, longp, fbe::Vec::Zero(8)).trace.final_phi;

  fbe::SolveParams sp;
  sp.tol_abs = 0.0; // only the gap rule may stop the run
  sp.objective_stop = fbe::ObjectiveStop{phi_star, 1e-7};
  sp.max_iters = 20000;
  auto res = fbe::solve(p, sp, fbe::Vec::Zero(8));
  REQUIRE(res.trace.status == fbe::SolveStatus::Converged);
  REQUIRE(res.trace.stop_reason == "objective-gap");
  REQUIRE(res.trace.final_phi - phi_star <= 1e-7);

  // The same rule applies to the accelerated variant.
  fbe::SolveParams fp = sp;
  fp.variant = fbe::Variant::FastFbs;
  auto fres = fbe::solve(p, fp, fbe::Vec::Zero(8));
  REQUIRE(fres.trace.stop_reason == "objective-gap");
  REQUIRE(fres.trace.final_phi - phi_star <= 1e-7);
}

TEST_CASE("work accounting: hand-counted totals and per-record deltas") {
  // Fixed step, steepest direction, no line search, stop disabled: exactly
  // one fused eval, one envelope-gradient HVP, and one prox per iteration,
  // plus one eval and one prox at startup.
  fbe::Mat A = randm(6, 4, 81);
  auto f = fbe::quadratic_loss(fbe::dense_operator(A), randv(6, 82), 50.0);
  fbe::CompositeProblem p{f, fbe::l1_norm(0.1, 4)};

  fbe::SolveParams sp;
  sp.variant = fbe::Variant::Fixed;
  sp.direction = fbe::DirectionMode::Steepest;
  sp.force_tau_zero = true;
  sp.gamma0 = 0.001; // well inside (1-beta)/L
  sp.max_iters = 3;
  sp.tol_abs = 0.0; // never stops early
  auto res = fbe::solve(p, sp, randv(4, 83));

  REQUIRE(res.trace.status == fbe::SolveStatus::MaxIters);
  REQUIRE(res.trace.iterations == 3);
  const auto &c = res.trace.counters;
  REQUIRE(c.f_evals == 4);    // startup + one per iteration
  REQUIRE(c.grad_evals == 4); // fused with f_evals
  REQUIRE(c.prox_calls == 4); // startup cache + one per iteration
  REQUIRE(c.hvps == 3);       // envelope gradient, one per iteration
  REQUIRE(c.matvecs == 14);   // 2 per fused eval + 2 per HVP

  fbe::Counters sum;
  for (const auto &rec : res.trace.records)
    sum = sum + rec.work;
  REQUIRE(sum.f_evals == c.f_evals);
  REQUIRE(sum.grad_evals == c.grad_evals);
  REQUIRE(sum.prox_calls == c.prox_calls);
  REQUIRE(sum.hvps == c.hvps);
  REQUIRE(sum.matvecs == c.matvecs);
  REQUIRE(sum.svds == c.svds);

  // Record 0 carries the startup work on top of its own iteration.
  REQUIRE(res.trace.records[0].work.f_evals == 2);
  REQUIRE(res.trace.records[1].work.f_evals == 1);
  REQUIRE(res.trace.records[2].work.prox_calls == 1);
}

TEST_CASE("iterate retention and sizes across stop modes") {
  auto p = small_lasso(13);
  fbe::Vec x0 = randv(8, 91);

  SECTION("converged run: one more iterate than records, final matches") {
    fbe::SolveParams sp;
    sp.keep_iterates = true;
    sp.tol_abs = 1e-8;
    auto res = fbe::solve(p, sp, x0);
    REQUIRE(res.trace.status == fbe::SolveStatus::Converged);
    REQUIRE(res.trace.iterates.size() == res.trace.records.size() + 1);
    REQUIRE((res.trace.iterates.front() - x0).norm() == 0.0);
    REQUIRE((res.trace.iterates.back() - res.x).norm() == 0.0);
  }

  SECTION("iteration-budget run keeps the unrecorded final point") {
    fbe::SolveParams sp;
    sp.keep_iterates = true;
    sp.max_iters = 4;
    sp.tol_abs = 0.0;
    auto res = fbe::solve(p, sp, x0);
    REQUIRE(res.trace.status == fbe::SolveStatus::MaxIters);
    REQUIRE(res.trace.records.size() == 4);
    REQUIRE(res.trace.iterates.size() == 5);
    REQUIRE((res.trace.iterates.back() - res.x).norm() == 0.0);
  }

  SECTION("zero-budget run reports the starting point") {
    fbe::SolveParams sp;
    sp.keep_iterates = true;
    sp.max_iters = 0;
    auto res = fbe::solve(p, sp, x0);
    REQUIRE(res.trace.status == fbe::SolveStatus::MaxIters);
    REQUIRE(res.trace.records.empty());
    REQUIRE(res.trace.iterates.size() == 1);
    REQUIRE((res.x - x0).norm() == 0.0);
    REQUIRE(res.trace.final_phi == Catch::Approx(phi_of(p, x0)));
  }
}

TEST_CASE("relative residual tolerance") {
  auto p = small_lasso(15);
  fbe::SolveParams sp;
  sp.variant = fbe::Variant::Fixed;
  sp.gamma0 = (1.0 - sp.beta) / *p.smooth.lipschitz();
  sp.tol_abs = 0.0;
  sp.tol_rel = 1e-4;
  sp.max_iters = 50000;
  auto res = fbe::solve(p, sp, randv(8, 95));
  REQUIRE(res.trace.status == fbe::SolveStatus::Converged);
  double r0 = res.trace.records[0].r_norm; // no shrinks under Fixed
  REQUIRE(res.trace.final_r_norm <= 1e-4 * r0);
  // It genuinely used the relative rule: the absolute residual is not tiny.
  REQUIRE(res.trace.final_r_norm > 0.0);
}

TEST_CASE("seeded curvature probe makes unknown-constant runs reproducible") {
  // Smooth oracle without a known curvature constant and direction-dependent
  // curvature: the probe is seeded, so equal seeds give identical runs and
  // different seeds (almost surely) different initial steps.
  auto make = [] {
    fbe::Mat A = fbe::Vec::LinSpaced(5, 0.2, 2.0).asDiagonal().toDenseMatrix();
    auto eval = [A](const fbe::Vec &x) {
      fbe::SmoothEval e;
      fbe::Vec r = A * x;
      e.value = 0.5 * r.squaredNorm();
      e.grad = A.transpose() * r;
      return e;
    };
    return fbe::CompositeProblem{fbe::SmoothOracle(5, eval),
                                 fbe::l1_norm(0.05, 5)};
  };
  fbe::Vec x0 = randv(5, 97);

  fbe::SolveParams sp;
  sp.direction = fbe::DirectionMode::Steepest;
  sp.tol_abs = 1e-8;
  sp.seed = 123;
  sp.keep_iterates = true;
  auto r1 = fbe::solve(make(), sp, x0);
  auto r2 = fbe::solve(make(), sp, x0);
  REQUIRE(r1.trace.iterations == r2.trace.iterations);
  for (std::size_t i = 0; i < r1.trace.iterates.size(); ++i)
    REQUIRE((r1.trace.iterates[i] - r2.trace.iterates[i]).norm() == 0.0);

  sp.seed = 991;
  auto r3 = fbe::solve(make(), sp, x0);
  REQUIRE(r1.trace.records[0].gamma != r3.trace.records[0].gamma);
}

TEST_CASE("accelerated variant: momentum column follows the exact recurrence") {
  auto p = small_lasso(17);
  fbe::SolveParams sp;
  sp.variant = fbe::Variant::FastFbs;
  sp.tol_abs = 1e-9;
  sp.max_iters = 3000;
  auto res = fbe::solve(p, sp, fbe::Vec::Zero(8));
  REQUIRE(res.trace.status == fbe::SolveStatus::Converged);

  double t = 1.0;
  for (const auto &rec : res.trace.records) {
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    REQUIRE(rec.tau == (t - 1.0) / t_next);
    t = t_next;
  }
  REQUIRE(res.trace.records[0].tau == 0.0);
  REQUIRE(res.trace.records.back().tau > 0.5); // approaches 1 from below
  REQUIRE(res.trace.records.back().tau < 1.0);
}

TEST_CASE("divergence guards") {
  SECTION("unbounded-below objective trips the floor") {
    // f concave quadratic, curvature magnitude 1; forward-backward steps
    // scale x up geometrically, so phi heads to -inf.
    auto eval = [](const fbe::Vec &x) {
      fbe::SmoothEval e;
      e.value = -0.5 * x.squaredNorm();
      e.grad = -x;
      return e;
    };
    auto hvp = [](const fbe::Vec &, const fbe::Vec &v) -> fbe::Vec {
      return -v;
    };
    fbe::CompositeProblem p{fbe::SmoothOracle(3, eval, hvp, 1.0),
                            fbe::l1_norm(0.0, 3)};
    fbe::SolveParams sp;
    sp.variant = fbe::Variant::Fbs;
    sp.divergence_floor = -1e8;
    sp.max_iters = 100000;
    sp.tol_abs = 0.0;
    auto res = fbe::solve(p, sp, fbe::Vec::Ones(3));
    REQUIRE(res.trace.status == fbe::SolveStatus::DivergingObjective);
    REQUIRE(res.trace.stop_reason == "objective-floor");
    REQUIRE(res.trace.final_phi < -1e8);
  }

  SECTION("non-finite smooth values abort with a diagnostic status") {
    auto eval = [](const fbe::Vec &x) {
      fbe::SmoothEval e;
      if (x.norm() > 10.0) {
        e.value = std::numeric_limits<double>::quiet_NaN();
        e.grad = x;
        return e;
      }
      e.value = -0.5 * x.squaredNorm();
      e.grad = -x;
      return e;
    };
    fbe::CompositeProblem p{fbe::SmoothOracle(3, eval, nullptr, 1.0),
                            fbe::l1_norm(0.0, 3)};
    fbe::SolveParams sp;
    sp.variant = fbe::Variant::Fbs;
    sp.max_iters = 100000;
    sp.tol_abs = 0.0;
    auto res = fbe::solve(p, sp, fbe::Vec::Ones(3));
    REQUIRE(res.trace.status == fbe::SolveStatus::DivergingObjective);
    REQUIRE(res.trace.stop_reason == "non-finite objective");
  }
}

TEST_CASE("parameter validation") {
  auto p = small_lasso(19);
  fbe::Vec x0 = fbe::Vec::Zero(8);
  auto expect_throw = [&](auto mutate) {
    fbe::SolveParams sp;
    mutate(sp);
    REQUIRE_THROWS_AS(fbe::solve(p, sp, x0), fbe::InvalidParams);
  };
  expect_throw([](fbe::SolveParams &s) { s.beta = 1.0; });
  expect_throw([](fbe::SolveParams &s) { s.beta = -0.1; });
  expect_throw([](fbe::SolveParams &s) { s.sigma = 0.0; });
  expect_throw([](fbe::SolveParams &s) { s.sigma = 1.0; });
  expect_throw([](fbe::SolveParams &s) { s.max_iters = -1; });
  expect_throw([](fbe::SolveParams &s) { s.tol_abs = -1e-9; });
  expect_throw([](fbe::SolveParams &s) { s.gamma0 = 0.0; });
  expect_throw([](fbe::SolveParams &s) { s.variant = fbe::Variant::Fixed; });
  expect_throw([&p](fbe::SolveParams &s) {
    s.variant = fbe::Variant::Fixed; // step too long for the fixed protocol
    s.gamma0 = 1.01 * (1.0 - s.beta) / *p.smooth.lipschitz();
  });
  REQUIRE_THROWS_AS(fbe::solve(p, fbe::SolveParams{}, fbe::Vec::Zero(5)),
                    fbe::DimensionError);

  SECTION("fixed variant requires a known curvature constant") {
    auto eval = [](const fbe::Vec &x) {
      fbe::SmoothEval e;
      e.value = 0.5 * x.squaredNorm();
      e.grad = x;
      return e;
    };
    fbe::CompositeProblem q{fbe::SmoothOracle(3, eval), fbe::l1_norm(0.1, 3)};
    fbe::SolveParams sp;
    sp.variant = fbe::Variant::Fixed;
    sp.gamma0 = 0.5;
    REQUIRE_THROWS_AS(fbe::solve(q, sp, fbe::Vec::Zero(3)),
                      fbe::InvalidParams);
  }
}

TEST_CASE("residual stop rule arithmetic") {
  REQUIRE(fbe::check_termination(1e-9, 1.0, 1e-8, 0.0));
  REQUIRE_FALSE(fbe::check_termination(1e-7, 1.0, 1e-8, 0.0));
  REQUIRE(fbe::check_termination(1e-7, 1.0, 0.0, 1e-6));
  REQUIRE_FALSE(fbe::check_termination(1e-5, 1.0, 0.0, 1e-6));
  REQUIRE(fbe::check_termination(2e-8, 1.0, 1e-8, 1e-8)); // additive combine
}

TEST_CASE("backtracking step search") {
  // Decreasing envelope: accepts the full step.
  REQUIRE(fbe::backtrack_nonincrease([](double t) { return 1.0 - t; }, 1.0,
                                     10) == 1.0);
  // Only short steps help: halves until the value stops increasing.
  REQUIRE(fbe::backtrack_nonincrease(
              [](double t) { return t > 0.3 ? 2.0 : 0.5; }, 1.0, 10) == 0.25);
  // Nothing helps: signals failure with zero.
  REQUIRE(fbe::backtrack_nonincrease([](double t) { return 2.0 + t; }, 1.0,
                                     10) == 0.0);
  // A zero budget still tries the unit step.
  REQUIRE(fbe::backtrack_nonincrease([](double) { return 0.0; }, 1.0, 0) ==
          1.0);
}

TEST_CASE("interval line search on scalar models") {
  SECTION("unit step accepted when it satisfies both conditions") {
    auto phi = [](double t) { return (t - 1.0) * (t - 1.0); };
    auto slope = [](double t) { return 2.0 * (t - 1.0); };
    bool ok = false;
    double t = fbe::wolfe_search(phi, slope, phi(0), slope(0), 1e-4, 0.9, 25,
                                 &ok);
    REQUIRE(ok);
    REQUIRE(t == 1.0);
  }

  SECTION("bracketing finds a point satisfying both conditions") {
    // Minimum far inside the unit step: needs interval shrinking.
    auto phi = [](double t) { return (t - 0.1) * (t - 0.1); };
    auto slope = [](double t) { return 2.0 * (t - 0.1); };
    bool ok = false;
    double t = fbe::wolfe_search(phi, slope, phi(0), slope(0), 1e-4, 0.9, 25,
                                 &ok);
    REQUIRE(ok);
    REQUIRE(phi(t) <= phi(0) + 1e-4 * t * slope(0)); // sufficient decrease
    REQUIRE(slope(t) >= 0.9 * slope(0));             // curvature
  }

  SECTION("budget exhaustion returns the best sufficient-decrease point") {
    // Linear decrease: curvature condition can never hold, the step keeps
    // doubling, and the search gives up with the last feasible step.
    auto phi = [](double t) { return -t; };
    auto slope = [](double) { return -1.0; };
    bool ok = true;
    double t = fbe::wolfe_search(phi, slope, 0.0, -1.0, 1e-4, 0.9, 5, &ok);
    REQUIRE_FALSE(ok);
    REQUIRE(t == 16.0); // 1, 2, 4, 8, 16 across the five trials
  }

  SECTION("nonnegative initial slope is rejected") {
    REQUIRE_THROWS_AS(fbe::wolfe_search([](double) { return 0.0; },
                                        [](double) { return 0.0; }, 0.0, 0.0),
                      fbe::InvalidParams);
  }
}

TEST_CASE("direction bookkeeping: steepest runs never flag replacements") {
  auto p = small_lasso(23);
  fbe::SolveParams sp;
  sp.direction = fbe::DirectionMode::Steepest;
  sp.tol_abs = 1e-8;
  auto res = fbe::solve(p, sp, randv(8, 99));
  for (const auto &rec : res.trace.records)
    REQUIRE_FALSE(rec.descent_replaced);
}
