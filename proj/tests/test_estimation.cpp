#include <cmath>

#include "doctest.h"

#include "ck/error.hpp"
#include "ck/estimation.hpp"
#include "ck/rng.hpp"
#include "ck/synth.hpp"
#include "test_helpers.hpp"

using namespace ck;

TEST_SUITE("estimation") {

TEST_CASE("intercept-only binary logit recovers the analytic MLE") {
  const auto cm = compile_model(ckt::binary_asc_model(), ckt::binary_schema());
  EstimationOptions opt;
  opt.tol = 1e-8;
  {
    const auto ds = ckt::binary_dataset(75, 25);
    const auto res = maximize_ll(cm, ds, opt);
    CHECK(res.converged);
    CHECK(res.params.get("asc_b") == doctest::Approx(std::log(3.0)).epsilon(1e-6));
    CHECK(res.params.get("asc_b") == doctest::Approx(1.0986).epsilon(1e-4));
  }
  {
    const auto ds = ckt::binary_dataset(50, 50);
    const auto res = maximize_ll(cm, ds, opt);
    CHECK(res.converged);
    CHECK(res.params.get("asc_b") == doctest::Approx(0.0).epsilon(1e-8));
  }
}

TEST_CASE("analytic score matches finite differences for every family") {
  const auto sim = simulate_dataset(ckt::acceptance_dgp(20, 3, 61));
  Rng rng(44);

  auto check_model = [&](const ModelSpec& spec, int draws) {
    const auto cm = compile_model(spec, sim.schema);
    const auto bd = bind_data(cm, sim.data);
    auto p = cm.start;
    for (int i : p.free_indices())
      p.set_value(i, p.value(i) + rng.uniform(-0.3, 0.3));
    std::optional<DrawMatrix> dm;
    if (cm.family() == Family::Mixed) dm.emplace(bd.ind.size(), cm.n_dims, draws, 5);
    const auto ga = analytic_gradient(bd, p, dm ? &*dm : nullptr);
    const auto gf = fd_gradient(bd, p, dm ? &*dm : nullptr);
    REQUIRE(ga.size() == gf.size());
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(std::fabs(ga[i] - gf[i]) < 1e-6);
  };

  check_model(ckt::mnl_model(), 0);
  check_model(ckt::mmnl_socios_model(), 20);
  check_model(ckt::lc_socios_alloc_model(), 0);
  check_model(ckt::lc_socios_util_model(), 0);
}

TEST_CASE("analytic score matches finite differences for nested kernels") {
  // nest bus+walk under a shared lambda
  auto spec = ckt::mnl_socios_model();
  spec.name = "nl";
  spec.kernel = "nl";
  spec.nests.push_back({.name = "slow", .members = {"bus", "walk"}});
  const auto sim = simulate_dataset(ckt::acceptance_dgp(15, 3, 62));
  const auto cm = compile_model(spec, sim.schema);
  const auto bd = bind_data(cm, sim.data);
  auto p = cm.start;
  p.set("asc_bus", 0.3);
  p.set("asc_walk", -0.2);
  p.set("b_cost", -0.5);
  p.set("g_fem_bus", 0.4);
  p.set("lambda.slow", 0.6);
  const auto ga = analytic_gradient(bd, p, nullptr);
  const auto gf = fd_gradient(bd, p, nullptr);
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(std::fabs(ga[i] - gf[i]) < 1e-6);
}

TEST_CASE("gradient is zero at the analytic optimum") {
  const auto cm = compile_model(ckt::binary_asc_model(), ckt::binary_schema());
  const auto ds = ckt::binary_dataset(75, 25);
  const auto bd = bind_data(cm, ds);
  auto p = cm.start;
  p.set("asc_b", std::log(3.0));
  const auto g = analytic_gradient(bd, p, nullptr);
  CHECK(std::fabs(g[0]) < 1e-10);
  const auto gf = fd_gradient(bd, p, nullptr);
  CHECK(std::fabs(gf[0]) < 1e-6);
}

TEST_CASE("fd gradient vanishes at a symmetry point") {
  // balanced sample: LL is symmetric in the constant around zero
  const auto cm = compile_model(ckt::binary_asc_model(), ckt::binary_schema());
  const auto ds = ckt::binary_dataset(30, 30);
  const auto bd = bind_data(cm, ds);
  const auto g = fd_gradient(bd, cm.start, nullptr);
  CHECK(std::fabs(g[0]) < 1e-7);  // zero up to cancellation noise in the difference
}

TEST_CASE("fit statistics reproduce the reference BIC values") {
  const auto f1 = fit_stats(-10958.29, 14, 8749, -1000.0);
  CHECK(std::fabs(f1.bic - 22043.4) < 0.5);
  const auto f2 = fit_stats(-3789.06, 14, 8590, -1000.0);
  CHECK(std::fabs(f2.bic - 7705.2) < 0.5);
  // rho2 is zero when the model does no better than the null with k = 0
  const auto f3 = fit_stats(-1000.0, 0, 100, -1000.0);
  CHECK(f3.adj_rho2 == doctest::Approx(0.0).epsilon(1e-14));
  CHECK_THROWS_AS(fit_stats(-10.0, 1, 10, 0.0), ConfigError);
}

TEST_CASE("likelihood ratio test anchors") {
  EstimationResult restricted, general;
  restricted.ll = -3789.06;
  restricted.fit.k = 14;
  general.ll = -3710.83;
  general.fit.k = 24;
  const auto t = lr_test(restricted, general);
  CHECK(t.statistic == doctest::Approx(156.46).epsilon(1e-10));
  CHECK(t.df == 10);
  CHECK(t.p_value < 1e-15);  // rejected at any conventional level

  general.ll = restricted.ll;
  const auto t0 = lr_test(restricted, general);
  CHECK(t0.statistic == 0.0);
  CHECK(t0.p_value == doctest::Approx(1.0));

  EstimationResult worse = general;
  worse.ll = restricted.ll - 1.0;
  CHECK_THROWS_AS(lr_test(restricted, worse), ConfigError);
  EstimationResult same_k = restricted;
  CHECK_THROWS_AS(lr_test(restricted, same_k), ConfigError);
}

TEST_CASE("chi-square anchor: 3.84 on one df sits at five percent") {
  EstimationResult r, g;
  r.ll = 0.0;
  r.fit.k = 1;
  g.ll = 1.92;
  g.fit.k = 2;
  const auto t = lr_test(r, g);
  CHECK(t.statistic == doctest::Approx(3.84));
  CHECK(t.p_value == doctest::Approx(0.05).epsilon(2e-3));
}

TEST_CASE("estimation is deterministic and thread-count invariant") {
  const auto sim = simulate_dataset(ckt::acceptance_dgp(40, 4, 70));
  const auto cm = compile_model(ckt::mmnl_model(), sim.schema);
  EstimationOptions opt;
  opt.draws = 50;
  opt.seed = 9;
  opt.max_iter = 200;
  opt.threads = 1;
  const auto r1 = maximize_ll(cm, sim.data, opt);
  const auto r2 = maximize_ll(cm, sim.data, opt);
  opt.threads = 8;
  const auto r8 = maximize_ll(cm, sim.data, opt);
  CHECK(r1.ll == r2.ll);
  CHECK(r1.ll == r8.ll);
  for (int i = 0; i < r1.params.n(); ++i) {
    CHECK(r1.params.value(i) == r2.params.value(i));
    CHECK(r1.params.value(i) == r8.params.value(i));
  }
}

TEST_CASE("stored fit statistics are recomputable") {
  const auto cm = compile_model(ckt::binary_asc_model(), ckt::binary_schema());
  const auto ds = ckt::binary_dataset(60, 40);
  const auto res = maximize_ll(cm, ds, {});
  const auto again = fit_stats(res.ll, res.fit.k, res.fit.n_obs, res.fit.null_ll);
  CHECK(res.fit.bic == again.bic);
  CHECK(res.fit.adj_rho2 == again.adj_rho2);
  CHECK(res.fit.null_ll == doctest::Approx(100.0 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("covariance: sandwich collapses to classical under the information identity") {
  // intercept-only logit: per-individual scores y - p; at the MLE,
  // sum g_n g_n' approaches -H as N grows, so the two match closely
  const auto cm = compile_model(ckt::binary_asc_model(), ckt::binary_schema());
  const auto ds = ckt::binary_dataset(600, 400);
  const auto res = maximize_ll(cm, ds, {});
  REQUIRE(res.cov_classical.rows() == 1);
  // analytic classical variance: 1 / (N p (1-p))
  const double expect = 1.0 / (1000 * 0.6 * 0.4);
  CHECK(res.cov_classical(0, 0) == doctest::Approx(expect).epsilon(1e-4));
  CHECK(res.cov_robust(0, 0) == doctest::Approx(res.cov_classical(0, 0)).epsilon(1e-3));
}

TEST_CASE("sandwich assembly: scalar arithmetic") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(1, 1);       // -H = I, classical = 1
  Eigen::MatrixXd b = 4.0 * Eigen::MatrixXd::Identity(1, 1);
  CHECK(sandwich_covariance(h, b)(0, 0) == doctest::Approx(4.0));
  // B = -H collapses the sandwich onto the classical matrix
  CHECK(sandwich_covariance(h, h)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("null log-likelihood is an explicit, overridable input") {
  const auto cm = compile_model(ckt::binary_asc_model(), ckt::binary_schema());
  const auto ds = ckt::binary_dataset(60, 40);
  EstimationOptions opt;
  opt.null_ll = -123.0;
  const auto res = maximize_ll(cm, ds, opt);
  CHECK(res.fit.null_ll == -123.0);
  CHECK(res.fit.adj_rho2 ==
        doctest::Approx(1.0 - (res.ll - res.fit.k) / -123.0).epsilon(1e-14));
}

TEST_CASE("non-converged runs come back flagged, not thrown") {
  const auto sim = simulate_dataset(ckt::acceptance_dgp(30, 3, 71));
  const auto cm = compile_model(ckt::mnl_model(), sim.schema);
  EstimationOptions opt;
  opt.max_iter = 1;
  const auto res = maximize_ll(cm, sim.data, opt);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 1);
}

TEST_CASE("start overrides must name known free parameters") {
  const auto cm = compile_model(ckt::mnl_model(), ckt::study_schema());
  const auto sim = simulate_dataset(ckt::acceptance_dgp(5, 2, 72));
  EstimationOptions opt;
  opt.start["nope"] = 1.0;
  CHECK_THROWS_AS(maximize_ll(cm, sim.data, opt), ConfigError);
}

TEST_CASE("result json round-trips the parameter vector") {
  const auto cm = compile_model(ckt::binary_asc_model(), ckt::binary_schema());
  const auto res = maximize_ll(cm, ckt::binary_dataset(70, 30), {});
  const auto j = result_json(res);
  const auto back = result_from_json(j, cm);
  CHECK(back.ll == res.ll);
  CHECK(back.params.get("asc_b") == res.params.get("asc_b"));
  CHECK(back.cov_robust(0, 0) == doctest::Approx(res.cov_robust(0, 0)).epsilon(1e-12));
}

}  // TEST_SUITE
