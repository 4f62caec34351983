#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "ck/error.hpp"
#include "ck/mixing.hpp"
#include "ck/model.hpp"

using namespace ck;

TEST_SUITE("mixing") {

TEST_CASE("mlhs draws form a shifted, shuffled lattice") {
  const int R = 16;
  const auto dm = mlhs_draws(3, 2, R, 42);
  for (std::size_t n = 0; n < 3; ++n) {
    for (int d = 0; d < 2; ++d) {
      auto block = dm.dim_block(n, d);
      std::vector<double> sorted(block.begin(), block.end());
      std::sort(sorted.begin(), sorted.end());
      for (int i = 0; i < R; ++i) {
        CHECK(sorted[i] > 0.0);
        CHECK(sorted[i] < 1.0);
        if (i > 0)
          CHECK(sorted[i] - sorted[i - 1] == doctest::Approx(1.0 / R).epsilon(1e-12));
      }
      // mean of a shifted lattice lies within 1/(2R) of one half
      double mean = 0.0;
      for (double v : block) mean += v;
      mean /= R;
      CHECK(mean > 0.5 - 1.0 / (2.0 * R));
      CHECK(mean < 0.5 + 1.0 / (2.0 * R));
    }
  }
}

TEST_CASE("mlhs with R=2: sorted values are {u, u+1/2}") {
  const auto dm = mlhs_draws(1, 1, 2, 7);
  double lo = std::min(dm.xi(0, 0, 0), dm.xi(0, 0, 1));
  double hi = std::max(dm.xi(0, 0, 0), dm.xi(0, 0, 1));
  CHECK(lo > 0.0);
  CHECK(lo < 0.5);
  CHECK(hi == doctest::Approx(lo + 0.5).epsilon(1e-15));
}

TEST_CASE("draw blocks are index-keyed: batch equals alone") {
  const auto big = mlhs_draws(5, 3, 8, 31);
  const auto blk = DrawMatrix::block(31, 2, 3, 8);
  for (int d = 0; d < 3; ++d)
    for (int r = 0; r < 8; ++r)
      CHECK(big.xi(2, d, r) == blk[static_cast<std::size_t>(d) * 8 + r]);
}

TEST_CASE("transform anchors") {
  CHECK(transform_draw({MixingKind::NegLogUniform, 0.0, 0.0, {}}, 0.37) == doctest::Approx(-1.0));
  CHECK(transform_draw({MixingKind::Normal, 1.5, 2.0, {}}, 0.5) ==
        doctest::Approx(1.5).epsilon(1e-12));
  CHECK(transform_draw({MixingKind::NegLogUniform, 0.0, std::log(2.0), {}}, 1.0) ==
        doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(transform_draw({MixingKind::Fixed, -3.25, 0.0, {}}, 0.9) == -3.25);
  CHECK_THROWS_AS(transform_draw({MixingKind::Normal, 0.0, 1.0, {}}, 0.0), NumericError);
  CHECK_THROWS_AS(transform_draw({MixingKind::NegLogUniform, 0.0, 1.0, {}}, 1.5), NumericError);
}

TEST_CASE("log-uniform transforms never change sign") {
  for (double xi = 1e-6; xi < 1.0; xi += 0.013) {
    CHECK(transform_draw({MixingKind::NegLogUniform, 1.3, -2.0, {}}, xi) < 0.0);
    CHECK(transform_draw({MixingKind::PosLogUniform, -4.0, 6.0, {}}, xi) > 0.0);
  }
}

TEST_CASE("mixture_mean anchors and quadrature oracle") {
  CHECK(mixture_mean({MixingKind::Normal, 0.0, 1.0, {}}) == 0.0);
  CHECK(mixture_mean({MixingKind::NegLogUniform, 0.0, 0.0, {}}) == doctest::Approx(-1.0));
  CHECK(mixture_mean({MixingKind::NegLogUniform, 0.0, 1.0, {}}) ==
        doctest::Approx(-(std::exp(1.0) - 1.0)).epsilon(1e-12));

  // Simpson quadrature over xi as an independent oracle
  auto quad_mean = [](const MixingSpec& spec) {
    const int n = 2000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double xi = std::clamp(static_cast<double>(i) / n, 1e-12, 1.0 - 1e-12);
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      acc += w * transform_draw(spec, xi);
    }
    return acc / (3.0 * n);
  };
  const MixingSpec nlu{MixingKind::NegLogUniform, 0.4, 1.7, {}};
  CHECK(mixture_mean(nlu) == doctest::Approx(quad_mean(nlu)).epsilon(1e-7));
  const MixingSpec plu{MixingKind::PosLogUniform, -1.1, 2.3, {}};
  CHECK(mixture_mean(plu) == doctest::Approx(quad_mean(plu)).epsilon(1e-7));
}

TEST_CASE("coefficients sharing a base id consume one xi column") {
  ModelSpec spec;
  spec.name = "shared";
  spec.alternatives = {"a", "b", "c"};
  spec.coefficients.push_back(
      {.name = "b_ivt_b", .mixing = MixingKind::NegLogUniform, .shared_base = "ivt",
       .shared_spread = "ivt"});
  spec.coefficients.push_back(
      {.name = "b_ivt_c", .mixing = MixingKind::NegLogUniform, .shared_base = "ivt",
       .shared_spread = "ivt"});
  spec.coefficients.push_back({.name = "b_cost", .mixing = MixingKind::NegLogUniform});
  Schema schema;
  schema.alternatives = {"a", "b", "c"};
  schema.attributes = {"ivt", "cost"};
  spec.terms = {{.coef = "b_ivt_b", .alt = "b", .attribute = "ivt"},
                {.coef = "b_ivt_c", .alt = "c", .attribute = "ivt"},
                {.coef = "b_cost", .alt = "a", .attribute = "cost"},
                {.coef = "b_cost", .alt = "b", .attribute = "cost"}};
  const auto cm = compile_model(spec, schema);
  CHECK(cm.n_dims == 2);  // one shared ivt column + one cost column
  CHECK(cm.slots[0].xi_dim == cm.slots[1].xi_dim);
  CHECK(cm.slots[2].xi_dim != cm.slots[0].xi_dim);
  // one generic spread parameter across the shared pair, two bounds
  CHECK(cm.slots[0].spread[0] == cm.slots[1].spread[0]);
  CHECK(cm.start.has("ivt.b"));
  CHECK(cm.start.has("b_ivt_b.a"));
  CHECK(cm.start.has("b_ivt_c.a"));

  // resolved coefficients move together through the shared draw
  auto p = cm.start;
  p.set("b_ivt_b.a", -1.0);
  p.set("b_ivt_c.a", -2.0);
  p.set("ivt.b", 1.0);
  p.set("b_cost.a", -1.0);
  p.set("b_cost.b", 0.5);
  std::vector<double> xi = {0.3, 0.9};
  std::vector<double> beta(3);
  cm.resolve_coefs(p, 0, xi, beta);
  CHECK(beta[0] == doctest::Approx(-std::exp(-1.0 + 0.3)).epsilon(1e-14));
  CHECK(beta[1] == doctest::Approx(-std::exp(-2.0 + 0.3)).epsilon(1e-14));
  CHECK(beta[1] / beta[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("empirical mlhs mean matches mixture_mean within half a percent") {
  const int R = 10000;
  const auto dm = mlhs_draws(1, 3, R, 2024);
  const MixingSpec specs[] = {{MixingKind::Normal, 1.2, 0.8, {}},
                              {MixingKind::NegLogUniform, -0.5, 1.5, {}},
                              {MixingKind::PosLogUniform, 0.3, 0.9, {}}};
  for (int d = 0; d < 3; ++d) {
    double mean = 0.0;
    for (int r = 0; r < R; ++r) mean += transform_draw(specs[d], dm.xi(0, d, r));
    mean /= R;
    CHECK(mean == doctest::Approx(mixture_mean(specs[d])).epsilon(0.005));
  }
}

}  // TEST_SUITE
