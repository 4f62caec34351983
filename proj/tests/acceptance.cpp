// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy fits are shared across criteria; everything is seeded.
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ck/data.hpp"
#include "ck/error.hpp"
#include "ck/estimation.hpp"
#include "ck/io.hpp"
#include "ck/kernels.hpp"
#include "ck/metrics.hpp"
#include "ck/prediction.hpp"
#include "ck/rng.hpp"
#include "ck/synth.hpp"
#include "test_helpers.hpp"

using namespace ck;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %-24s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void info(const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] invariant:    %-24s %s\n", pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

int main() {
  const int threads = 2;

  // ---- 1. BIC anchors ----
  {
    const auto f1 = fit_stats(-10958.29, 14, 8749, -1.0e4);
    const auto f2 = fit_stats(-3789.06, 14, 8590, -1.0e4);
    const bool pass = std::fabs(f1.bic - 22043.4) < 0.5 && std::fabs(f2.bic - 7705.2) < 0.5;
    report(1, "BIC anchor", pass,
           fmt("k ln N - 2LL = %.2f vs 22043.4; %.2f vs 7705.2", f1.bic, f2.bic));
  }

  // ---- 2. class-share anchor ----
  {
    const auto cm = compile_model(ckt::lc_model(), ckt::study_schema());
    auto p = cm.start;
    p.set("alloc.c2", -0.5493);
    p.set("alloc.c3", -1.1075);
    const auto pi = class_allocation_probs(cm, p, std::vector<double>{0.0});
    const bool pass = std::fabs(pi[0] - 0.5242) < 1e-4 && std::fabs(pi[1] - 0.3026) < 1e-4 &&
                      std::fabs(pi[2] - 0.1732) < 1e-4;
    report(2, "class-share anchor", pass,
           fmt("softmax(0,-0.5493,-1.1075) = %.4f/%.4f/%.4f", pi[0], pi[1], pi[2]));
  }

  // ---- 3. split anchor ----
  {
    ChoiceDataset ds;
    ds.schema = ckt::binary_schema();
    for (int i = 0; i < 2147; ++i) {
      Individual ind;
      ind.id = "n" + std::to_string(i);
      for (int t = 0; t < 6; ++t) {
        Observation o;
        o.task = t + 1;
        o.avail = {1, 1};
        o.chosen = t % 2;
        ind.obs.push_back(o);
      }
      ds.individuals.push_back(ind);
    }
    const auto split = split_dataset(ds, 0.2, 4242);
    const bool pass = split.estimation.n_individuals() == 1718 &&
                      split.estimation.n_obs() == 8590 &&
                      split.new_individuals.n_individuals() == 429 &&
                      split.new_individuals.n_obs() == 2574 && split.last_choices.n_obs() == 1718;
    report(3, "split anchor", pass,
           fmt("2147x6 at 0.2 -> %zu/%zu, %zu/%zu, %zu", split.estimation.n_individuals(),
               split.estimation.n_obs(), split.new_individuals.n_individuals(),
               split.new_individuals.n_obs(), split.last_choices.n_obs()));
  }

  // ---- 4. LR anchor ----
  {
    EstimationResult restricted, general;
    restricted.ll = -3789.06;
    restricted.fit.k = 14;
    general.ll = -3710.83;
    general.fit.k = 24;
    const auto t = lr_test(restricted, general);
    const bool pass =
        std::fabs(t.statistic - 156.46) < 1e-9 && t.df == 10 && t.p_value < 1e-3 && t.p_value < 1e-15;
    report(4, "LR anchor", pass,
           fmt("statistic %.2f on %d df, p = %.3g (reject at 0.001)", t.statistic, t.df,
               t.p_value));
  }

  // ---- shared heavy fixtures: the acceptance DGP and its fits ----
  const auto dgp = ckt::acceptance_dgp(500, 8, 20260808);
  const auto sim = simulate_dataset(dgp);
  const auto split = split_dataset(sim.data, 0.2, 1);

  const auto cm_mnl = compile_model(ckt::mnl_model(), sim.schema);
  const auto cm_mmnl = compile_model(ckt::mmnl_model(), sim.schema);
  const auto cm_lc = compile_model(ckt::lc_model(), sim.schema);

  EstimationOptions eopt;
  eopt.draws = 500;
  eopt.seed = 1;
  eopt.threads = threads;
  const auto fit_mnl = maximize_ll(cm_mnl, split.estimation, eopt);
  const auto fit_mmnl = maximize_ll(cm_mmnl, split.estimation, eopt);
  const auto fit_lc = maximize_ll(cm_lc, split.estimation, eopt);

  PredictOptions popt;
  popt.draws = 500;
  popt.seed = 1;
  popt.threads = threads;

  // ---- 5. product-rule identity ----
  {
    const auto pt = predict_table(cm_mnl, fit_mnl.params, split, PredCase::Case1,
                                  Conditioning::None, popt);
    double sum = 0.0;
    for (const auto& row : pt.rows) sum += std::log(row.probs[row.chosen]);
    const bool plain_ok = std::fabs(sum - fit_mnl.ll) < 1e-10;

    const auto ptm = predict_table(cm_mmnl, fit_mmnl.params, split, PredCase::Case1,
                                   Conditioning::None, popt);
    double summ = 0.0;
    for (const auto& row : ptm.rows) summ += std::log(row.probs[row.chosen]);
    const double gap = std::fabs(summ - fit_mmnl.ll);
    const bool mixed_differs = gap > 1e-6;
    report(5, "product-rule identity", plain_ok && mixed_differs,
           fmt("plain |sum - LL| = %.2e; panel |sum - LL| = %.4f", std::fabs(sum - fit_mnl.ll),
               gap));
  }

  // ---- 6. conditional gain ----
  {
    auto avg = [&](const CompiledModel& cm, const EstimationResult& res, PredCase c,
                   Conditioning cond) {
      return avg_chosen_probability(predict_table(cm, res.params, split, c, cond, popt));
    };
    const double mmnl_u3 = avg(cm_mmnl, fit_mmnl, PredCase::Case3, Conditioning::None);
    const double mmnl_c3 = avg(cm_mmnl, fit_mmnl, PredCase::Case3, Conditioning::Posterior);
    const double lc_u3 = avg(cm_lc, fit_lc, PredCase::Case3, Conditioning::None);
    const double lc_c3 = avg(cm_lc, fit_lc, PredCase::Case3, Conditioning::Posterior);

    // case 2 has no history: the conditional-where-available pipeline falls
    // back to the unconditional table, so the gain is identically zero
    auto case2_conditional_mode = [&](const CompiledModel& cm, const EstimationResult& res) {
      try {
        return avg_chosen_probability(
            predict_table(cm, res.params, split, PredCase::Case2, Conditioning::Posterior, popt));
      } catch (const ConfigError&) {
        return avg_chosen_probability(
            predict_table(cm, res.params, split, PredCase::Case2, Conditioning::None, popt));
      }
    };
    const double mmnl_u2 = avg(cm_mmnl, fit_mmnl, PredCase::Case2, Conditioning::None);
    const double mmnl_d2 = std::fabs(case2_conditional_mode(cm_mmnl, fit_mmnl) - mmnl_u2);
    const double lc_u2 = avg(cm_lc, fit_lc, PredCase::Case2, Conditioning::None);
    const double lc_d2 = std::fabs(case2_conditional_mode(cm_lc, fit_lc) - lc_u2);

    const bool pass = (mmnl_c3 - mmnl_u3 >= 0.02) && (lc_c3 - lc_u3 >= 0.02) && mmnl_d2 < 0.01 &&
                      lc_d2 < 0.01;
    report(6, "conditional gain", pass,
           fmt("case3 gain: mmnl %+.4f, lc %+.4f (need >= 0.02); case2 delta: %.1e, %.1e",
               mmnl_c3 - mmnl_u3, lc_c3 - lc_u3, mmnl_d2, lc_d2));
  }

  // ---- 7. MNL share recovery ----
  {
    const auto pt = predict_table(cm_mnl, fit_mnl.params, split, PredCase::Case1,
                                  Conditioning::None, popt);
    const auto truth = observed_shares(split.estimation);
    const double rmse = rmse_shares(pt, truth);
    report(7, "MNL share recovery", rmse < 1e-4,
           fmt("estimation-sample share RMSE = %.2e (< 1e-4)", rmse));
  }

  // ---- 8. parameter recovery over 20 seeds ----
  {
    const auto cm_true = compile_model(dgp.model, sim.schema);
    int pass_seeds = 0;
    std::string worst;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto d = dgp;
      d.seed = 52000 + seed;
      const auto s = simulate_dataset(d);
      EstimationOptions opt = eopt;
      opt.seed = seed;
      const auto res = maximize_ll(cm_true, s.data, opt);
      bool ok = res.converged;
      const auto& free = res.params.free_indices();
      for (std::size_t k = 0; k < free.size() && ok; ++k) {
        const auto& name = res.params.name(free[k]);
        const double z = std::fabs(res.params.value(free[k]) - d.true_params.at(name)) /
                         res.se_robust(static_cast<int>(k));
        if (z > 3.0) {
          ok = false;
          worst = fmt("seed %llu: %s at %.2f sigma", (unsigned long long)d.seed, name.c_str(), z);
        }
      }
      pass_seeds += ok;
    }
    report(8, "parameter recovery", pass_seeds >= 18,
           fmt("%d/20 seeds recover every parameter within 3 robust SEs%s%s", pass_seeds,
               worst.empty() ? "" : "; first miss: ", worst.c_str()));
  }

  // ---- 9. kernel and limit identities ----
  {
    // lambda = 1 nested logit equals MNL
    Rng rng(606);
    bool nl_ok = true;
    NestPartition nests;
    nests.groups = {{0, 1}, {2}};
    nests.lambda = {1.0, 1.0};
    const std::vector<std::uint8_t> avail = {1, 1, 1};
    for (int rep = 0; rep < 200; ++rep) {
      const std::vector<double> v = {rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-4, 4)};
      const auto a = nl_probs(v, avail, nests);
      const auto b = mnl_probs(v, avail);
      for (int j = 0; j < 3; ++j)
        if (std::fabs(a[j] - b[j]) > 1e-12) nl_ok = false;
    }

    // zero spread mixture equals the plain model
    auto pm = cm_mmnl.start;
    pm.set("asc_bus.mu", 0.8);
    pm.set("asc_bus.sigma", 0.0);
    pm.set("asc_walk", -0.5);
    pm.set("b_cost.a", std::log(0.9));
    pm.set("b_cost.b", 0.0);
    auto pp = cm_mnl.start;
    pp.set("asc_bus", 0.8);
    pp.set("asc_walk", -0.5);
    pp.set("b_cost", -0.9);
    const auto bdm = bind_data(cm_mmnl, split.estimation);
    const auto bdp = bind_data(cm_mnl, split.estimation);
    const auto dm = mlhs_draws(bdm.ind.size(), cm_mmnl.n_dims, 50, 3);
    const double gap = std::fabs(ll_mixed(bdm, pm, dm, threads).ll -
                                 ll_plain(bdp, pp, threads).ll);
    const bool spread0_ok = gap < 1e-10;

    // analytic score against central finite differences
    auto p = fit_mnl.params;
    p.set("asc_bus", 0.3);
    p.set("asc_walk", -0.2);
    p.set("b_cost", -0.5);
    const auto ga = analytic_gradient(bdp, p, nullptr, threads);
    const auto gf = fd_gradient(bdp, p, nullptr, threads);
    double gmax = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i)
      gmax = std::max(gmax, std::fabs(ga[i] - gf[i]));
    const bool grad_ok = gmax < 1e-6;

    report(9, "kernel/limit identities", nl_ok && spread0_ok && grad_ok,
           fmt("nl(1)=mnl %s; |spread0 - plain| = %.1e; score vs FD max diff = %.1e",
               nl_ok ? "ok" : "FAIL", gap, gmax));
  }

  // ---- 10. determinism ----
  {
    // (a) the full CLI pipeline twice, byte-identical outputs
    const std::string base = ckt::temp_dir("acceptance_determinism");
    const std::string cfg = std::string(CK_CONFIG_DIR);
    bool bytes_ok = true;
    std::string detail;
    for (const std::string run : {"r1", "r2"}) {
      const std::string out = base + "/" + run;
      fs::create_directories(out);
      if (run_cli("simulate --config " + cfg + "/dgp_small.json --out " + out) != 0 ||
          std::system(("cp " + cfg + "/run_small.json " + out + "/run.json").c_str()) != 0 ||
          run_cli("split --config " + out + "/run.json --out " + out) != 0) {
        bytes_ok = false;
        break;
      }
      for (const std::string m : {"mnl", "mnl_socios", "mmnl", "mmnl_socios", "lc",
                                  "lc_socios_util", "lc_socios_alloc"}) {
        if (run_cli("estimate --config " + out + "/run.json --out " + out + " --model " + cfg +
                    "/models/" + m + ".json") != 0)
          bytes_ok = false;
        for (const std::string c : {"case1", "case2", "case3"})
          if (run_cli("predict --config " + out + "/run.json --out " + out + " --model " + cfg +
                      "/models/" + m + ".json --case " + c) != 0)
            bytes_ok = false;
      }
      for (const std::string m : {"mmnl", "lc"})
        if (run_cli("predict --config " + out + "/run.json --out " + out + " --model " + cfg +
                    "/models/" + m + ".json --case case3 --conditioning posterior") != 0)
          bytes_ok = false;
      if (run_cli("evaluate --config " + out + "/run.json --out " + out) != 0) bytes_ok = false;
    }
    std::size_t compared = 0;
    if (bytes_ok) {
      for (const auto& entry : fs::recursive_directory_iterator(base + "/r1")) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), base + "/r1");
        const auto other = fs::path(base) / "r2" / rel;
        if (!fs::exists(other) ||
            read_text_file(entry.path().string()) != read_text_file(other.string())) {
          bytes_ok = false;
          detail = "differs: " + rel.string();
          break;
        }
        ++compared;
      }
    }

    // (b) thread-count invariance of the estimator
    EstimationOptions o1 = eopt;
    o1.draws = 100;
    o1.threads = 1;
    EstimationOptions o8 = o1;
    o8.threads = 8;
    const auto r1 = maximize_ll(cm_mmnl, split.estimation, o1);
    const auto r8 = maximize_ll(cm_mmnl, split.estimation, o8);
    bool threads_ok = r1.ll == r8.ll;
    for (int i = 0; i < r1.params.n(); ++i)
      if (r1.params.value(i) != r8.params.value(i)) threads_ok = false;

    report(10, "determinism", bytes_ok && threads_ok,
           fmt("pipeline twice: %zu files byte-identical%s%s; threads 1 vs 8: LL %s", compared,
               detail.empty() ? "" : ", ", detail.c_str(),
               threads_ok ? "and estimates identical" : "DIFFER"));
  }

  // ---- 11. metric identities ----
  {
    Rng rng(808);
    bool ok = true;
    std::string detail = "ok";
    for (int rep = 0; rep < 20 && ok; ++rep) {
      PredictionTable pt;
      pt.model = "m";
      pt.alternatives = {"a", "b", "c"};
      for (int i = 0; i < 200; ++i) {
        std::vector<double> p(3);
        double sum = 0.0;
        for (auto& v : p) sum += (v = rng.uniform(0.01, 1.0));
        for (auto& v : p) v /= sum;
        pt.rows.push_back({"id" + std::to_string(i % 40), 1 + i / 40, p,
                           static_cast<int>(rng.below(3))});
      }
      const auto t = tpr(pt);
      std::vector<long> count(3, 0);
      for (const auto& row : pt.rows) count[row.chosen]++;
      double weighted = 0.0;
      for (int j = 0; j < 3; ++j)
        if (t[j]) weighted += *t[j] * count[j] / static_cast<double>(pt.rows.size());
      if (std::fabs(avg_chosen_probability(pt) - weighted) > 1e-12) {
        ok = false;
        detail = "tpr-share identity violated";
      }
      for (const auto& row : pt.rows) {
        double sum = 0.0;
        for (double v : row.probs) sum += v;
        if (std::fabs(sum - 1.0) > 1e-10) ok = false;
      }
    }
    // posterior weights normalize on the shared fixture
    const auto bd = bind_data(cm_mmnl, split.estimation);
    const auto block = DrawMatrix::block(1, 0, cm_mmnl.n_dims, 200);
    const auto w = posterior_draw_weights(cm_mmnl, fit_mmnl.params, bd.ind[0], block, 200);
    double wsum = 0.0;
    for (double v : w) wsum += v;
    if (std::fabs(wsum - 1.0) > 1e-12) {
      ok = false;
      detail = "posterior weights do not normalize";
    }
    report(11, "metric identities", ok, detail);
  }

  // ---- supplementary spec invariants on the shared fixture ----
  {
    // posterior-mean coefficients track the true individual coefficients
    const auto bd = bind_data(cm_mmnl, split.estimation);
    const int slot = cm_mmnl.slot_index("asc_bus");
    std::vector<double> post_mean, truth;
    for (std::size_t i = 0; i < bd.ind.size(); ++i) {
      const auto block =
          DrawMatrix::block(eopt.seed, static_cast<std::uint64_t>(i), cm_mmnl.n_dims, 500);
      const auto w = posterior_draw_weights(cm_mmnl, fit_mmnl.params, bd.ind[i], block, 500);
      double m = 0.0;
      std::vector<double> xi(cm_mmnl.n_dims), beta(cm_mmnl.n_slots);
      for (int r = 0; r < 500; ++r) {
        for (int d = 0; d < cm_mmnl.n_dims; ++d)
          xi[d] = block[static_cast<std::size_t>(d) * 500 + r];
        cm_mmnl.resolve_coefs(fit_mmnl.params, 0, xi, beta);
        m += w[r] * beta[slot];
      }
      post_mean.push_back(m);
      const int n = sim.data.find_individual(split.estimation.individuals[i].id);
      truth.push_back(sim.true_beta[n][slot]);
    }
    const double corr = pearson(post_mean, truth);
    info("posterior-mean tracking", corr > 0.7,
         fmt("corr(posterior mean, true beta_n) = %.3f (> 0.7)", corr));
  }
  {
    // every true-nonzero parameter of the mixture fit is detectable at N=500
    double min_t = 1e300;
    std::string argmin;
    const auto& free = fit_mmnl.params.free_indices();
    for (std::size_t k = 0; k < free.size(); ++k) {
      const double t = std::fabs(fit_mmnl.params.value(free[k])) /
                       fit_mmnl.se_robust(static_cast<int>(k));
      if (t < min_t) {
        min_t = t;
        argmin = fit_mmnl.params.name(free[k]);
      }
    }
    info("robust t-ratios", min_t > 2.0,
         fmt("smallest |rob t| = %.1f (%s) > 2", min_t, argmin.c_str()));
  }

  std::printf("%s\n", g_failures == 0 ? "acceptance: all criteria satisfied"
                                      : "acceptance: FAILURES present");
  return g_failures == 0 ? 0 : 1;
}
