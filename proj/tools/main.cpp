#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ck/error.hpp"
#include "ck/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out = ".";
  std::string model;
  std::optional<std::uint64_t> seed;
  std::optional<int> draws;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool config_required = true) {
  auto* c = cmd->add_option("--config", a.config, "config file (JSON)");
  if (config_required) c->required();
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--model", a.model, "model spec override (JSON path)");
  cmd->add_option("--seed", a.seed, "seed override");
  cmd->add_option("--draws", a.draws, "draw count override");
  cmd->add_option("--threads", a.threads, "worker thread cap");
}

ck::RunConfig load_with_overrides(const CommonArgs& a) {
  ck::RunConfig cfg = ck::load_run_config(a.config);
  if (!a.model.empty()) cfg.model_path = a.model;
  if (a.seed) {
    cfg.split_seed = *a.seed;
    cfg.estimation.seed = *a.seed;
  }
  if (a.draws) {
    cfg.estimation.draws = *a.draws;
    cfg.predict_draws = *a.draws;
  }
  if (a.threads) cfg.estimation.threads = *a.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"choicekit: discrete-choice estimation and forecasting toolkit"};
  app.require_subcommand(1);

  CommonArgs sim_args, split_args, est_args, pred_args, eval_args, report_args;
  std::string pred_case = "case1";
  std::string pred_cond = "none";

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset from a DGP config");
  add_common(sim, sim_args);

  auto* split = app.add_subcommand("split", "three-way split of a dataset");
  add_common(split, split_args);

  auto* est = app.add_subcommand("estimate", "maximum (simulated) likelihood estimation");
  add_common(est, est_args);

  auto* pred = app.add_subcommand("predict", "per-observation choice probabilities");
  add_common(pred, pred_args);
  pred->add_option("--case", pred_case, "case1|case2|case3")->required();
  pred->add_option("--conditioning", pred_cond, "none|posterior");

  auto* eval = app.add_subcommand("evaluate", "metrics over stored prediction tables");
  add_common(eval, eval_args);

  auto* rep = app.add_subcommand("report", "print the metric grid");
  add_common(rep, report_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      ck::cmd_simulate(sim_args.config, sim_args.out, sim_args.seed);
    } else if (split->parsed()) {
      ck::cmd_split(load_with_overrides(split_args), split_args.out);
    } else if (est->parsed()) {
      ck::cmd_estimate(load_with_overrides(est_args), est_args.out);
    } else if (pred->parsed()) {
      ck::cmd_predict(load_with_overrides(pred_args), pred_args.out,
                      ck::pred_case_from_string(pred_case),
                      ck::conditioning_from_string(pred_cond));
    } else if (eval->parsed()) {
      ck::cmd_evaluate(load_with_overrides(eval_args), eval_args.out);
    } else if (rep->parsed()) {
      std::fputs(ck::cmd_report(load_with_overrides(report_args), report_args.out).c_str(),
                 stdout);
    }
  } catch (const ck::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
