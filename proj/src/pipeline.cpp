#include "ck/pipeline.hpp"

#include <algorithm>
#include <filesystem>

#include "ck/error.hpp"
#include "ck/io.hpp"
#include "ck/parallel.hpp"
#include "ck/synth.hpp"

namespace ck {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute() || base.empty()) return path;
  return (fs::path(base) / p).string();
}

nlohmann::json parse_json_file(const std::string& path, const char* what) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + " '" + path + "': " + e.what());
  }
}

void ensure_outdir(const std::string& outdir) {
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + outdir + "'");
}

}  // namespace

Schema parse_schema(const nlohmann::json& j) {
  Schema s;
  s.alternatives = j.at("alternatives").get<std::vector<std::string>>();
  if (j.contains("attributes")) s.attributes = j["attributes"].get<std::vector<std::string>>();
  if (j.contains("covariates")) s.covariates = j["covariates"].get<std::vector<std::string>>();
  return s;
}

Schema load_schema(const std::string& path) {
  return parse_schema(parse_json_file(path, "schema"));
}

RunConfig load_run_config(const std::string& path) {
  const auto j = parse_json_file(path, "run config");
  RunConfig cfg;
  cfg.base_dir = fs::path(path).parent_path().string();
  cfg.dataset_path = resolve(cfg.base_dir, j.at("dataset").get<std::string>());
  if (!j.contains("schema")) throw ConfigError("run config: 'schema' is required");
  if (j["schema"].is_string())
    cfg.schema = load_schema(resolve(cfg.base_dir, j["schema"].get<std::string>()));
  else
    cfg.schema = parse_schema(j["schema"]);
  if (j.contains("model") && !j["model"].get<std::string>().empty())
    cfg.model_path = resolve(cfg.base_dir, j["model"].get<std::string>());
  if (j.contains("split")) {
    cfg.split_fraction = j["split"].value("fraction", 0.2);
    cfg.split_seed = j["split"].value("seed", 1ULL);
  }
  if (j.contains("estimation")) {
    const auto& e = j["estimation"];
    cfg.estimation.draws = e.value("draws", 500);
    cfg.estimation.seed = e.value("seed", 1ULL);
    cfg.estimation.tol = e.value("tol", 1e-6);
    cfg.estimation.max_iter = e.value("max_iter", 500);
    cfg.estimation.threads = e.value("threads", 0);
    cfg.estimation.fd_gradient = e.value("fd_gradient", false);
    if (e.contains("null_ll") && !e["null_ll"].is_null())
      cfg.estimation.null_ll = e["null_ll"].get<double>();
    if (e.contains("start"))
      for (const auto& [name, v] : e["start"].items())
        cfg.estimation.start[name] = v.get<double>();
  }
  if (j.contains("prediction")) cfg.predict_draws = j["prediction"].value("draws", 0);
  if (j.contains("evaluation") && j["evaluation"].contains("share_groups"))
    for (const auto& [name, alts] : j["evaluation"]["share_groups"].items())
      cfg.share_groups[name] = alts.get<std::vector<std::string>>();
  return cfg;
}

std::string estimates_path(const std::string& outdir, const std::string& model_name) {
  return (fs::path(outdir) / ("est_" + model_name + ".json")).string();
}

std::string prediction_path(const std::string& outdir, const std::string& model_name,
                            PredCase pcase, Conditioning cond) {
  return (fs::path(outdir) /
          ("pred_" + model_name + "_" + to_string(pcase) + "_" + to_string(cond) + ".csv"))
      .string();
}

void cmd_simulate(const std::string& dgp_path, const std::string& outdir,
                  std::optional<std::uint64_t> seed_override) {
  DgpSpec dgp = load_dgp_spec(dgp_path);
  if (seed_override) dgp.seed = *seed_override;
  ensure_outdir(outdir);
  const SimulatedData sim = simulate_dataset(dgp);
  const CompiledModel cm = compile_model(dgp.model, sim.schema);
  write_dataset(sim.data, (fs::path(outdir) / "data.csv").string());
  write_truth(sim, cm, (fs::path(outdir) / "truth.csv").string());
  nlohmann::json sj;
  sj["alternatives"] = sim.schema.alternatives;
  sj["attributes"] = sim.schema.attributes;
  sj["covariates"] = sim.schema.covariates;
  write_text_file((fs::path(outdir) / "schema.json").string(), sj.dump(2) + "\n");
}

void cmd_split(const RunConfig& cfg, const std::string& outdir) {
  ensure_outdir(outdir);
  const ChoiceDataset ds = load_dataset(cfg.dataset_path, cfg.schema);
  const SplitDataset split = split_dataset(ds, cfg.split_fraction, cfg.split_seed);
  write_dataset(split.estimation, (fs::path(outdir) / "estimation.csv").string());
  write_dataset(split.new_individuals, (fs::path(outdir) / "new_individuals.csv").string());
  write_dataset(split.last_choices, (fs::path(outdir) / "last_choices.csv").string());
  nlohmann::json m;
  m["fraction"] = split.holdout_fraction;
  m["seed"] = split.split_seed;
  m["estimation"] = {{"individuals", split.estimation.n_individuals()},
                     {"observations", split.estimation.n_obs()},
                     {"file", "estimation.csv"}};
  m["new_individuals"] = {{"individuals", split.new_individuals.n_individuals()},
                          {"observations", split.new_individuals.n_obs()},
                          {"file", "new_individuals.csv"}};
  m["last_choices"] = {{"individuals", split.last_choices.n_individuals()},
                       {"observations", split.last_choices.n_obs()},
                       {"file", "last_choices.csv"}};
  write_text_file((fs::path(outdir) / "split_manifest.json").string(), m.dump(2) + "\n");
}

SplitDataset load_split(const RunConfig& cfg, const std::string& outdir) {
  SplitDataset split;
  const auto dir = fs::path(outdir);
  split.estimation = load_dataset((dir / "estimation.csv").string(), cfg.schema);
  // header-only when the holdout fraction retains everyone
  split.new_individuals = load_dataset((dir / "new_individuals.csv").string(), cfg.schema);
  split.last_choices = load_dataset((dir / "last_choices.csv").string(), cfg.schema);
  const auto m = parse_json_file((dir / "split_manifest.json").string(), "split manifest");
  split.holdout_fraction = m.at("fraction").get<double>();
  split.split_seed = m.at("seed").get<std::uint64_t>();
  return split;
}

void cmd_estimate(const RunConfig& cfg, const std::string& outdir) {
  if (cfg.model_path.empty()) throw ConfigError("run config: 'model' is required for estimate");
  ensure_outdir(outdir);
  const ModelSpec spec = load_model_spec(cfg.model_path);
  const CompiledModel cm = compile_model(spec, cfg.schema);
  const ChoiceDataset est =
      load_dataset((fs::path(outdir) / "estimation.csv").string(), cfg.schema);
  EstimationOptions opt = cfg.estimation;
  opt.threads = resolve_threads(opt.threads);
  const EstimationResult res = maximize_ll(cm, est, opt);
  write_text_file(estimates_path(outdir, spec.name), result_json(res).dump(2) + "\n");
  write_text_file((fs::path(outdir) / ("est_" + spec.name + ".txt")).string(),
                  result_table(res));
}

void cmd_predict(const RunConfig& cfg, const std::string& outdir, PredCase pcase,
                 Conditioning cond) {
  if (cfg.model_path.empty()) throw ConfigError("run config: 'model' is required for predict");
  ensure_outdir(outdir);
  const ModelSpec spec = load_model_spec(cfg.model_path);
  const CompiledModel cm = compile_model(spec, cfg.schema);
  const auto est_file = estimates_path(outdir, spec.name);
  const EstimationResult res =
      result_from_json(parse_json_file(est_file, "estimates"), cm);
  const SplitDataset split = load_split(cfg, outdir);

  PredictOptions opt;
  opt.draws = cfg.predict_draws > 0 ? cfg.predict_draws : (res.draws > 0 ? res.draws : 500);
  opt.seed = res.seed;  // conditionals must reuse the estimation draw streams
  opt.threads = resolve_threads(cfg.estimation.threads);
  const PredictionTable pt = predict_table(cm, res.params, split, pcase, cond, opt);
  const auto csv = prediction_path(outdir, spec.name, pcase, cond);
  write_prediction_table(pt, csv);
  write_text_file(csv.substr(0, csv.size() - 4) + ".meta.json",
                  prediction_meta_json(pt).dump(2) + "\n");
}

namespace {

MetricReport build_report(const RunConfig& cfg, const std::string& outdir) {
  const SplitDataset split = load_split(cfg, outdir);
  std::map<PredCase, std::vector<double>> truth;
  truth[PredCase::Case1] = observed_shares(split.estimation);
  truth[PredCase::Case3] = observed_shares(split.last_choices);
  if (!split.new_individuals.individuals.empty())
    truth[PredCase::Case2] = observed_shares(split.new_individuals);
  else
    truth[PredCase::Case2] = std::vector<double>(cfg.schema.alternatives.size(), 0.0);

  std::vector<std::string> metas;
  for (const auto& entry : fs::directory_iterator(outdir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("pred_", 0) == 0 && name.size() > 10 &&
        name.substr(name.size() - 10) == ".meta.json")
      metas.push_back(entry.path().string());
  }
  std::sort(metas.begin(), metas.end());
  if (metas.empty()) throw ConfigError("no prediction tables found in '" + outdir + "'");

  std::vector<PredictionTable> tables;
  for (const auto& meta : metas) {
    const std::string csv = meta.substr(0, meta.size() - 10) + ".csv";
    tables.push_back(read_prediction_table(csv, meta));
  }

  ShareGroups groups;
  const ShareGroups* groups_ptr = nullptr;
  if (!cfg.share_groups.empty()) {
    for (const auto& [name, alts] : cfg.share_groups) {
      groups.names.push_back(name);
      std::vector<int> members;
      for (const auto& a : alts) {
        const int ai = cfg.schema.alt_index(a);
        if (ai < 0) throw ConfigError("share group '" + name + "': unknown alternative '" + a + "'");
        members.push_back(ai);
      }
      groups.groups.push_back(std::move(members));
    }
    groups_ptr = &groups;
  }
  return assemble_report(tables, truth, groups_ptr);
}

}  // namespace

void cmd_evaluate(const RunConfig& cfg, const std::string& outdir) {
  const MetricReport rep = build_report(cfg, outdir);
  write_text_file((fs::path(outdir) / "metrics.csv").string(), metrics_csv(rep));
  write_text_file((fs::path(outdir) / "report.json").string(), report_json(rep).dump(2) + "\n");
}

std::string cmd_report(const RunConfig& cfg, const std::string& outdir) {
  const MetricReport rep = build_report(cfg, outdir);
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-28s %-6s %-10s %10s %10s %8s\n", "model", "case",
                "conditioning", "avgP", "rmse", "rows");
  out += buf;
  for (const auto& cell : rep.cells) {
    if (cell.missing) {
      std::snprintf(buf, sizeof(buf), "%-28s %-6s %-10s %10s %10s %8s\n", cell.model.c_str(),
                    to_string(cell.pcase).c_str(), to_string(cell.conditioning).c_str(), "-", "-",
                    "-");
    } else {
      std::snprintf(buf, sizeof(buf), "%-28s %-6s %-10s %10.4f %10.4f %8ld\n", cell.model.c_str(),
                    to_string(cell.pcase).c_str(), to_string(cell.conditioning).c_str(),
                    cell.avg_chosen, cell.rmse, cell.n_rows);
    }
    out += buf;
  }
  return out;
}

}  // namespace ck
