#ifndef CK_PIPELINE_HPP
#define CK_PIPELINE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ck/data.hpp"
#include "ck/estimation.hpp"
#include "ck/metrics.hpp"
#include "ck/prediction.hpp"

namespace ck {

// One config file drives split/estimate/predict/evaluate. Relative paths
// resolve against the config file's directory.
struct RunConfig {
  std::string base_dir;
  std::string dataset_path;
  Schema schema;
  std::string model_path;
  double split_fraction = 0.2;
  std::uint64_t split_seed = 1;
  EstimationOptions estimation;
  int predict_draws = 0;  // 0: use the estimation draw count
  std::map<std::string, std::vector<std::string>> share_groups;  // name -> alternatives
};

RunConfig load_run_config(const std::string& path);

Schema parse_schema(const nlohmann::json& j);
Schema load_schema(const std::string& path);

// Subcommand bodies; all throw ConfigError/NumericError on failure and write
// their outputs under `outdir`.
void cmd_simulate(const std::string& dgp_path, const std::string& outdir,
                  std::optional<std::uint64_t> seed_override);
void cmd_split(const RunConfig& cfg, const std::string& outdir);
void cmd_estimate(const RunConfig& cfg, const std::string& outdir);
void cmd_predict(const RunConfig& cfg, const std::string& outdir, PredCase pcase,
                 Conditioning cond);
void cmd_evaluate(const RunConfig& cfg, const std::string& outdir);
std::string cmd_report(const RunConfig& cfg, const std::string& outdir);  // rendered grid

// File layout helpers shared with tests.
std::string estimates_path(const std::string& outdir, const std::string& model_name);
std::string prediction_path(const std::string& outdir, const std::string& model_name,
                            PredCase pcase, Conditioning cond);

SplitDataset load_split(const RunConfig& cfg, const std::string& outdir);

}  // namespace ck

#endif
