// Command-line driver for the satisfaction pipeline.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "satislice/error.hpp"
#include "satislice/io.hpp"
#include "satislice/pipeline.hpp"

namespace {

using namespace satislice;

struct Overrides {
  std::string config;
  std::optional<std::string> as_of;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> folds;
  std::optional<std::string> model;
  std::vector<double> lambda;
  bool clamp = false;
  std::optional<std::string> tokenizer;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "pipeline config (JSON)")->required();
  cmd->add_option("--as-of", o.as_of, "cut-off timestamp for activity and training features");
  cmd->add_option("--seed", o.seed, "CV shuffle seed");
  cmd->add_option("--folds", o.folds, "CV folds");
  cmd->add_option("--model", o.model, "ols, ridge, m5p or all");
  cmd->add_option("--lambda", o.lambda, "ridge penalty grid");
  cmd->add_flag("--clamp", o.clamp, "clamp predictions to [1, 5]");
  cmd->add_option("--tokenizer", o.tokenizer, "max_match or whitespace");
  cmd->add_option("--out", o.out, "output directory");
}

PipelineConfig resolve_config(const Overrides& o) {
  PipelineConfig c = PipelineConfig::load(o.config);
  try {
    if (o.as_of) c.as_of = parse_timestamp(*o.as_of);
  } catch (const DataError& e) {
    throw ConfigError(std::string("--as-of: ") + e.what());
  }
  if (o.seed) c.seed = *o.seed;
  if (o.folds) c.folds = *o.folds;
  if (o.model) {
    if (*o.model == "all") {
      c.models = {ModelKind::ols, ModelKind::ridge, ModelKind::m5p};
    } else {
      c.models = {parse_model_kind(*o.model)};
      c.regional_model = c.models.front();
    }
  }
  if (!o.lambda.empty()) c.lambda_grid = o.lambda;
  if (o.clamp) c.clamp = true;
  if (o.tokenizer) c.tokenizer = parse_tokenizer_mode(*o.tokenizer);
  if (o.out) c.output_dir = *o.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Social satisfaction prediction pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Overrides o;
  std::string manifest_path, users_path, at_text;

  struct Entry {
    const char* name;
    const char* help;
    void (*stage)(const PipelineConfig&);
  };
  const Entry stages[] = {
      {"validate", "filter active users and check surveys", run_validate},
      {"features", "extract training features for labeled users", run_features},
      {"slice", "build per-city feature blocks over the time grid", run_slice},
      {"train", "fit models per dimension", run_train},
      {"evaluate", "cross-validate configured models", run_evaluate},
      {"correlate", "regional series and economy index correlations", run_correlate},
      {"report", "re-render report CSVs from stored artifacts", run_report},
      {"run", "all stages in order", run_pipeline},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> commands;
  for (const auto& e : stages) {
    auto* cmd = app.add_subcommand(e.name, e.help);
    add_common(cmd, o);
    if (std::string_view(e.name) == "features") {
      cmd->add_option("--manifest", manifest_path, "also write the behavior manifest here");
    }
    commands.emplace_back(cmd, &e);
  }
  auto* predict = app.add_subcommand("predict", "apply saved models to new users");
  add_common(predict, o);
  predict->add_option("--users", users_path, "users JSONL")->required();
  predict->add_option("--at", at_text, "timestamp or YYYY-MM-DD")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    const PipelineConfig config = resolve_config(o);
    if (predict->parsed()) {
      config.validate();
      std::string at = at_text;
      if (at.size() == 10) at += "T00:00:00Z";
      Timestamp when;
      try {
        when = parse_timestamp(at);
      } catch (const DataError& e) {
        throw ConfigError(std::string("--at: ") + e.what());
      }
      const ModelKind kind = o.model && *o.model != "all" ? parse_model_kind(*o.model) : config.regional_model;
      std::cout << predictions_csv(predict_users(config, users_path, when, kind));
      return 0;
    }
    for (const auto& [cmd, entry] : commands) {
      if (!cmd->parsed()) continue;
      config.validate();
      entry->stage(config);
      if (!manifest_path.empty()) write_file(manifest_path, behavior_manifest());
    }
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ExitCode::kConfig);
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ExitCode::kData);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(ExitCode::kStage);
  }
  return 0;
}
