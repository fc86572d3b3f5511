#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "satislice/corpus.hpp"
#include "satislice/lexicon.hpp"
#include "satislice/models.hpp"
#include "satislice/time.hpp"

namespace satislice {

inline constexpr std::string_view kToolVersion = "satislice 1.0.0";

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path lexicon;
  std::filesystem::path dimension_map;
  std::filesystem::path city_table;
  std::filesystem::path index_table;
  std::filesystem::path output_dir = "out";

  Timestamp as_of{};
  std::chrono::year_month grid_start{std::chrono::year{2012} / std::chrono::February};
  int grid_count = 13;

  ActivityFilter filter;
  Duration min_response_gap = std::chrono::seconds{2};

  TokenizerMode tokenizer = TokenizerMode::max_match;
  bool include_reposts = true;

  std::vector<ModelKind> models{ModelKind::ols, ModelKind::ridge, ModelKind::m5p};
  std::vector<double> lambda_grid{1.0};
  std::size_t min_leaf = 4;
  bool smoothing = true;
  bool standardize = false;
  bool clamp = false;
  std::size_t folds = 10;
  std::uint64_t seed = 42;
  ModelKind regional_model = ModelKind::m5p;  // model behind the regional series

  /// Reads a JSON config. Relative paths resolve against the config's directory.
  static PipelineConfig load(const std::filesystem::path& json_path);
  static PipelineConfig parse(std::string_view json_text, const std::filesystem::path& base_dir);

  /// Checks thresholds and that every input path exists. Throws ConfigError.
  void validate() const;

  /// Parameters plus input-file content hashes; independent of path spellings and output location.
  std::string canonical_json() const;
};

/// Log level from SATISLICE_LOG (trace, debug, info, warn, error, off); default warn.
void init_logging();

// Stages. Each reads earlier artifacts from config.output_dir and fails with a
// StageError naming the missing predecessor.
void run_validate(const PipelineConfig& config);
void run_features(const PipelineConfig& config);
void run_slice(const PipelineConfig& config);
void run_train(const PipelineConfig& config);
void run_evaluate(const PipelineConfig& config);
void run_correlate(const PipelineConfig& config);
void run_report(const PipelineConfig& config);

/// All stages in order.
void run_pipeline(const PipelineConfig& config);

struct UserPrediction {
  std::string user_id;
  SatisfactionLabels scores;
};

/// Applies the saved models of `kind` to users read from `users_jsonl`, using
/// their history up to `at`.
std::vector<UserPrediction> predict_users(const PipelineConfig& config, const std::filesystem::path& users_jsonl,
                                          Timestamp at, ModelKind kind);
std::string predictions_csv(const std::vector<UserPrediction>& predictions);

/// Registry manifest JSON (feature_id, group, kind, description, default).
std::string behavior_manifest();

}  // namespace satislice
