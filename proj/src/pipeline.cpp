#include "satislice/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "satislice/behavior.hpp"
#include "satislice/error.hpp"
#include "satislice/evaluate.hpp"
#include "satislice/io.hpp"
#include "satislice/parallel.hpp"
#include "satislice/timeslice.hpp"

namespace satislice {
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// ---- artifact layout ------------------------------------------------------

struct Layout {
  explicit Layout(const fs::path& root) : root(root) {}
  fs::path root;
  fs::path validation_report() const { return root / "validation" / "report.json"; }
  fs::path cohort() const { return root / "validation" / "cohort.json"; }
  fs::path labels() const { return root / "validation" / "labels.csv"; }
  fs::path manifest() const { return root / "features" / "manifest.json"; }
  fs::path training() const { return root / "features" / "training.csv"; }
  fs::path blocks() const { return root / "blocks"; }
  fs::path models() const { return root / "models"; }
  fs::path model(Dimension d, ModelKind k) const {
    return models() / (std::string(dimension_name(d)) + "__" + std::string(model_kind_name(k)) + ".json");
  }
  fs::path reports() const { return root / "reports"; }
  fs::path run_manifest() const { return root / "run_manifest.json"; }
};

void require_artifact(const fs::path& path, std::string_view stage, std::string_view producer) {
  if (!fs::exists(path)) {
    throw StageError(std::string(stage), "missing " + path.string() + "; run `" + std::string(producer) + "` first");
  }
}

// Prefixes errors with the stage name, keeping the error category.
template <typename Fn>
void in_stage(std::string_view stage, Fn&& fn) {
  spdlog::info("stage {}: start", stage);
  try {
    fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(stage) + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(std::string(stage) + ": " + e.what());
  } catch (const std::exception& e) {
    throw StageError(std::string(stage), e.what());
  }
  spdlog::info("stage {}: done", stage);
}

void write_run_manifest(const PipelineConfig& config);

template <typename Fn>
void in_recorded_stage(const PipelineConfig& config, std::string_view stage, Fn&& fn) {
  in_stage(stage, std::forward<Fn>(fn));
  write_run_manifest(config);
}

// ---- config helpers -------------------------------------------------------

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string file_hash(const fs::path& p) { return hex64(fnv1a64(read_file(p))); }

// ---- shared loaders -------------------------------------------------------

std::vector<UserRecord> load_cohort(const PipelineConfig& config, std::string_view stage) {
  const Layout out(config.output_dir);
  require_artifact(out.cohort(), stage, "validate");
  const auto cohort = nlohmann::json::parse(read_file(out.cohort())).at("users").get<std::vector<std::string>>();
  const std::set<std::string> wanted(cohort.begin(), cohort.end());
  auto records = ingest(config.corpus, CityTable::load(config.city_table));
  std::erase_if(records, [&](const UserRecord& r) { return wanted.count(r.user_id) == 0; });
  if (records.size() != wanted.size()) {
    throw StageError(std::string(stage), "corpus no longer matches validation/cohort.json; rerun `validate`");
  }
  return records;
}

struct LabelTable {
  std::vector<std::string> users;
  std::vector<SatisfactionLabels> labels;
};

LabelTable read_labels(const fs::path& path) {
  LabelTable t;
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 8) throw DataError(path.string() + ": expected 8 fields");
    t.users.push_back(f[0]);
    SatisfactionLabels l;
    for (std::size_t d = 0; d < 6; ++d) l.scores[d] = std::stod(f[2 + d]);
    t.labels.push_back(l);
  }
  return t;
}

struct FeatureTable {
  std::vector<std::string> columns;
  std::vector<std::string> users;
  std::vector<std::vector<double>> rows;
};

std::string feature_table_csv(const FeatureTable& t) {
  std::string csv = "user_id";
  for (const auto& c : t.columns) csv += "," + csv_field(c);
  csv += "\n";
  for (std::size_t i = 0; i < t.users.size(); ++i) {
    csv += csv_field(t.users[i]);
    for (double v : t.rows[i]) csv += "," + format_double(v);
    csv += "\n";
  }
  return csv;
}

FeatureTable read_feature_table(const fs::path& path) {
  FeatureTable t;
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty feature table");
  auto header = split_csv_line(line);
  t.columns.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != t.columns.size() + 1) throw DataError(path.string() + ": row width mismatch");
    t.users.push_back(f[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < f.size(); ++i) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(f[i].data(), f[i].data() + f[i].size(), v);
      if (ec != std::errc{} || ptr != f[i].data() + f[i].size()) throw DataError(path.string() + ": bad number");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct FeatureManifest {
  std::vector<std::string> columns;
  std::string hash;
};

FeatureManifest read_manifest(const fs::path& path) {
  const auto j = nlohmann::json::parse(read_file(path));
  FeatureManifest m;
  for (const auto& c : j.at("columns")) m.columns.push_back(c.at("feature_id").get<std::string>());
  m.hash = j.at("manifest_hash").get<std::string>();
  return m;
}

// Training design for one dimension, rows in label-file order.
Dataset training_dataset(const FeatureTable& features, const LabelTable& labels, Dimension d) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < features.users.size(); ++i) row_of[features.users[i]] = i;
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (std::size_t i = 0; i < labels.users.size(); ++i) {
    auto it = row_of.find(labels.users[i]);
    if (it == row_of.end()) throw DataError("labeled user " + labels.users[i] + " has no training features");
    rows.push_back(features.rows[it->second]);
    y.push_back(labels.labels[i][d]);
  }
  if (rows.empty()) throw DataError("no labeled users to train on");
  return Dataset::from_rows(rows, std::move(y), features.columns);
}

ModelSpec spec_for(const PipelineConfig& config, ModelKind kind, double lambda) {
  ModelSpec spec;
  spec.kind = kind;
  spec.lambda = lambda;
  spec.min_leaf = config.min_leaf;
  spec.smoothing = config.smoothing;
  spec.standardize = config.standardize;
  spec.clamp = config.clamp;
  return spec;
}

Model load_model(const Layout& out, Dimension d, ModelKind k, std::string_view stage) {
  const auto path = out.model(d, k);
  require_artifact(path, stage, "train");
  return model_from_json(read_file(path));
}

void write_run_manifest(const PipelineConfig& config) {
  const Layout out(config.output_dir);
  std::vector<fs::path> files;
  if (fs::exists(out.root)) {
    for (const auto& e : fs::recursive_directory_iterator(out.root)) {
      if (e.is_regular_file() && e.path() != out.run_manifest()) files.push_back(fs::relative(e.path(), out.root));
    }
  }
  std::sort(files.begin(), files.end());
  const std::string canonical = config.canonical_json();
  ojson j;
  j["version"] = kToolVersion;
  j["behavior_registry"] = BehaviorRegistry::kVersion;
  j["config_hash"] = hex64(fnv1a64(canonical));
  j["config"] = ojson::parse(canonical);
  j["artifacts"] = ojson::array();
  for (const auto& f : files) {
    j["artifacts"].push_back({{"path", f.generic_string()}, {"fnv1a64", file_hash(out.root / f)}});
  }
  write_file(out.run_manifest(), j.dump(2) + "\n");
}

}  // namespace

// ---- config ---------------------------------------------------------------

PipelineConfig PipelineConfig::parse(std::string_view json_text, const fs::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  PipelineConfig c;
  try {
    auto path = [&](const char* key, fs::path& dst) {
      if (j.contains(key)) dst = resolve(base_dir, j[key].get<std::string>());
    };
    path("corpus", c.corpus);
    path("lexicon", c.lexicon);
    path("dimension_map", c.dimension_map);
    path("city_table", c.city_table);
    path("index_table", c.index_table);
    path("output_dir", c.output_dir);
    if (j.contains("as_of")) c.as_of = parse_timestamp(j["as_of"].get<std::string>());
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("start")) c.grid_start = parse_year_month(g["start"].get<std::string>());
      if (g.contains("count")) c.grid_count = g["count"].get<int>();
    }
    if (j.contains("filter")) {
      const auto& f = j["filter"];
      if (f.contains("min_statuses")) c.filter.min_statuses = f["min_statuses"].get<std::size_t>();
      if (f.contains("recency_days")) c.filter.recency = days(f["recency_days"].get<long long>());
      if (f.contains("min_response_seconds")) {
        c.min_response_gap = Duration{static_cast<long long>(f["min_response_seconds"].get<double>() * 1000.0)};
      }
    }
    if (j.contains("tokenizer")) c.tokenizer = parse_tokenizer_mode(j["tokenizer"].get<std::string>());
    if (j.contains("include_reposts")) c.include_reposts = j["include_reposts"].get<bool>();
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j["models"]) c.models.push_back(parse_model_kind(m.get<std::string>()));
    }
    if (j.contains("lambda")) {
      c.lambda_grid = j["lambda"].is_array() ? j["lambda"].get<std::vector<double>>()
                                             : std::vector<double>{j["lambda"].get<double>()};
    }
    if (j.contains("m5p")) {
      const auto& m = j["m5p"];
      if (m.contains("min_leaf")) c.min_leaf = m["min_leaf"].get<std::size_t>();
      if (m.contains("smoothing")) c.smoothing = m["smoothing"].get<bool>();
    }
    if (j.contains("standardize")) c.standardize = j["standardize"].get<bool>();
    if (j.contains("clamp")) c.clamp = j["clamp"].get<bool>();
    if (j.contains("folds")) c.folds = j["folds"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("regional_model")) c.regional_model = parse_model_kind(j["regional_model"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& json_path) {
  if (!fs::exists(json_path)) throw ConfigError("config not found: " + json_path.string());
  return parse(read_file(json_path), json_path.parent_path());
}

void PipelineConfig::validate() const {
  auto need = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("config: ") + what + " path not set");
    if (!fs::exists(p)) throw ConfigError(std::string("config: ") + what + " not found: " + p.string());
  };
  need(corpus, "corpus");
  need(lexicon, "lexicon");
  need(dimension_map, "dimension_map");
  need(city_table, "city_table");
  need(index_table, "index_table");
  if (as_of == Timestamp{}) throw ConfigError("config: as_of is required");
  if (grid_count < 1) throw ConfigError("config: grid count must be positive");
  if (filter.min_statuses < 1) throw ConfigError("config: min_statuses must be positive");
  if (filter.recency <= Duration::zero()) throw ConfigError("config: recency must be positive");
  if (min_response_gap <= Duration::zero()) throw ConfigError("config: min_response_seconds must be positive");
  if (models.empty()) throw ConfigError("config: no model kinds selected");
  if (std::find(models.begin(), models.end(), regional_model) == models.end()) {
    throw ConfigError("config: regional_model must be one of the trained models");
  }
  if (lambda_grid.empty()) throw ConfigError("config: lambda grid is empty");
  for (double l : lambda_grid) {
    if (!(l > 0)) throw ConfigError("config: lambda values must be positive");
  }
  if (min_leaf < 2) throw ConfigError("config: m5p.min_leaf must be at least 2");
  if (folds < 2) throw ConfigError("config: folds must be at least 2");
}

std::string PipelineConfig::canonical_json() const {
  ojson j;
  auto input_hash = [](const fs::path& p) { return fs::exists(p) ? file_hash(p) : std::string("missing"); };
  j["inputs"] = {{"corpus", input_hash(corpus)},
                 {"lexicon", input_hash(lexicon)},
                 {"dimension_map", input_hash(dimension_map)},
                 {"city_table", input_hash(city_table)},
                 {"index_table", input_hash(index_table)}};
  j["as_of"] = format_timestamp(as_of);
  char month[16];
  std::snprintf(month, sizeof month, "%04d-%02u", int(grid_start.year()), unsigned(grid_start.month()));
  j["grid"] = {{"start", month}, {"count", grid_count}};
  j["filter"] = {{"min_statuses", filter.min_statuses},
                 {"recency_ms", filter.recency.count()},
                 {"min_response_ms", min_response_gap.count()}};
  j["tokenizer"] = tokenizer_mode_name(tokenizer);
  j["include_reposts"] = include_reposts;
  j["models"] = ojson::array();
  for (ModelKind k : models) j["models"].push_back(model_kind_name(k));
  j["lambda"] = lambda_grid;
  j["m5p"] = {{"min_leaf", min_leaf}, {"smoothing", smoothing}};
  j["standardize"] = standardize;
  j["clamp"] = clamp;
  j["folds"] = folds;
  j["seed"] = seed;
  j["regional_model"] = model_kind_name(regional_model);
  return j.dump();
}

void init_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("satislice");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("SATISLICE_LOG"); level != nullptr && *level != '\0') {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

// ---- stages ---------------------------------------------------------------

void run_validate(const PipelineConfig& config) {
  in_recorded_stage(config, "validate", [&] {
    const Layout out(config.output_dir);
    const CityTable cities = CityTable::load(config.city_table);
    const DimensionMap map = DimensionMap::load(config.dimension_map);
    const auto records = ingest(config.corpus, cities);
    if (records.empty()) throw DataError("corpus " + config.corpus.string() + " contains no users");

    const FilterResult active = filter_active(records, config.as_of, config.filter);

    std::vector<const UserRecord*> cohort;
    std::map<std::string, std::size_t> survey_counts{{"valid", 0}, {"incomplete", 0}, {"too_fast", 0}};
    ojson survey_rejections = ojson::array();
    std::size_t prediction_only = 0;
    std::string labels_csv = "user_id,city,LS,IS,SPS,NES,LES,SJS\n";
    for (const auto& r : active.kept) {
      if (r.answers.empty()) {
        ++prediction_only;
        cohort.push_back(&r);
        continue;
      }
      const SurveyCheck check = validate_survey(r, config.min_response_gap);
      ++survey_counts[std::string(survey_verdict_name(check.verdict))];
      if (!check.valid()) {
        survey_rejections.push_back({{"user_id", r.user_id}, {"verdict", survey_verdict_name(check.verdict)}});
        continue;
      }
      cohort.push_back(&r);
      const SatisfactionLabels labels = labels_from_answers(r, map);
      labels_csv += csv_field(r.user_id) + "," + csv_field(r.city);
      for (double s : labels.scores) labels_csv += "," + format_double(s);
      labels_csv += "\n";
    }

    std::vector<UserRecord> cohort_records;
    for (const auto* r : cohort) cohort_records.push_back(*r);
    const CohortSummary summary = summarize(cohort_records);

    std::map<std::string, std::size_t> reasons{{"too_few_statuses", 0}, {"inactive_recently", 0}};
    ojson exclusions = ojson::array();
    for (const auto& e : active.excluded) {
      ++reasons[std::string(exclusion_reason_name(e.reason))];
      exclusions.push_back({{"user_id", e.user_id}, {"reason", exclusion_reason_name(e.reason)}});
    }

    ojson report;
    report["as_of"] = format_timestamp(config.as_of);
    report["input_users"] = records.size();
    report["activity"] = {{"kept", active.kept.size()}, {"excluded", reasons}};
    report["survey"] = survey_counts;
    report["prediction_only"] = prediction_only;
    report["cohort"] = {{"users", summary.users},
                        {"female", summary.female},
                        {"male", summary.male},
                        {"unspecified", summary.unspecified},
                        {"mean_age", summary.mean_age}};
    report["exclusions"] = std::move(exclusions);
    report["survey_rejections"] = std::move(survey_rejections);
    write_file(out.validation_report(), report.dump(2) + "\n");

    ojson ids = ojson::array();
    for (const auto* r : cohort) ids.push_back(r->user_id);
    write_file(out.cohort(), ojson{{"users", std::move(ids)}}.dump(2) + "\n");
    write_file(out.labels(), labels_csv);
    spdlog::info("validate: {} users, {} active, {} in cohort", records.size(), active.kept.size(), cohort.size());
  });
}

void run_features(const PipelineConfig& config) {
  in_recorded_stage(config, "features", [&] {
    const Layout out(config.output_dir);
    require_artifact(out.labels(), "features", "validate");
    const auto records = load_cohort(config, "features");
    const Lexicon lexicon = Lexicon::load(config.lexicon);
    const BehaviorRegistry& registry = default_registry();
    if (!lexicon.is_conformant()) {
      spdlog::warn("lexicon group sizes differ from the 35/32/7/3/11 layout; feature rows will not be 133 wide");
    }
    if (lexicon.duplicates_dropped() > 0) spdlog::warn("lexicon: {} duplicate patterns dropped", lexicon.duplicates_dropped());

    const auto columns = feature_columns(registry, lexicon);
    ojson manifest;
    manifest["manifest_hash"] = feature_manifest_hash(columns);
    manifest["behavior_registry"] = BehaviorRegistry::kVersion;
    manifest["tokenizer"] = tokenizer_mode_name(config.tokenizer);
    manifest["lexicon_group_sizes"] = ojson::object();
    const auto sizes = lexicon.group_sizes();
    for (std::size_t g = 0; g < kCategoryGroupCount; ++g) {
      manifest["lexicon_group_sizes"][std::string(category_group_name(static_cast<CategoryGroup>(g)))] = sizes[g];
    }
    manifest["lexicon_conformant"] = lexicon.is_conformant();
    manifest["columns"] = ojson::array();
    for (const auto& f : registry.features()) {
      manifest["columns"].push_back({{"feature_id", f.id},
                                     {"source", "behavior"},
                                     {"group", behavior_group_name(f.group)},
                                     {"kind", value_kind_name(f.kind)},
                                     {"description", f.description}});
    }
    for (const auto& c : lexicon.categories()) {
      manifest["columns"].push_back({{"feature_id", c.id},
                                     {"source", "lexicon"},
                                     {"group", category_group_name(c.group)},
                                     {"kind", c.structural ? "count" : "proportion"}});
    }
    write_file(out.manifest(), manifest.dump(2) + "\n");

    const LabelTable labels = read_labels(out.labels());
    std::map<std::string, const UserRecord*> by_id;
    for (const auto& r : records) by_id[r.user_id] = &r;
    FeatureOptions options{config.tokenizer, {config.include_reposts}};
    FeatureTable table;
    table.columns = columns;
    table.users = labels.users;
    table.rows.resize(labels.users.size());
    parallel_for(labels.users.size(), [&](std::size_t i) {
      auto it = by_id.find(labels.users[i]);
      if (it == by_id.end()) throw DataError("labeled user " + labels.users[i] + " missing from cohort");
      table.rows[i] = feature_row(*it->second, config.as_of, registry, lexicon, options);
    });
    write_file(out.training(), feature_table_csv(table));
  });
}

void run_slice(const PipelineConfig& config) {
  in_recorded_stage(config, "slice", [&] {
    const Layout out(config.output_dir);
    require_artifact(out.manifest(), "slice", "features");
    const auto records = load_cohort(config, "slice");
    const Lexicon lexicon = Lexicon::load(config.lexicon);
    const auto columns = feature_columns(default_registry(), lexicon);
    if (feature_manifest_hash(columns) != read_manifest(out.manifest()).hash) {
      throw StageError("slice", "lexicon changed since `features`; rerun `features`");
    }
    const TimeGrid grid = monthly_grid(config.grid_start, config.grid_count);
    const auto blocks =
        build_blocks(records, grid, default_registry(), lexicon, {config.tokenizer, {config.include_reposts}});
    if (fs::exists(out.blocks())) fs::remove_all(out.blocks());
    write_block_store(out.blocks(), blocks, columns);
    spdlog::info("slice: {} blocks", blocks.size());
  });
}

void run_train(const PipelineConfig& config) {
  in_recorded_stage(config, "train", [&] {
    const Layout out(config.output_dir);
    require_artifact(out.training(), "train", "features");
    require_artifact(out.labels(), "train", "validate");
    const FeatureManifest manifest = read_manifest(out.manifest());
    const FeatureTable features = read_feature_table(out.training());
    const LabelTable labels = read_labels(out.labels());
    if (features.columns != manifest.columns) throw StageError("train", "training table does not match manifest");

    std::vector<std::pair<Dimension, ModelKind>> jobs;
    for (Dimension d : kDimensions) {
      for (ModelKind k : config.models) jobs.emplace_back(d, k);
    }
    if (fs::exists(out.models())) fs::remove_all(out.models());
    std::vector<std::string> files(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
      const auto [d, k] = jobs[i];
      const Dataset data = training_dataset(features, labels, d);
      double lambda = config.lambda_grid.front();
      if (k == ModelKind::ridge && config.lambda_grid.size() > 1) {
        lambda = select_lambda(data, config.lambda_grid, config.folds, config.seed);
      }
      files[i] = model_to_json(train(data, spec_for(config, k, lambda), manifest.hash));
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) write_file(out.model(jobs[i].first, jobs[i].second), files[i]);
  });
}

void run_evaluate(const PipelineConfig& config) {
  in_recorded_stage(config, "evaluate", [&] {
    const Layout out(config.output_dir);
    require_artifact(out.training(), "evaluate", "features");
    const FeatureTable features = read_feature_table(out.training());
    const LabelTable labels = read_labels(out.labels());

    EvalReport report(config.models);
    for (Dimension d : kDimensions) {
      const Dataset data = training_dataset(features, labels, d);
      for (ModelKind k : config.models) {
        const Model saved = load_model(out, d, k, "evaluate");
        if (k == ModelKind::ridge) report.set_lambda(d, saved.spec.lambda);
        const CvResult cv = cross_validate(data, saved.spec, config.folds, config.seed);
        report.set(d, k, {cv.pcc, cv.mae});
      }
    }
    write_file(out.reports() / "eval.json", report.to_json());
    write_file(out.reports() / "eval.csv", report.to_csv());
  });
}

void run_correlate(const PipelineConfig& config) {
  in_recorded_stage(config, "correlate", [&] {
    const Layout out(config.output_dir);
    require_artifact(out.blocks() / "index.json", "correlate", "slice");
    std::vector<std::string> columns;
    const auto blocks = read_block_store(out.blocks(), &columns);
    const std::string hash = feature_manifest_hash(columns);

    std::array<std::optional<Model>, 6> models;
    for (Dimension d : kDimensions) {
      models[static_cast<std::size_t>(d)] = load_model(out, d, config.regional_model, "correlate");
      if (models[static_cast<std::size_t>(d)]->manifest_hash != hash) {
        throw StageError("correlate", "model columns differ from the block store; rerun `train`");
      }
    }

    // City value at a grid point: mean prediction over the city's users.
    std::map<std::string, std::vector<const SliceBlock*>> by_city;
    for (const auto& b : blocks) by_city[b.city].push_back(&b);
    std::vector<RegionalSeries> series;
    RegionalValues medians;
    for (const auto& [city, city_blocks] : by_city) {
      std::array<double, 6> city_medians{};
      for (Dimension d : kDimensions) {
        RegionalSeries s{city, d, {}, {}};
        for (const SliceBlock* b : city_blocks) {
          double sum = 0;
          for (const auto& row : b->rows) sum += models[static_cast<std::size_t>(d)]->predict(row);
          s.points.push_back(b->at);
          s.values.push_back(b->rows.empty() ? 0.0 : sum / static_cast<double>(b->rows.size()));
        }
        city_medians[static_cast<std::size_t>(d)] = regional_median(s.values);
        series.push_back(std::move(s));
      }
      medians[city] = city_medians;
    }
    write_file(out.reports() / "regional_series.csv", regional_series_csv(series));
    std::string median_csv = "city,LS,IS,SPS,NES,LES,SJS\n";
    for (const auto& [city, values] : medians) {
      median_csv += csv_field(city);
      for (double v : values) median_csv += "," + format_double(v);
      median_csv += "\n";
    }
    write_file(out.reports() / "regional_medians.csv", median_csv);

    const IndexTable table = IndexTable::load(config.index_table);
    const auto rows = correlate_indexes(medians, table);
    write_file(out.reports() / "correlations.json", correlations_to_json(rows));
    write_file(out.reports() / "correlations.csv", correlation_table_csv(rows));
    write_file(out.reports() / "correlations_long.csv", correlation_long_csv(rows));
  });
}

void run_report(const PipelineConfig& config) {
  in_recorded_stage(config, "report", [&] {
    const Layout out(config.output_dir);
    require_artifact(out.reports() / "eval.json", "report", "evaluate");
    require_artifact(out.reports() / "correlations.json", "report", "correlate");
    const EvalReport report = EvalReport::from_json(read_file(out.reports() / "eval.json"));
    write_file(out.reports() / "eval.csv", report.to_csv());
    const auto rows = correlations_from_json(read_file(out.reports() / "correlations.json"));
    write_file(out.reports() / "correlations.csv", correlation_table_csv(rows));
    write_file(out.reports() / "correlations_long.csv", correlation_long_csv(rows));
  });
}

void run_pipeline(const PipelineConfig& config) {
  config.validate();
  run_validate(config);
  run_features(config);
  run_slice(config);
  run_train(config);
  run_evaluate(config);
  run_correlate(config);
  run_report(config);
}

std::vector<UserPrediction> predict_users(const PipelineConfig& config, const fs::path& users_jsonl, Timestamp at,
                                          ModelKind kind) {
  std::vector<UserPrediction> result;
  in_stage("predict", [&] {
    const Layout out(config.output_dir);
    const Lexicon lexicon = Lexicon::load(config.lexicon);
    const auto columns = feature_columns(default_registry(), lexicon);
    const std::string hash = feature_manifest_hash(columns);
    std::array<std::optional<Model>, 6> models;
    for (Dimension d : kDimensions) {
      models[static_cast<std::size_t>(d)] = load_model(out, d, kind, "predict");
      if (models[static_cast<std::size_t>(d)]->manifest_hash != hash) {
        throw StageError("predict", "saved models were trained on different feature columns");
      }
    }
    const auto users = ingest(users_jsonl, CityTable::load(config.city_table));
    const FeatureOptions options{config.tokenizer, {config.include_reposts}};
    for (const auto& u : users) {
      const auto row = feature_row(u, at, default_registry(), lexicon, options);
      UserPrediction p{u.user_id, {}};
      for (Dimension d : kDimensions) p.scores[d] = models[static_cast<std::size_t>(d)]->predict(row);
      result.push_back(std::move(p));
    }
  });
  return result;
}

std::string predictions_csv(const std::vector<UserPrediction>& predictions) {
  std::string csv = "user_id,LS,IS,SPS,NES,LES,SJS\n";
  for (const auto& p : predictions) {
    csv += csv_field(p.user_id);
    for (double s : p.scores.scores) csv += "," + format_double(s);
    csv += "\n";
  }
  return csv;
}

std::string behavior_manifest() { return default_registry().manifest_json() + "\n"; }

}  // namespace satislice
