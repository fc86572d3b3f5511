#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "satislice/corpus.hpp"
#include "satislice/models.hpp"

namespace satislice {

/// Mean absolute error. Requires equal, non-zero lengths.
double mae(std::span<const double> pred, std::span<const double> truth);

/// Sample Pearson correlation. Requires equal lengths >= 3 and non-constant inputs.
double pcc(std::span<const double> a, std::span<const double> b);

/// 100 * (1 - mae / scale_range): the share of the 1..5 answer range not lost to error.
double accuracy_from_mae(double mae_value, double scale_range = 4.0);

/// Regularised incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Two-tailed Student-t tail probability 2 * P(T >= |t|) with `df` degrees of freedom.
double t_cdf_two_tailed(double t, int df);

/// Two-tailed p value of a Pearson r over n pairs, t = r * sqrt((n - 2) / (1 - r^2)).
double pearson_p_value(double r, std::size_t n);

enum class Stars { none, p05, p01 };
Stars stars_for(double p);
std::string_view stars_suffix(Stars s);

/// Fold id per row: a seeded shuffle dealt round-robin into `folds` folds.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

struct CvResult {
  double mae = 0;
  double pcc = 0;            // NaN when predictions or labels are constant
  std::vector<double> predictions;  // out-of-fold prediction per row
};

/// k-fold cross-validation; out-of-fold predictions are pooled and scored once.
CvResult cross_validate(const Dataset& data, const ModelSpec& spec, std::size_t folds, std::uint64_t seed);

/// Picks the ridge penalty with the lowest cross-validated MAE (first wins ties).
double select_lambda(const Dataset& data, std::span<const double> grid, std::size_t folds, std::uint64_t seed);

/// Median; an even count averages the two central values.
double regional_median(std::span<const double> values);

struct EvalCell {
  double pcc = 0;
  double mae = 0;
};

/// Cross-validated PCC and MAE per dimension and model kind, plus averages.
class EvalReport {
 public:
  explicit EvalReport(std::vector<ModelKind> kinds);

  void set(Dimension d, ModelKind k, EvalCell cell);
  const EvalCell& get(Dimension d, ModelKind k) const;
  EvalCell average(ModelKind k) const;
  const std::vector<ModelKind>& kinds() const { return kinds_; }

  void set_lambda(Dimension d, double lambda) { lambdas_[static_cast<std::size_t>(d)] = lambda; }
  double lambda(Dimension d) const { return lambdas_[static_cast<std::size_t>(d)]; }

  /// Table-shaped CSV: one row per dimension plus AVE; a PCC and MAE column per model.
  std::string to_csv() const;
  std::string to_json() const;
  static EvalReport from_json(std::string_view text);

 private:
  std::size_t column(ModelKind k) const;

  std::vector<ModelKind> kinds_;
  std::vector<std::array<EvalCell, 6>> cells_;  // per kind
  std::array<double, 6> lambdas_{};  // ridge penalty used per dimension
};

std::string_view model_display_name(ModelKind k);

struct RegionalSeries {
  std::string city;
  Dimension dimension;
  std::vector<Timestamp> points;
  std::vector<double> values;
};

std::string regional_series_csv(const std::vector<RegionalSeries>& series);

/// Economy indexes by city. Every row covers the same cities.
class IndexTable {
 public:
  IndexTable(std::vector<std::string> cities, std::vector<std::string> names, std::vector<std::vector<double>> values);

  /// CSV with header `index,<city>,<city>,...` and one row per index.
  static IndexTable load(const std::filesystem::path& csv);
  static IndexTable parse(std::string_view csv_text, std::string_view source = "<memory>");

  const std::vector<std::string>& cities() const { return cities_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& row(std::size_t i) const { return values_[i]; }
  std::size_t n_cities() const { return cities_.size(); }

 private:
  std::vector<std::string> cities_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> values_;
};

struct CorrelationRow {
  std::string index;
  Dimension dimension;
  std::size_t n = 0;
  double r = 0;
  double t = 0;
  double p = 1;
  Stars stars = Stars::none;
};

/// Per-city regional values, one per dimension.
using RegionalValues = std::map<std::string, std::array<double, 6>, std::less<>>;

/// Pearson r of every (index, dimension) pair over the cities common to both
/// inputs, with two-tailed t-test significance. Needs at least 3 common cities.
/// A constant column yields r, t and p of NaN and no stars.
std::vector<CorrelationRow> correlate_indexes(const RegionalValues& regional, const IndexTable& table);

/// Index rows by dimension columns, cells like "0.66**".
std::string correlation_table_csv(const std::vector<CorrelationRow>& rows);
/// One line per (index, dimension) with n, r, t, p and stars at full precision.
std::string correlation_long_csv(const std::vector<CorrelationRow>& rows);
std::string correlations_to_json(const std::vector<CorrelationRow>& rows);
std::vector<CorrelationRow> correlations_from_json(std::string_view text);

}  // namespace satislice
