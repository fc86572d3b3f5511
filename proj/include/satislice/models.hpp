#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace satislice {

/// Row-major design matrix with one label per row.
class Dataset {
 public:
  Dataset(std::vector<double> x, std::size_t rows, std::size_t cols, std::vector<double> y,
          std::vector<std::string> feature_ids);

  /// Builds from per-row vectors; all rows must have feature_ids.size() entries.
  static Dataset from_rows(const std::vector<std::vector<double>>& rows, std::vector<double> y,
                           std::vector<std::string> feature_ids);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> row(std::size_t i) const { return {x_.data() + i * cols_, cols_}; }
  double at(std::size_t i, std::size_t j) const { return x_[i * cols_ + j]; }
  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<std::string>& feature_ids() const { return feature_ids_; }

  /// Rows selected by `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<double> x_;
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> y_;
  std::vector<std::string> feature_ids_;
};

enum class LinearKind { ols, ridge };

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0;
  LinearKind kind = LinearKind::ols;
  double lambda = 0;  // ridge penalty; 0 for ols

  double predict(std::span<const double> x) const;
};

/// Least squares with an unpenalised intercept. Rank-deficient designs get the
/// minimum-norm weight vector.
LinearModel fit_ols(const Dataset& data);

/// Minimises sum of squared residuals + lambda * |w|^2; the intercept is not penalised.
LinearModel fit_ridge(const Dataset& data, double lambda);

/// Least squares restricted to the given rows and columns; other weights are 0.
LinearModel fit_ols_subset(const Dataset& data, std::span<const std::size_t> rows,
                           std::span<const std::size_t> columns);

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0;  // x[feature] <= threshold goes left
  std::size_t left = 0;
  std::size_t right = 0;
  std::size_t count = 0;  // training rows reaching this node
  double mean = 0;        // training label mean at this node
  LinearModel model;      // node model; used at leaves and for smoothing
};

struct M5Options {
  std::size_t min_leaf = 4;       // minimum rows in each child of a split
  bool smoothing = true;
  double stop_sd_fraction = 0.05; // stop when sd(node) < fraction * sd(root)
  double smoothing_k = 15;
  std::vector<double>* sdr_trace = nullptr;  // receives every evaluated split's SDR
};

/// M5 model tree: nodes[0] is the root.
struct ModelTree {
  std::vector<TreeNode> nodes;
  bool smoothing = true;
  std::size_t min_leaf = 4;
  double smoothing_k = 15;

  double predict(std::span<const double> x) const;
  std::size_t leaf_count() const;
  /// Index of the leaf `x` is routed to.
  std::size_t route(std::span<const double> x) const;
};

/// sd(parent) - sum(|child| / |parent| * sd(child)) with population standard deviations.
double standard_deviation_reduction(std::span<const double> left, std::span<const double> right);

ModelTree fit_m5p(const Dataset& data, const M5Options& options = {});

enum class ModelKind { ols, ridge, m5p };
std::string_view model_kind_name(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::ols;
  double lambda = 1.0;
  std::size_t min_leaf = 4;
  bool smoothing = true;
  bool standardize = false;
  bool clamp = false;
};

struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;
};

/// A fitted regressor with its preprocessing and column fingerprint.
struct Model {
  ModelSpec spec;
  std::string manifest_hash;
  std::vector<std::string> feature_ids;
  std::optional<Standardization> standardization;
  std::variant<LinearModel, ModelTree> regressor;

  double predict(std::span<const double> x) const;
};

Model train(const Dataset& data, const ModelSpec& spec, std::string manifest_hash = {});

std::string model_to_json(const Model& model);
Model model_from_json(std::string_view text);

}  // namespace satislice
