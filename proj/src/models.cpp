#include "satislice/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "satislice/error.hpp"

namespace satislice {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double population_sd(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

struct Centered {
  MatrixXd x;
  VectorXd y;
  VectorXd x_mean;
  double y_mean = 0;
};

Centered center(const Dataset& data, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  const auto m = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(cols.size());
  Centered c;
  c.x.resize(m, k);
  c.y.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    c.y(i) = data.y()[rows[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < k; ++j) {
      c.x(i, j) = data.at(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    }
  }
  c.x_mean = c.x.colwise().mean();
  c.y_mean = c.y.mean();
  c.x.rowwise() -= c.x_mean.transpose();
  c.y.array() -= c.y_mean;
  return c;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

LinearModel assemble(const Dataset& data, std::span<const std::size_t> cols, const Centered& c, const VectorXd& w,
                     LinearKind kind, double lambda) {
  LinearModel model;
  model.kind = kind;
  model.lambda = lambda;
  model.weights.assign(data.cols(), 0.0);
  double offset = 0;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    model.weights[cols[j]] = w(static_cast<Eigen::Index>(j));
    offset += w(static_cast<Eigen::Index>(j)) * c.x_mean(static_cast<Eigen::Index>(j));
  }
  model.intercept = c.y_mean - offset;
  for (double v : model.weights) {
    if (!std::isfinite(v)) throw StageError("train", "non-finite regression coefficient");
  }
  if (!std::isfinite(model.intercept)) throw StageError("train", "non-finite regression intercept");
  return model;
}

// ---- M5 -----------------------------------------------------------------

struct Split {
  double sdr = 0;
  std::size_t feature = 0;
  double threshold = 0;
  bool found = false;
};

class M5Builder {
 public:
  M5Builder(const Dataset& data, const M5Options& options) : data_(data), opt_(options) {}

  ModelTree build() {
    ModelTree tree;
    tree.smoothing = opt_.smoothing;
    tree.min_leaf = opt_.min_leaf;
    tree.smoothing_k = opt_.smoothing_k;
    const auto all = iota(data_.rows());
    root_sd_ = sd_of(all);
    grow(tree, all);

    if (tree.nodes[0].leaf) {
      // A tree that never split is plain linear regression on every feature.
      tree.nodes[0].model = fit_ols(data_);
      return tree;
    }
    std::vector<std::size_t> tested;
    prune(tree, 0, all, &tested);
    return compact(tree);
  }

 private:
  double sd_of(const std::vector<std::size_t>& rows) const {
    std::vector<double> ys;
    ys.reserve(rows.size());
    for (std::size_t r : rows) ys.push_back(data_.y()[r]);
    return population_sd(ys);
  }

  Split best_split(const std::vector<std::size_t>& rows, double parent_sd) const {
    const std::size_t n = rows.size();
    double mean = 0;
    for (std::size_t r : rows) mean += data_.y()[r];
    mean /= static_cast<double>(n);

    Split best;
    std::vector<std::size_t> order(rows);
    std::vector<double> prefix(n + 1), prefix_sq(n + 1);
    for (std::size_t f = 0; f < data_.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return data_.at(a, f) < data_.at(b, f); });
      for (std::size_t i = 0; i < n; ++i) {
        const double dy = data_.y()[order[i]] - mean;
        prefix[i + 1] = prefix[i] + dy;
        prefix_sq[i + 1] = prefix_sq[i] + dy * dy;
      }
      for (std::size_t k = opt_.min_leaf; k + opt_.min_leaf <= n; ++k) {
        const double lo = data_.at(order[k - 1], f);
        const double hi = data_.at(order[k], f);
        if (!(lo < hi)) continue;
        const double threshold = lo + (hi - lo) / 2;
        if (!(lo <= threshold && threshold < hi)) continue;
        const double nl = static_cast<double>(k);
        const double nr = static_cast<double>(n - k);
        const double sl = prefix[k], sql = prefix_sq[k];
        const double sr = prefix[n] - sl, sqr = prefix_sq[n] - sql;
        const double var_l = std::max(0.0, (sql - sl * sl / nl) / nl);
        const double var_r = std::max(0.0, (sqr - sr * sr / nr) / nr);
        // Mathematically non-negative; rounding can dip below zero.
        const double sdr =
            std::max(0.0, parent_sd - (nl / static_cast<double>(n)) * std::sqrt(var_l) -
                              (nr / static_cast<double>(n)) * std::sqrt(var_r));
        if (opt_.sdr_trace != nullptr) opt_.sdr_trace->push_back(sdr);
        if (!best.found || sdr > best.sdr) {
          best = {sdr, f, threshold, true};
        }
      }
    }
    return best;
  }

  std::size_t grow(ModelTree& tree, const std::vector<std::size_t>& rows) {
    const std::size_t id = tree.nodes.size();
    tree.nodes.emplace_back();
    double mean = 0;
    for (std::size_t r : rows) mean += data_.y()[r];
    tree.nodes[id].count = rows.size();
    tree.nodes[id].mean = mean / static_cast<double>(rows.size());

    const double sd = sd_of(rows);
    if (rows.size() < 2 * opt_.min_leaf || sd < opt_.stop_sd_fraction * root_sd_ || sd == 0.0) return id;
    const Split split = best_split(rows, sd);
    if (!split.found || split.sdr <= 0.0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (data_.at(r, split.feature) <= split.threshold ? left : right).push_back(r);
    tree.nodes[id].leaf = false;
    tree.nodes[id].feature = split.feature;
    tree.nodes[id].threshold = split.threshold;
    const std::size_t l = grow(tree, left);
    const std::size_t r = grow(tree, right);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  double adjusted_error(const LinearModel& model, const std::vector<std::size_t>& rows, std::size_t params) const {
    double err = 0;
    for (std::size_t r : rows) err += std::abs(model.predict(data_.row(r)) - data_.y()[r]);
    err /= static_cast<double>(rows.size());
    const double n = static_cast<double>(rows.size());
    const double v = static_cast<double>(params);
    return n > v ? err * (n + v) / (n - v) : err * 10.0;
  }

  // Fits node models bottom-up and collapses subtrees whose node model is no
  // worse than the subtree. Returns the node's estimated error; `tested`
  // receives the features split on in the (grown) subtree.
  double prune(ModelTree& tree, std::size_t id, const std::vector<std::size_t>& rows,
               std::vector<std::size_t>* tested) {
    TreeNode& node = tree.nodes[id];
    if (node.leaf) {
      tested->clear();
      node.model = fit_ols_subset(data_, rows, {});
      return adjusted_error(node.model, rows, 1);
    }
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) (data_.at(r, node.feature) <= node.threshold ? left_rows : right_rows).push_back(r);
    std::vector<std::size_t> left_tested, right_tested;
    const double left_err = prune(tree, node.left, left_rows, &left_tested);
    const double right_err = prune(tree, node.right, right_rows, &right_tested);

    TreeNode& self = tree.nodes[id];
    tested->assign(left_tested.begin(), left_tested.end());
    tested->insert(tested->end(), right_tested.begin(), right_tested.end());
    tested->push_back(self.feature);
    std::sort(tested->begin(), tested->end());
    tested->erase(std::unique(tested->begin(), tested->end()), tested->end());

    self.model = fit_ols_subset(data_, rows, *tested);
    const double model_err = adjusted_error(self.model, rows, tested->size() + 1);
    const double n = static_cast<double>(rows.size());
    const double subtree_err = (static_cast<double>(left_rows.size()) * left_err +
                                static_cast<double>(right_rows.size()) * right_err) / n;
    if (model_err <= subtree_err) {
      self.leaf = true;
      return model_err;
    }
    return subtree_err;
  }

  // Drops nodes orphaned by pruning and renumbers in depth-first order.
  static ModelTree compact(const ModelTree& tree) {
    ModelTree out;
    out.smoothing = tree.smoothing;
    out.min_leaf = tree.min_leaf;
    out.smoothing_k = tree.smoothing_k;
    copy(tree, 0, out);
    return out;
  }

  static std::size_t copy(const ModelTree& tree, std::size_t id, ModelTree& out) {
    const std::size_t at = out.nodes.size();
    out.nodes.push_back(tree.nodes[id]);
    if (tree.nodes[id].leaf) {
      out.nodes[at].left = out.nodes[at].right = 0;
      out.nodes[at].feature = 0;
      out.nodes[at].threshold = 0;
      return at;
    }
    const std::size_t l = copy(tree, tree.nodes[id].left, out);
    const std::size_t r = copy(tree, tree.nodes[id].right, out);
    out.nodes[at].left = l;
    out.nodes[at].right = r;
    return at;
  }

  const Dataset& data_;
  const M5Options& opt_;
  double root_sd_ = 0;
};

// ---- serialization --------------------------------------------------------

using ojson = nlohmann::ordered_json;

ojson linear_to_json(const LinearModel& m) {
  return ojson{{"kind", m.kind == LinearKind::ols ? "ols" : "ridge"},
               {"lambda", m.lambda},
               {"intercept", m.intercept},
               {"weights", m.weights}};
}

LinearModel linear_from_json(const nlohmann::json& j) {
  LinearModel m;
  m.kind = j.at("kind").get<std::string>() == "ridge" ? LinearKind::ridge : LinearKind::ols;
  m.lambda = j.at("lambda").get<double>();
  m.intercept = j.at("intercept").get<double>();
  m.weights = j.at("weights").get<std::vector<double>>();
  return m;
}

}  // namespace

Dataset::Dataset(std::vector<double> x, std::size_t rows, std::size_t cols, std::vector<double> y,
                 std::vector<std::string> feature_ids)
    : x_(std::move(x)), rows_(rows), cols_(cols), y_(std::move(y)), feature_ids_(std::move(feature_ids)) {
  if (rows_ == 0) throw DataError("dataset has no rows");
  if (x_.size() != rows_ * cols_) throw DataError("dataset matrix size mismatch");
  if (y_.size() != rows_) throw DataError("dataset label count mismatch");
  if (feature_ids_.size() != cols_) throw DataError("dataset feature id count mismatch");
  for (double v : x_) {
    if (!std::isfinite(v)) throw DataError("dataset contains a non-finite feature value");
  }
  for (double v : y_) {
    if (!std::isfinite(v)) throw DataError("dataset contains a non-finite label");
  }
}

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& rows, std::vector<double> y,
                           std::vector<std::string> feature_ids) {
  const std::size_t d = feature_ids.size();
  std::vector<double> x;
  x.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw DataError("dataset row width mismatch");
    x.insert(x.end(), r.begin(), r.end());
  }
  return Dataset(std::move(x), rows.size(), d, std::move(y), std::move(feature_ids));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(indices.size() * cols_);
  y.reserve(indices.size());
  for (std::size_t i : indices) {
    auto r = row(i);
    x.insert(x.end(), r.begin(), r.end());
    y.push_back(y_[i]);
  }
  return Dataset(std::move(x), indices.size(), cols_, std::move(y), feature_ids_);
}

double LinearModel::predict(std::span<const double> x) const {
  double s = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * x[j];
  return s;
}

LinearModel fit_ols_subset(const Dataset& data, std::span<const std::size_t> rows,
                           std::span<const std::size_t> columns) {
  if (rows.empty()) throw DataError("least squares on zero rows");
  const Centered c = center(data, rows, columns);
  VectorXd w = VectorXd::Zero(static_cast<Eigen::Index>(columns.size()));
  if (!columns.empty()) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(c.x);
    w = cod.solve(c.y);
  }
  return assemble(data, columns, c, w, LinearKind::ols, 0.0);
}

LinearModel fit_ols(const Dataset& data) {
  const auto rows = iota(data.rows());
  const auto cols = iota(data.cols());
  return fit_ols_subset(data, rows, cols);
}

LinearModel fit_ridge(const Dataset& data, double lambda) {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw ConfigError("ridge lambda must be a positive finite number");
  const auto rows = iota(data.rows());
  const auto cols = iota(data.cols());
  const Centered c = center(data, rows, cols);
  MatrixXd gram = c.x.transpose() * c.x;
  gram.diagonal().array() += lambda;
  const VectorXd w = gram.ldlt().solve(c.x.transpose() * c.y);
  return assemble(data, cols, c, w, LinearKind::ridge, lambda);
}

double standard_deviation_reduction(std::span<const double> left, std::span<const double> right) {
  std::vector<double> all(left.begin(), left.end());
  all.insert(all.end(), right.begin(), right.end());
  if (all.empty()) return 0.0;
  const double n = static_cast<double>(all.size());
  return population_sd(all) - static_cast<double>(left.size()) / n * population_sd(left) -
         static_cast<double>(right.size()) / n * population_sd(right);
}

ModelTree fit_m5p(const Dataset& data, const M5Options& options) {
  if (options.min_leaf < 2) throw ConfigError("min_leaf must be at least 2");
  return M5Builder(data, options).build();
}

std::size_t ModelTree::route(std::span<const double> x) const {
  std::size_t id = 0;
  while (!nodes[id].leaf) id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
  return id;
}

double ModelTree::predict(std::span<const double> x) const {
  std::vector<std::size_t> path{0};
  while (!nodes[path.back()].leaf) {
    const TreeNode& n = nodes[path.back()];
    path.push_back(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  double p = nodes[path.back()].model.predict(x);
  if (!smoothing) return p;
  // Blend upwards: p <- (n_child * p + k * q_parent) / (n_child + k).
  for (std::size_t i = path.size() - 1; i > 0; --i) {
    const double n = static_cast<double>(nodes[path[i]].count);
    const double q = nodes[path[i - 1]].model.predict(x);
    p = (n * p + smoothing_k * q) / (n + smoothing_k);
  }
  return p;
}

std::size_t ModelTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf; }));
}

std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::ols:
      return "ols";
    case ModelKind::ridge:
      return "ridge";
    case ModelKind::m5p:
      break;
  }
  return "m5p";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "ols") return ModelKind::ols;
  if (name == "ridge") return ModelKind::ridge;
  if (name == "m5p") return ModelKind::m5p;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

double Model::predict(std::span<const double> x) const {
  if (x.size() != feature_ids.size()) {
    throw DataError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                    std::to_string(feature_ids.size()));
  }
  std::vector<double> z;
  if (standardization) {
    z.resize(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - standardization->mean[j]) / standardization->scale[j];
    x = z;
  }
  double p = std::visit([&](const auto& r) { return r.predict(x); }, regressor);
  if (spec.clamp) p = std::clamp(p, 1.0, 5.0);
  return p;
}

Model train(const Dataset& data, const ModelSpec& spec, std::string manifest_hash) {
  Model model;
  model.spec = spec;
  model.manifest_hash = std::move(manifest_hash);
  model.feature_ids = data.feature_ids();

  const Dataset* fit_on = &data;
  std::optional<Dataset> scaled;
  if (spec.standardize) {
    Standardization s;
    s.mean.assign(data.cols(), 0.0);
    s.scale.assign(data.cols(), 1.0);
    const double n = static_cast<double>(data.rows());
    for (std::size_t j = 0; j < data.cols(); ++j) {
      double mean = 0;
      for (std::size_t i = 0; i < data.rows(); ++i) mean += data.at(i, j);
      mean /= n;
      double ss = 0;
      for (std::size_t i = 0; i < data.rows(); ++i) ss += (data.at(i, j) - mean) * (data.at(i, j) - mean);
      const double sd = std::sqrt(ss / n);
      s.mean[j] = mean;
      s.scale[j] = sd > 0 ? sd : 1.0;
    }
    std::vector<double> x(data.x());
    for (std::size_t i = 0; i < data.rows(); ++i) {
      for (std::size_t j = 0; j < data.cols(); ++j) x[i * data.cols() + j] = (x[i * data.cols() + j] - s.mean[j]) / s.scale[j];
    }
    scaled.emplace(std::move(x), data.rows(), data.cols(), data.y(), data.feature_ids());
    fit_on = &*scaled;
    model.standardization = std::move(s);
  }

  switch (spec.kind) {
    case ModelKind::ols:
      model.regressor = fit_ols(*fit_on);
      break;
    case ModelKind::ridge:
      model.regressor = fit_ridge(*fit_on, spec.lambda);
      break;
    case ModelKind::m5p: {
      M5Options opt;
      opt.min_leaf = spec.min_leaf;
      opt.smoothing = spec.smoothing;
      model.regressor = fit_m5p(*fit_on, opt);
      break;
    }
  }
  return model;
}

std::string model_to_json(const Model& model) {
  ojson j;
  j["format"] = "satislice-model/1";
  j["kind"] = model_kind_name(model.spec.kind);
  j["parameters"] = {{"lambda", model.spec.kind == ModelKind::ridge ? model.spec.lambda : 0.0},
                     {"min_leaf", model.spec.min_leaf},
                     {"smoothing", model.spec.smoothing},
                     {"standardize", model.spec.standardize},
                     {"clamp", model.spec.clamp}};
  j["feature_manifest_hash"] = model.manifest_hash;
  j["feature_ids"] = model.feature_ids;
  if (model.standardization) {
    j["standardization"] = {{"mean", model.standardization->mean}, {"scale", model.standardization->scale}};
  } else {
    j["standardization"] = nullptr;
  }
  if (const auto* lin = std::get_if<LinearModel>(&model.regressor)) {
    j["linear"] = linear_to_json(*lin);
  } else {
    const auto& tree = std::get<ModelTree>(model.regressor);
    ojson nodes = ojson::array();
    for (const auto& n : tree.nodes) {
      ojson node{{"leaf", n.leaf}, {"count", n.count}, {"mean", n.mean}};
      if (!n.leaf) {
        node["feature"] = n.feature;
        node["threshold"] = n.threshold;
        node["left"] = n.left;
        node["right"] = n.right;
      }
      node["model"] = linear_to_json(n.model);
      nodes.push_back(std::move(node));
    }
    j["tree"] = {{"smoothing", tree.smoothing}, {"smoothing_k", tree.smoothing_k}, {"nodes", std::move(nodes)}};
  }
  return j.dump(1) + "\n";
}

Model model_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    Model m;
    m.spec.kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto& p = j.at("parameters");
    m.spec.lambda = p.at("lambda").get<double>();
    m.spec.min_leaf = p.at("min_leaf").get<std::size_t>();
    m.spec.smoothing = p.at("smoothing").get<bool>();
    m.spec.standardize = p.at("standardize").get<bool>();
    m.spec.clamp = p.at("clamp").get<bool>();
    m.manifest_hash = j.at("feature_manifest_hash").get<std::string>();
    m.feature_ids = j.at("feature_ids").get<std::vector<std::string>>();
    if (!j.at("standardization").is_null()) {
      m.standardization = Standardization{j["standardization"].at("mean").get<std::vector<double>>(),
                                          j["standardization"].at("scale").get<std::vector<double>>()};
    }
    if (j.contains("linear")) {
      m.regressor = linear_from_json(j["linear"]);
    } else {
      ModelTree tree;
      const auto& t = j.at("tree");
      tree.smoothing = t.at("smoothing").get<bool>();
      tree.smoothing_k = t.at("smoothing_k").get<double>();
      tree.min_leaf = m.spec.min_leaf;
      for (const auto& n : t.at("nodes")) {
        TreeNode node;
        node.leaf = n.at("leaf").get<bool>();
        node.count = n.at("count").get<std::size_t>();
        node.mean = n.at("mean").get<double>();
        if (!node.leaf) {
          node.feature = n.at("feature").get<std::size_t>();
          node.threshold = n.at("threshold").get<double>();
          node.left = n.at("left").get<std::size_t>();
          node.right = n.at("right").get<std::size_t>();
        }
        node.model = linear_from_json(n.at("model"));
        tree.nodes.push_back(std::move(node));
      }
      if (tree.nodes.empty()) throw DataError("model tree has no nodes");
      m.regressor = std::move(tree);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace satislice
