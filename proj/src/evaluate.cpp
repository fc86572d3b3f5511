#include "satislice/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "satislice/error.hpp"
#include "satislice/io.hpp"
#include "satislice/parallel.hpp"

namespace satislice {
namespace {

using ojson = nlohmann::ordered_json;

// Lentz's method for the continued fraction of I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % n;
  }
}

void require_same_length(std::span<const double> a, std::span<const double> b, std::size_t min, const char* what) {
  if (a.size() != b.size()) throw DataError(std::string(what) + ": length mismatch");
  if (a.size() < min) throw DataError(std::string(what) + ": needs at least " + std::to_string(min) + " values");
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  require_same_length(pred, truth, 1, "mae");
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double pcc(std::span<const double> a, std::span<const double> b) {
  require_same_length(a, b, 3, "pcc");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DataError("pcc: correlation is undefined for a constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double accuracy_from_mae(double mae_value, double scale_range) {
  if (!(mae_value >= 0)) throw DataError("accuracy_from_mae: mae must be non-negative");
  if (!(scale_range > 0)) throw DataError("accuracy_from_mae: range must be positive");
  return 100.0 * (1.0 - mae_value / scale_range);
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw DataError("incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double t_cdf_two_tailed(double t, int df) {
  if (df < 1) throw DataError("t distribution needs df >= 1");
  if (std::isnan(t)) throw DataError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  const double nu = static_cast<double>(df);
  return incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) throw DataError("pearson significance needs n >= 3");
  if (std::abs(r) >= 1.0) return 0.0;
  const double t = r * std::sqrt(static_cast<double>(n - 2) / (1.0 - r * r));
  return t_cdf_two_tailed(t, static_cast<int>(n - 2));
}

Stars stars_for(double p) {
  if (p < 0.01) return Stars::p01;
  if (p < 0.05) return Stars::p05;
  return Stars::none;
}

std::string_view stars_suffix(Stars s) {
  switch (s) {
    case Stars::p01:
      return "**";
    case Stars::p05:
      return "*";
    case Stars::none:
      break;
  }
  return "";
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (n < folds) throw DataError("cross-validation needs at least as many rows as folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[bounded(rng, i)]);
  std::vector<std::size_t> fold(n);
  for (std::size_t p = 0; p < n; ++p) fold[order[p]] = p % folds;
  return fold;
}

CvResult cross_validate(const Dataset& data, const ModelSpec& spec, std::size_t folds, std::uint64_t seed) {
  const auto fold_of = fold_assignment(data.rows(), folds, seed);
  CvResult result;
  result.predictions.assign(data.rows(), 0.0);
  parallel_for(folds, [&](std::size_t f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < data.rows(); ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(i);
    const Model model = train(data.subset(train_rows), spec);
    for (std::size_t i : test_rows) result.predictions[i] = model.predict(data.row(i));
  });
  result.mae = mae(result.predictions, data.y());
  try {
    result.pcc = pcc(result.predictions, data.y());
  } catch (const DataError&) {
    result.pcc = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

double select_lambda(const Dataset& data, std::span<const double> grid, std::size_t folds, std::uint64_t seed) {
  if (grid.empty()) throw ConfigError("empty lambda grid");
  double best_lambda = grid.front();
  double best_mae = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    ModelSpec spec;
    spec.kind = ModelKind::ridge;
    spec.lambda = lambda;
    const double m = cross_validate(data, spec, folds, seed).mae;
    if (m < best_mae) {
      best_mae = m;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

double regional_median(std::span<const double> values) {
  if (values.empty()) throw DataError("median of an empty series");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string_view model_display_name(ModelKind k) {
  switch (k) {
    case ModelKind::ols:
      return "Linear regression";
    case ModelKind::ridge:
      return "Ridge (Pace substitute)";
    case ModelKind::m5p:
      break;
  }
  return "M5P";
}

EvalReport::EvalReport(std::vector<ModelKind> kinds) : kinds_(std::move(kinds)), cells_(kinds_.size()) {
  if (kinds_.empty()) throw ConfigError("evaluation report needs at least one model kind");
}

std::size_t EvalReport::column(ModelKind k) const {
  auto it = std::find(kinds_.begin(), kinds_.end(), k);
  if (it == kinds_.end()) throw ConfigError("model kind " + std::string(model_kind_name(k)) + " not in report");
  return static_cast<std::size_t>(it - kinds_.begin());
}

void EvalReport::set(Dimension d, ModelKind k, EvalCell cell) { cells_[column(k)][static_cast<std::size_t>(d)] = cell; }

const EvalCell& EvalReport::get(Dimension d, ModelKind k) const {
  return cells_[column(k)][static_cast<std::size_t>(d)];
}

EvalCell EvalReport::average(ModelKind k) const {
  EvalCell avg;
  for (const auto& c : cells_[column(k)]) {
    avg.pcc += c.pcc;
    avg.mae += c.mae;
  }
  avg.pcc /= 6.0;
  avg.mae /= 6.0;
  return avg;
}

std::string EvalReport::to_csv() const {
  std::string out = "Dim.";
  for (ModelKind k : kinds_) {
    out += "," + csv_field(std::string(model_display_name(k)) + " PCC");
    out += "," + csv_field(std::string(model_display_name(k)) + " MAE");
  }
  out += "\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string("NaN") : format_fixed(v, 4); };
  for (Dimension d : kDimensions) {
    out += dimension_name(d);
    for (ModelKind k : kinds_) out += "," + cell(get(d, k).pcc) + "," + cell(get(d, k).mae);
    out += "\n";
  }
  out += "AVE";
  for (ModelKind k : kinds_) out += "," + cell(average(k).pcc) + "," + cell(average(k).mae);
  out += "\n";
  return out;
}

std::string EvalReport::to_json() const {
  auto num = [](double v) { return std::isnan(v) ? ojson(nullptr) : ojson(v); };
  ojson j;
  j["protocol"] = "k-fold cross-validation, pooled out-of-fold predictions";
  j["notes"] = {"ridge regression stands in for Pace regression",
                "accuracy = 100 * (1 - MAE / 4) on the 1-5 answer scale is a reconstruction, not a published formula"};
  j["ridge_lambda"] = ojson::object();
  for (Dimension d : kDimensions) j["ridge_lambda"][std::string(dimension_name(d))] = lambda(d);
  j["models"] = ojson::array();
  for (ModelKind k : kinds_) {
    ojson m{{"kind", model_kind_name(k)}, {"name", model_display_name(k)}};
    ojson rows = ojson::object();
    for (Dimension d : kDimensions) {
      rows[std::string(dimension_name(d))] = {{"pcc", num(get(d, k).pcc)}, {"mae", num(get(d, k).mae)}};
    }
    m["dimensions"] = std::move(rows);
    const EvalCell avg = average(k);
    m["average"] = {{"pcc", num(avg.pcc)}, {"mae", num(avg.mae)}, {"accuracy_percent", num(accuracy_from_mae(avg.mae))}};
    j["models"].push_back(std::move(m));
  }
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<ModelKind> kinds;
    for (const auto& m : j.at("models")) kinds.push_back(parse_model_kind(m.at("kind").get<std::string>()));
    EvalReport report(kinds);
    for (Dimension d : kDimensions) {
      report.set_lambda(d, j.at("ridge_lambda").at(std::string(dimension_name(d))).get<double>());
    }
    auto num = [](const nlohmann::json& v) {
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    for (const auto& m : j.at("models")) {
      const ModelKind k = parse_model_kind(m.at("kind").get<std::string>());
      for (Dimension d : kDimensions) {
        const auto& c = m.at("dimensions").at(std::string(dimension_name(d)));
        report.set(d, k, {num(c.at("pcc")), num(c.at("mae"))});
      }
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string regional_series_csv(const std::vector<RegionalSeries>& series) {
  std::string out = "city,dimension,point,value\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      out += csv_field(s.city) + "," + std::string(dimension_name(s.dimension)) + "," + format_date(s.points[i]) + "," +
             format_double(s.values[i]) + "\n";
    }
  }
  return out;
}

IndexTable::IndexTable(std::vector<std::string> cities, std::vector<std::string> names,
                       std::vector<std::vector<double>> values)
    : cities_(std::move(cities)), names_(std::move(names)), values_(std::move(values)) {
  if (names_.size() != values_.size()) throw DataError("index table: name/row count mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].size() != cities_.size()) throw DataError("index table: row '" + names_[i] + "' misses cities");
    for (double v : values_[i]) {
      if (!std::isfinite(v)) throw DataError("index table: non-finite value in '" + names_[i] + "'");
    }
  }
}

IndexTable IndexTable::parse(std::string_view csv_text, std::string_view source) {
  std::istringstream in{std::string(csv_text)};
  std::string line;
  std::vector<std::string> cities, names;
  std::vector<std::vector<double>> values;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    auto f = split_csv_line(line);
    if (header) {
      if (f.empty() || f[0] != "index" || f.size() < 2) {
        throw DataError(std::string(source), lineno, "expected header 'index,<city>,...'");
      }
      cities.assign(f.begin() + 1, f.end());
      header = false;
      continue;
    }
    if (f.size() != cities.size() + 1) throw DataError(std::string(source), lineno, "row does not cover every city");
    names.push_back(f[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < f.size(); ++i) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(f[i], &used));
        if (used != f[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw DataError(std::string(source), lineno, "bad number '" + f[i] + "'");
      }
    }
    values.push_back(std::move(row));
  }
  if (header) throw DataError(std::string(source) + ": missing header");
  return IndexTable(std::move(cities), std::move(names), std::move(values));
}

IndexTable IndexTable::load(const std::filesystem::path& csv) { return parse(read_file(csv), csv.string()); }

std::vector<CorrelationRow> correlate_indexes(const RegionalValues& regional, const IndexTable& table) {
  std::vector<std::size_t> columns;
  for (std::size_t c = 0; c < table.cities().size(); ++c) {
    if (regional.count(table.cities()[c]) != 0) columns.push_back(c);
  }
  if (columns.size() < 3) {
    throw DataError("correlation needs at least 3 cities common to predictions and index table, found " +
                    std::to_string(columns.size()));
  }
  std::vector<CorrelationRow> rows;
  for (std::size_t i = 0; i < table.names().size(); ++i) {
    std::vector<double> index_values;
    for (std::size_t c : columns) index_values.push_back(table.row(i)[c]);
    for (Dimension d : kDimensions) {
      std::vector<double> sat;
      for (std::size_t c : columns) sat.push_back(regional.find(table.cities()[c])->second[static_cast<std::size_t>(d)]);
      CorrelationRow row;
      row.index = table.names()[i];
      row.dimension = d;
      row.n = columns.size();
      try {
        row.r = pcc(sat, index_values);
      } catch (const DataError&) {
        constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
        row.r = row.t = row.p = kNaN;
        rows.push_back(std::move(row));
        continue;
      }
      row.t = std::abs(row.r) >= 1.0 ? std::copysign(std::numeric_limits<double>::infinity(), row.r)
                                     : row.r * std::sqrt(static_cast<double>(row.n - 2) / (1.0 - row.r * row.r));
      row.p = pearson_p_value(row.r, row.n);
      row.stars = stars_for(row.p);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string correlation_table_csv(const std::vector<CorrelationRow>& rows) {
  std::string out = "index";
  for (Dimension d : kDimensions) out += "," + std::string(dimension_name(d));
  out += "\n";
  for (std::size_t i = 0; i < rows.size(); i += 6) {
    out += csv_field(rows[i].index);
    for (std::size_t k = 0; k < 6 && i + k < rows.size(); ++k) {
      const auto& row = rows[i + k];
      out += "," + (std::isnan(row.r) ? std::string("NaN") : format_fixed(row.r, 2) + std::string(stars_suffix(row.stars)));
    }
    out += "\n";
  }
  return out;
}

std::string correlation_long_csv(const std::vector<CorrelationRow>& rows) {
  std::string out = "index,dimension,n,r,t,p,stars\n";
  for (const auto& r : rows) {
    out += csv_field(r.index) + "," + std::string(dimension_name(r.dimension)) + "," + std::to_string(r.n) + "," +
           format_double(r.r) + "," + format_double(r.t) + "," + format_double(r.p) + "," +
           std::string(stars_suffix(r.stars)) + "\n";
  }
  return out;
}

std::string correlations_to_json(const std::vector<CorrelationRow>& rows) {
  ojson arr = ojson::array();
  for (const auto& r : rows) {
    arr.push_back({{"index", r.index},
                   {"dimension", dimension_name(r.dimension)},
                   {"n", r.n},
                   {"r", std::isnan(r.r) ? ojson(nullptr) : ojson(r.r)},
                   {"t", std::isfinite(r.t) ? ojson(r.t) : ojson(nullptr)},
                   {"p", std::isnan(r.p) ? ojson(nullptr) : ojson(r.p)},
                   {"stars", stars_suffix(r.stars)}});
  }
  return ojson{{"test", "two-tailed t test, df = n - 2"}, {"rows", std::move(arr)}}.dump(2) + "\n";
}

std::vector<CorrelationRow> correlations_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<CorrelationRow> rows;
    for (const auto& e : j.at("rows")) {
      CorrelationRow r;
      r.index = e.at("index").get<std::string>();
      const auto d = parse_dimension(e.at("dimension").get<std::string>());
      if (!d) throw DataError("unknown dimension in correlations");
      r.dimension = *d;
      r.n = e.at("n").get<std::size_t>();
      constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
      if (e.at("r").is_null()) {
        r.r = r.t = r.p = kNaN;
      } else {
        r.r = e.at("r").get<double>();
        r.t = e.at("t").is_null() ? std::copysign(std::numeric_limits<double>::infinity(), r.r)
                                  : e.at("t").get<double>();
        r.p = e.at("p").get<double>();
        r.stars = stars_for(r.p);
      }
      rows.push_back(std::move(r));
    }
    return rows;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed correlations file: ") + e.what());
  }
}

}  // namespace satislice
