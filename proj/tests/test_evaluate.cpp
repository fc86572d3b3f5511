#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "oracles.hpp"
#include "satislice/error.hpp"
#include "satislice/evaluate.hpp"
#include "support.hpp"

using namespace satislice;

namespace {

std::vector<std::string> ids(std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < d; ++j) out.push_back("f" + std::to_string(j));
  return out;
}

Dataset linear_data(support::Gen& gen, std::size_t n, std::size_t d, double noise) {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    double v = 2.0;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = gen.normal();
      v += (0.5 + 0.25 * static_cast<double>(j)) * row[j];
    }
    x.push_back(row);
    y.push_back(v + noise * gen.normal());
  }
  return Dataset::from_rows(x, y, ids(d));
}

}  // namespace

TEST_SUITE("evaluate") {
  TEST_CASE("mae and pcc on small examples") {
    const std::vector<double> p{1, 2, 3, 4};
    const std::vector<double> t{2, 2, 2, 6};
    CHECK(mae(p, t) == doctest::Approx(1.0));
    CHECK(pcc(p, p) == doctest::Approx(1.0));
    const std::vector<double> rev{4, 3, 2, 1};
    CHECK(pcc(p, rev) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(mae(p, std::vector<double>{1, 2}), DataError);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), DataError);
    CHECK_THROWS_AS(pcc(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DataError);
    CHECK_THROWS_AS(pcc(p, std::vector<double>{3, 3, 3, 3}), DataError);
  }

  TEST_CASE("mae and pcc agree with loop and raw-sum oracles") {
    support::Gen gen(11);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 3 + gen.below(40);
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = gen.uniform(-5, 5);
        b[i] = 0.3 * a[i] + gen.normal();
      }
      CHECK(mae(a, b) == doctest::Approx(oracle::loop_mae(a, b)).epsilon(1e-12));
      CHECK(pcc(a, b) == doctest::Approx(oracle::sums_pcc(a, b)).epsilon(1e-9));
    }
  }

  TEST_CASE("pcc is invariant under positive affine maps and flips sign under negation") {
    support::Gen gen(12);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 5 + gen.below(30);
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = gen.normal();
        b[i] = a[i] + gen.normal();
      }
      const double scale = gen.uniform(0.1, 10);
      const double shift = gen.uniform(-100, 100);
      std::vector<double> c(n), neg(n);
      for (std::size_t i = 0; i < n; ++i) {
        c[i] = scale * a[i] + shift;
        neg[i] = -a[i];
      }
      const double r = pcc(a, b);
      CHECK(pcc(c, b) == doctest::Approx(r).epsilon(1e-9));
      CHECK(pcc(neg, b) == doctest::Approx(-r).epsilon(1e-9));
      CHECK(pcc(b, a) == doctest::Approx(r).epsilon(1e-12));
      CHECK(std::fabs(r) <= 1.0);
      CHECK(mae(a, b) == doctest::Approx(mae(b, a)));
      CHECK(mae(a, b) >= 0);
    }
  }

  TEST_CASE("accuracy from mae") {
    CHECK(accuracy_from_mae(0.62) == doctest::Approx(84.5));
    CHECK(accuracy_from_mae(0.0) == doctest::Approx(100.0));
    CHECK(accuracy_from_mae(4.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(accuracy_from_mae(-0.1), DataError);
  }

  TEST_CASE("two-tailed t probabilities") {
    CHECK(t_cdf_two_tailed(0.0, 5) == doctest::Approx(1.0));
    CHECK(t_cdf_two_tailed(1.0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(t_cdf_two_tailed(2.093, 19) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(t_cdf_two_tailed(std::numeric_limits<double>::infinity(), 7) == 0.0);
    CHECK(t_cdf_two_tailed(-2.0, 10) == doctest::Approx(t_cdf_two_tailed(2.0, 10)));
    CHECK_THROWS_AS(t_cdf_two_tailed(1.0, 0), DataError);
  }

  TEST_CASE("t tail matches Simpson integration of the density") {
    for (int df : {1, 2, 5, 19, 40}) {
      for (double t : {0.1, 0.7, 1.5, 2.093, 2.861, 4.0}) {
        CAPTURE(df);
        CAPTURE(t);
        CHECK(std::fabs(t_cdf_two_tailed(t, df) - oracle::t_two_tailed_simpson(t, df)) <= 1e-8);
      }
    }
  }

  TEST_CASE("p value is monotone in |r|") {
    double prev = 1.0;
    for (double r = 0.0; r < 0.99; r += 0.05) {
      const double p = pearson_p_value(r, 21);
      CHECK(p <= prev + 1e-15);
      CHECK(pearson_p_value(-r, 21) == doctest::Approx(p));
      prev = p;
    }
    CHECK(pearson_p_value(1.0, 21) == 0.0);
    CHECK_THROWS_AS(pearson_p_value(0.5, 2), DataError);
  }

  TEST_CASE("stars thresholds") {
    CHECK(stars_for(0.0099) == Stars::p01);
    CHECK(stars_for(0.01) == Stars::p05);
    CHECK(stars_for(0.0499) == Stars::p05);
    CHECK(stars_for(0.05) == Stars::none);
    CHECK(stars_suffix(Stars::p01) == "**");
    CHECK(stars_suffix(Stars::p05) == "*");
    CHECK(stars_suffix(Stars::none).empty());
  }

  TEST_CASE("fold assignment partitions rows into near-equal folds") {
    support::Gen gen(13);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t folds = 2 + gen.below(9);
      const std::size_t n = folds + gen.below(200);
      const auto f = fold_assignment(n, folds, gen.engine()());
      REQUIRE(f.size() == n);
      std::vector<std::size_t> counts(folds, 0);
      for (auto id : f) {
        REQUIRE(id < folds);
        ++counts[id];
      }
      const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
      CHECK(*hi - *lo <= 1);
      CHECK(*lo >= 1);
    }
    CHECK(fold_assignment(50, 5, 9) == fold_assignment(50, 5, 9));
    CHECK(fold_assignment(50, 5, 9) != fold_assignment(50, 5, 10));
    CHECK_THROWS_AS(fold_assignment(10, 1, 0), ConfigError);
    CHECK_THROWS_AS(fold_assignment(3, 5, 0), DataError);
  }

  TEST_CASE("cross-validation recovers a noiseless linear target") {
    support::Gen gen(14);
    const Dataset data = linear_data(gen, 60, 4, 0.0);
    const auto cv = cross_validate(data, ModelSpec{}, 10, 42);
    CHECK(cv.pcc == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(cv.mae < 1e-8);
    CHECK(cv.predictions.size() == 60);
  }

  TEST_CASE("cross-validation on shuffled labels finds no signal") {
    support::Gen gen(15);
    Dataset data = linear_data(gen, 200, 3, 0.5);
    std::vector<double> y(data.y().begin(), data.y().end());
    std::shuffle(y.begin(), y.end(), gen.engine());
    std::vector<std::vector<double>> x;
    for (std::size_t i = 0; i < data.rows(); ++i) x.emplace_back(data.row(i).begin(), data.row(i).end());
    const Dataset shuffled = Dataset::from_rows(x, y, ids(3));
    const auto cv = cross_validate(shuffled, ModelSpec{}, 10, 1);
    CHECK(std::fabs(cv.pcc) < 0.2);
  }

  TEST_CASE("cross-validation predictions come from models that never saw the row") {
    support::Gen gen(16);
    const Dataset data = linear_data(gen, 12, 2, 0.3);
    const auto cv = cross_validate(data, ModelSpec{}, 12, 3);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      std::vector<std::size_t> rest;
      for (std::size_t j = 0; j < data.rows(); ++j) {
        if (j != i) rest.push_back(j);
      }
      const Model m = train(data.subset(rest), ModelSpec{});
      CHECK(cv.predictions[i] == doctest::Approx(m.predict(data.row(i))).epsilon(1e-12));
    }
  }

  TEST_CASE("cross-validation yields NaN PCC for constant labels") {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 20; ++i) {
      x.push_back({static_cast<double>(i)});
      y.push_back(3.0);
    }
    const auto cv = cross_validate(Dataset::from_rows(x, y, ids(1)), ModelSpec{}, 4, 5);
    CHECK(std::isnan(cv.pcc));
    CHECK(cv.mae == doctest::Approx(0.0));
  }

  TEST_CASE("lambda selection returns the grid entry with the lowest CV error") {
    support::Gen gen(17);
    const Dataset data = linear_data(gen, 40, 6, 1.0);
    const std::vector<double> grid{0.01, 1.0, 100.0, 1e6};
    const double chosen = select_lambda(data, grid, 5, 7);
    double best = std::numeric_limits<double>::infinity();
    double expect = grid.front();
    for (double l : grid) {
      ModelSpec s;
      s.kind = ModelKind::ridge;
      s.lambda = l;
      const double m = cross_validate(data, s, 5, 7).mae;
      if (m < best) {
        best = m;
        expect = l;
      }
    }
    CHECK(chosen == expect);
    CHECK(chosen != 1e6);
    CHECK_THROWS_AS(select_lambda(data, std::vector<double>{}, 5, 7), ConfigError);
  }

  TEST_CASE("regional median") {
    CHECK(regional_median(std::vector<double>{3, 1, 2}) == 2.0);
    CHECK(regional_median(std::vector<double>{4, 1, 3, 2}) == 2.5);
    CHECK(regional_median(std::vector<double>{7}) == 7.0);
    CHECK_THROWS_AS(regional_median(std::vector<double>{}), DataError);
  }

  TEST_CASE("median splits a sample in half") {
    support::Gen gen(18);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> v(1 + gen.below(30));
      for (auto& x : v) x = gen.uniform(-3, 3);
      const double m = regional_median(v);
      const auto below = std::count_if(v.begin(), v.end(), [&](double x) { return x < m; });
      const auto above = std::count_if(v.begin(), v.end(), [&](double x) { return x > m; });
      CHECK(static_cast<std::size_t>(below) <= v.size() / 2);
      CHECK(static_cast<std::size_t>(above) <= v.size() / 2);
    }
  }

  TEST_CASE("index table parsing") {
    const auto table = IndexTable::parse("index,A,B,C\n# note\nGDP,1,2,3\nCPI,4.5,5,-6\n");
    CHECK(table.cities() == std::vector<std::string>{"A", "B", "C"});
    CHECK(table.names() == std::vector<std::string>{"GDP", "CPI"});
    CHECK(table.row(1)[2] == -6.0);
    CHECK_THROWS_AS(IndexTable::parse("city,A,B\n"), DataError);
    CHECK_THROWS_AS(IndexTable::parse("index,A,B\nGDP,1\n"), DataError);
    CHECK_THROWS_AS(IndexTable::parse("index,A,B\nGDP,1,x\n"), DataError);
    CHECK_THROWS_AS(IndexTable::parse(""), DataError);
  }

  TEST_CASE("index correlation over common cities") {
    const auto table = IndexTable::parse("index,A,B,C,D,Z\nUp,1,2,3,4,100\nFlat,5,5,5,5,5\n");
    RegionalValues regional;
    for (int i = 0; i < 4; ++i) {
      std::array<double, 6> v{};
      for (std::size_t d = 0; d < 6; ++d) v[d] = (d % 2 == 0 ? 1.0 : -1.0) * i + static_cast<double>(d);
      regional[std::string(1, static_cast<char>('A' + i))] = v;
    }
    regional["Q"] = {};
    const auto rows = correlate_indexes(regional, table);
    REQUIRE(rows.size() == 12);
    CHECK(rows[0].index == "Up");
    CHECK(rows[0].n == 4);
    CHECK(rows[0].r == doctest::Approx(1.0));
    CHECK(rows[0].p == 0.0);
    CHECK(rows[0].stars == Stars::p01);
    CHECK(rows[1].r == doctest::Approx(-1.0));
    CHECK(std::isnan(rows[6].r));
    CHECK(rows[6].stars == Stars::none);
    const auto csv = correlation_table_csv(rows);
    CHECK(csv.find("Up,1.00**,-1.00**") != std::string::npos);
    CHECK(csv.find("Flat,NaN,NaN") != std::string::npos);
    const auto back = correlations_from_json(correlations_to_json(rows));
    REQUIRE(back.size() == rows.size());
    CHECK(back[1].r == rows[1].r);
    CHECK(std::isinf(back[1].t));
    CHECK(back[1].t < 0);
    CHECK(std::isnan(back[6].p));
  }

  TEST_CASE("index correlation needs three common cities") {
    const auto table = IndexTable::parse("index,A,B,C\nGDP,1,2,3\n");
    RegionalValues regional;
    regional["A"] = {1, 1, 1, 1, 1, 1};
    regional["B"] = {2, 2, 2, 2, 2, 2};
    CHECK_THROWS_AS(correlate_indexes(regional, table), DataError);
  }

  TEST_CASE("zero correlation is not significant") {
    const auto table = IndexTable::parse("index,A,B,C,D\nI,1,-1,-1,1\n");
    RegionalValues regional;
    const double xs[] = {1, 2, 3, 4};
    const char* names[] = {"A", "B", "C", "D"};
    for (int i = 0; i < 4; ++i) regional[names[i]].fill(xs[i]);
    const auto rows = correlate_indexes(regional, table);
    CHECK(rows[0].r == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rows[0].p == doctest::Approx(1.0));
    CHECK(rows[0].stars == Stars::none);
  }

  TEST_CASE("evaluation report averages and round trip") {
    EvalReport report({ModelKind::ols, ModelKind::m5p});
    double k = 0;
    for (Dimension d : kDimensions) {
      report.set(d, ModelKind::ols, {0.1 * k, 1.0 + k});
      report.set(d, ModelKind::m5p, {0.5, 0.6});
      report.set_lambda(d, 10.0);
      k += 1;
    }
    report.set(Dimension::SJS, ModelKind::m5p, {std::numeric_limits<double>::quiet_NaN(), 0.6});
    CHECK(report.average(ModelKind::ols).pcc == doctest::Approx(0.25));
    CHECK(report.average(ModelKind::ols).mae == doctest::Approx(3.5));
    CHECK(std::isnan(report.average(ModelKind::m5p).pcc));
    CHECK_THROWS_AS(report.get(Dimension::LS, ModelKind::ridge), ConfigError);
    const auto back = EvalReport::from_json(report.to_json());
    CHECK(back.kinds() == report.kinds());
    CHECK(back.get(Dimension::NES, ModelKind::ols).mae == report.get(Dimension::NES, ModelKind::ols).mae);
    CHECK(std::isnan(back.get(Dimension::SJS, ModelKind::m5p).pcc));
    CHECK(back.lambda(Dimension::IS) == 10.0);
    CHECK(back.to_csv() == report.to_csv());
    const auto csv = report.to_csv();
    CHECK(csv.rfind("Dim.,Linear regression PCC,Linear regression MAE,M5P PCC,M5P MAE\n", 0) == 0);
    CHECK(csv.find("\nAVE,0.2500,3.5000,NaN,0.6000\n") != std::string::npos);
    CHECK_THROWS_AS(EvalReport::from_json("{}"), DataError);
    CHECK_THROWS_AS(EvalReport(std::vector<ModelKind>{}), ConfigError);
  }
}
