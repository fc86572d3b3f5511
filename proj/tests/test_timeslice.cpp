#include <doctest.h>

#include <filesystem>
#include <set>

#include "satislice/error.hpp"
#include "satislice/time.hpp"
#include "satislice/timeslice.hpp"
#include "support.hpp"

using namespace satislice;
using support::ts;

namespace {

const Lexicon& demo() {
  static const Lexicon lex = Lexicon::load(support::data_dir() / "lexicon_demo.csv");
  return lex;
}

std::vector<UserRecord> random_records(support::Gen& gen, std::size_t n, std::size_t n_cities) {
  static const std::vector<std::string> texts{"今天很开心。", "工作太累了！", "abc def", "@朋友 你好？"};
  static const std::vector<std::string> cities{"Zhuhai", "Foshan", "Dongguan", "Shenzhen", "Yunfu"};
  std::vector<UserRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    UserRecord r;
    r.user_id = "u" + std::to_string(i);
    r.city = cities[gen.below(n_cities)];
    r.registered_at = ts("2011-06-01T00:00:00Z") + days(static_cast<long long>(gen.below(500)));
    for (std::size_t k = 0, m = gen.below(40); k < m; ++k) {
      r.statuses.push_back({r.registered_at + Duration{static_cast<long long>(gen.uniform(0, 4e10))},
                            texts[gen.below(texts.size())], gen.chance(0.2)});
    }
    std::sort(r.statuses.begin(), r.statuses.end(),
              [](const Status& a, const Status& b) { return a.posted_at < b.posted_at; });
    records.push_back(std::move(r));
  }
  return records;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("satislice_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("timeslice") {
  TEST_CASE("monthly grid examples") {
    const TimeGrid g = monthly_grid(parse_year_month("2012-02"), 13);
    REQUIRE(g.size() == 13);
    CHECK(format_timestamp(g.points().front()) == "2012-02-01T00:00:00Z");
    CHECK(format_timestamp(g.points()[1]) == "2012-03-01T00:00:00Z");
    CHECK(format_timestamp(g.points().back()) == "2013-02-01T00:00:00Z");

    const TimeGrid roll = monthly_grid(parse_year_month("2012-12"), 2);
    CHECK(format_date(roll.points()[0]) == "2012-12-01");
    CHECK(format_date(roll.points()[1]) == "2013-01-01");
    CHECK(monthly_grid(parse_year_month("2012-02"), 1).size() == 1);
    CHECK_THROWS_AS(monthly_grid(parse_year_month("2012-02"), 0), ConfigError);
  }

  TEST_CASE("grid must be strictly increasing and non-empty") {
    std::vector<Timestamp> pts = monthly_grid(parse_year_month("2012-02"), 13).points();
    std::reverse(pts.begin(), pts.end());
    CHECK_THROWS_AS(TimeGrid{pts}, ConfigError);
    CHECK_THROWS_AS(TimeGrid{std::vector<Timestamp>{}}, ConfigError);
    const Timestamp t = ts("2012-02-01T00:00:00Z");
    CHECK_THROWS_AS((TimeGrid{{t, t}}), ConfigError);
  }

  TEST_CASE("one user at one point gives a 1x133 block") {
    UserRecord r;
    r.user_id = "solo";
    r.city = "Zhuhai";
    r.registered_at = ts("2012-01-01T00:00:00Z");
    const auto blocks = build_blocks({r}, TimeGrid({ts("2012-02-01T00:00:00Z")}), default_registry(), demo(), {});
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].users == std::vector<std::string>{"solo"});
    REQUIRE(blocks[0].rows.size() == 1);
    CHECK(blocks[0].rows[0].size() == 133);
    CHECK(feature_columns(default_registry(), demo()).size() == 133);
  }

  TEST_CASE("block count, user coverage and monotone status counts") {
    support::Gen gen(41);
    const TimeGrid grid = monthly_grid(parse_year_month("2012-02"), 13);
    const std::size_t status_col = 19 + 5;  // status_count follows 19 profile-level and 5 counter features
    REQUIRE(feature_columns(default_registry(), demo())[status_col] == "status_count");
    for (int round = 0; round < 5; ++round) {
      const auto records = random_records(gen, 1 + gen.below(15), 1 + gen.below(5));
      std::set<std::string> cities;
      for (const auto& r : records) cities.insert(r.city);
      const auto blocks = build_blocks(records, grid, default_registry(), demo(), {});
      CHECK(blocks.size() == cities.size() * grid.size());
      for (const auto& city : cities) {
        std::set<std::string> expected, seen;
        for (const auto& r : records) {
          if (r.city == city) expected.insert(r.user_id);
        }
        std::vector<double> prev;
        for (const auto& b : blocks) {
          if (b.city != city) continue;
          seen.insert(b.users.begin(), b.users.end());
          CHECK(b.users.size() == expected.size());
          std::vector<double> counts;
          for (const auto& row : b.rows) counts.push_back(row[status_col]);
          if (!prev.empty()) {
            for (std::size_t i = 0; i < counts.size(); ++i) CHECK(counts[i] >= prev[i]);
          }
          prev = counts;
        }
        CHECK(seen == expected);
      }
    }
  }

  TEST_CASE("rebuilding is bit-identical") {
    support::Gen gen(43);
    const auto records = random_records(gen, 12, 3);
    const TimeGrid grid = monthly_grid(parse_year_month("2012-02"), 4);
    const auto a = build_blocks(records, grid, default_registry(), demo(), {});
    const auto b = build_blocks(records, grid, default_registry(), demo(), {});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].city == b[i].city);
      CHECK(a[i].users == b[i].users);
      CHECK(a[i].rows == b[i].rows);
    }
  }

  TEST_CASE("block store round-trips exactly") {
    support::Gen gen(47);
    const auto records = random_records(gen, 8, 2);
    const auto blocks =
        build_blocks(records, monthly_grid(parse_year_month("2012-11"), 3), default_registry(), demo(), {});
    const auto dir = scratch("blocks");
    const auto cols = feature_columns(default_registry(), demo());
    write_block_store(dir, blocks, cols);
    CHECK(std::filesystem::exists(dir / "index.json"));
    CHECK(block_file_name(blocks[0]) == blocks[0].city + "__2012-11-01.csv");
    std::vector<std::string> read_cols;
    const auto back = read_block_store(dir, &read_cols);
    CHECK(read_cols == cols);
    REQUIRE(back.size() == blocks.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].city == blocks[i].city);
      CHECK(back[i].at == blocks[i].at);
      CHECK(back[i].users == blocks[i].users);
      CHECK(back[i].rows == blocks[i].rows);
    }
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(read_block_store(dir, nullptr), StageError);
  }

  TEST_CASE("manifest hash depends on column order") {
    auto cols = feature_columns(default_registry(), demo());
    const std::string h = feature_manifest_hash(cols);
    std::swap(cols[0], cols[1]);
    CHECK(feature_manifest_hash(cols) != h);
  }
}
