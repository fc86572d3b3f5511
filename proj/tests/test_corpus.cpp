#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "satislice/corpus.hpp"
#include "satislice/error.hpp"
#include "support.hpp"

using namespace satislice;
using support::ts;

namespace {

const CityTable& cities() {
  static const CityTable table = CityTable::load(support::data_dir() / "cities.csv");
  return table;
}

std::string user_line(const std::string& id, const std::string& extra = "") {
  return R"({"user_id":")" + id + R"(","city":"Zhuhai","gender":"female","age":23,)" +
         R"("registered_at":"2011-01-01T00:00:00Z","profile":{},)" +
         R"("statuses":[{"posted_at":"2012-05-01T00:00:00Z","text":"b","is_repost":false},)" +
         R"({"posted_at":"2012-01-01T00:00:00Z","text":"a","is_repost":false}])" + extra + "}";
}

DimensionMap default_map() { return DimensionMap::load(support::data_dir() / "dimension_map.json"); }

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("city table has the 21 sampling cities") {
    CHECK(cities().size() == 21);
    CHECK(cities().contains("Zhongshan"));
    CHECK(cities().contains("Dongguan"));
    CHECK_FALSE(cities().contains("Beijing"));
  }

  TEST_CASE("ingest of an empty text yields no records") { CHECK(ingest_text("", cities()).empty()); }

  TEST_CASE("ingest sorts statuses and keeps user order") {
    const auto records = ingest_text(user_line("u2") + "\n\n" + user_line("u1") + "\n", cities());
    REQUIRE(records.size() == 2);
    CHECK(records[0].user_id == "u2");
    CHECK(records[1].user_id == "u1");
    REQUIRE(records[0].statuses.size() == 2);
    CHECK(records[0].statuses[0].text == "a");
    CHECK(records[0].statuses[1].text == "b");
    CHECK(records[0].gender == Gender::female);
    CHECK(records[0].age == 23);
  }

  TEST_CASE("out-of-range score is reported with its line number") {
    const std::string bad =
        user_line("u2", R"(,"answers":[{"question_id":1,"score":6,"submitted_at":"2013-02-20T00:00:00Z"}])");
    try {
      ingest_text(user_line("u1") + "\n" + bad + "\n", cities(), "corpus.jsonl");
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("corpus.jsonl:2") != std::string::npos);
      CHECK(std::string(e.what()).find("score") != std::string::npos);
    }
  }

  TEST_CASE("unknown city is named") {
    std::string line = user_line("u1");
    line.replace(line.find("Zhuhai"), 6, "Atlantis");
    try {
      ingest_text(line, cities());
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("Atlantis") != std::string::npos);
    }
  }

  TEST_CASE("malformed and inconsistent lines are rejected") {
    CHECK_THROWS_AS(ingest_text("{not json", cities()), DataError);
    CHECK_THROWS_AS(ingest_text(R"({"user_id":"x"})", cities()), DataError);
    // duplicate question id
    CHECK_THROWS_AS(ingest_text(user_line("u", R"(,"answers":[{"question_id":1,"score":3,"submitted_at":"2013-02-20T00:00:00Z"},{"question_id":1,"score":3,"submitted_at":"2013-02-20T00:00:05Z"}])"),
                                cities()),
                    DataError);
    // status before registration
    std::string early = user_line("u");
    early.replace(early.find("2011-01-01"), 10, "2012-03-01");
    CHECK_THROWS_AS(ingest_text(early, cities()), DataError);
    // empty text is only allowed on reposts
    std::string empty = user_line("u");
    empty.replace(empty.find(R"("text":"a")"), 10, R"("text":"")");
    CHECK_THROWS_AS(ingest_text(empty, cities()), DataError);
    std::string repost = empty;
    const std::string plain = R"("text":"","is_repost":false)";
    repost.replace(repost.find(plain), plain.size(), R"("text":"","is_repost":true)");
    CHECK_NOTHROW(ingest_text(repost, cities()));
  }

  TEST_CASE("missing corpus file is a configuration error") {
    CHECK_THROWS_AS(ingest("/nonexistent/corpus.jsonl", cities()), ConfigError);
  }

  TEST_CASE("activity filter boundaries") {
    const Timestamp as_of = ts("2013-03-01T00:00:00Z");
    const std::vector<UserRecord> records{
        support::user_with_statuses("u499", 499, as_of - days(1)),
        support::user_with_statuses("u500", 500, as_of - days(1)),
        support::user_with_statuses("u10000", 10000, as_of - days(91)),
        support::user_with_statuses("edge", 500, as_of - days(90)),
    };
    const FilterResult result = filter_active(records, as_of);
    REQUIRE(result.kept.size() == 2);
    CHECK(result.kept[0].user_id == "u500");
    CHECK(result.kept[1].user_id == "edge");
    REQUIRE(result.excluded.size() == 2);
    CHECK(result.excluded[0].user_id == "u499");
    CHECK(result.excluded[0].reason == ExclusionReason::too_few_statuses);
    CHECK(result.excluded[1].user_id == "u10000");
    CHECK(result.excluded[1].reason == ExclusionReason::inactive_recently);
  }

  TEST_CASE("statuses after as_of do not count as recent activity") {
    const Timestamp as_of = ts("2013-03-01T00:00:00Z");
    UserRecord r = support::user_with_statuses("late", 600, as_of - days(100));
    r.statuses.push_back({as_of + days(2), "future", false});
    CHECK(filter_active({r}, as_of).excluded.size() == 1);
  }

  TEST_CASE("statuses after as_of do not count toward the status minimum") {
    const Timestamp as_of = ts("2013-03-01T00:00:00Z");
    UserRecord r = support::user_with_statuses("short", 499, as_of - days(1));
    r.statuses.push_back({as_of + days(1), "later", false});
    const FilterResult at_cutoff = filter_active({r}, as_of);
    REQUIRE(at_cutoff.excluded.size() == 1);
    CHECK(at_cutoff.excluded[0].reason == ExclusionReason::too_few_statuses);
    CHECK(filter_active({r}, as_of + days(2)).kept.size() == 1);
  }

  TEST_CASE("activity filter partitions its input and is idempotent") {
    support::Gen gen(11);
    const Timestamp as_of = ts("2013-03-01T00:00:00Z");
    for (int round = 0; round < 20; ++round) {
      std::vector<UserRecord> records;
      const std::size_t n = 1 + gen.below(12);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t count = 495 + gen.below(10);
        const Timestamp last = as_of - days(static_cast<long long>(gen.below(120)));
        records.push_back(support::user_with_statuses("u" + std::to_string(i), count, last));
      }
      const FilterResult first = filter_active(records, as_of);
      CHECK(first.kept.size() + first.excluded.size() == records.size());
      std::set<std::string> kept, excluded;
      for (const auto& r : first.kept) kept.insert(r.user_id);
      for (const auto& e : first.excluded) excluded.insert(e.user_id);
      for (const auto& id : kept) CHECK(excluded.count(id) == 0);
      const FilterResult again = filter_active(first.kept, as_of);
      CHECK(again.excluded.empty());
      REQUIRE(again.kept.size() == first.kept.size());
      for (std::size_t i = 0; i < again.kept.size(); ++i) CHECK(again.kept[i].user_id == first.kept[i].user_id);
    }
  }

  TEST_CASE("survey response-time rule") {
    UserRecord r;
    r.answers = support::answers_with_gap(2000);
    CHECK(validate_survey(r).valid());
    CHECK(validate_survey(r).shortest_gap == Duration{2000});

    r.answers = support::answers_with_gap(3000);
    r.answers[7].submitted_at = r.answers[6].submitted_at + Duration{1900};
    const SurveyCheck fast = validate_survey(r);
    CHECK(fast.verdict == SurveyVerdict::too_fast);
    CHECK(fast.shortest_gap == Duration{1900});

    r.answers = support::answers_with_gap(3000, 3, 12);
    CHECK(validate_survey(r).verdict == SurveyVerdict::incomplete);
  }

  TEST_CASE("survey validation ignores answer order") {
    support::Gen gen(5);
    for (int round = 0; round < 50; ++round) {
      UserRecord r;
      r.answers = support::answers_with_gap(0);
      Timestamp at = ts("2013-02-20T10:00:00Z");
      for (auto& a : r.answers) {
        at += Duration{static_cast<long long>(1500 + gen.below(2000))};
        a.submitted_at = at;
      }
      const SurveyCheck sorted = validate_survey(r);
      std::shuffle(r.answers.begin(), r.answers.end(), gen.engine());
      const SurveyCheck shuffled = validate_survey(r);
      CHECK(sorted.verdict == shuffled.verdict);
      CHECK(sorted.shortest_gap == shuffled.shortest_gap);
    }
  }

  TEST_CASE("labels aggregate mapped questions") {
    UserRecord r;
    r.answers = support::answers_with_gap(3000, 3);
    const SatisfactionLabels all3 = labels_from_answers(r, default_map());
    for (Dimension d : kDimensions) CHECK(all3[d] == 3.0);

    r.answers[3].score = 4;  // question 4 -> IS
    r.answers[4].score = 5;  // question 5 -> IS
    CHECK(labels_from_answers(r, default_map())[Dimension::IS] == 4.5);

    const DimensionMap median_map({{{1, 2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}, {12, 13}}}, Aggregation::median);
    r.answers[0].score = 1;
    r.answers[1].score = 5;
    r.answers[2].score = 4;
    CHECK(labels_from_answers(r, median_map)[Dimension::LS] == 4.0);
    CHECK(labels_from_answers(r, default_map())[Dimension::LS] == doctest::Approx(10.0 / 3.0));
  }

  TEST_CASE("mean labels stay within the contributing scores") {
    support::Gen gen(7);
    const DimensionMap map = default_map();
    for (int round = 0; round < 100; ++round) {
      UserRecord r;
      r.answers = support::answers_with_gap(3000);
      for (auto& a : r.answers) a.score = 1 + static_cast<int>(gen.below(5));
      const SatisfactionLabels labels = labels_from_answers(r, map);
      for (Dimension d : kDimensions) {
        int lo = 5, hi = 1;
        for (int q : map.questions(d)) {
          lo = std::min(lo, r.answers[q - 1].score);
          hi = std::max(hi, r.answers[q - 1].score);
        }
        CHECK(labels[d] >= lo);
        CHECK(labels[d] <= hi);
      }
    }
  }

  TEST_CASE("dimension with no answered question is an error") {
    UserRecord r;
    r.answers = support::answers_with_gap(3000);
    r.answers.erase(r.answers.begin() + 3, r.answers.begin() + 5);  // drop questions 4 and 5
    CHECK_THROWS_AS(labels_from_answers(r, default_map()), DataError);
  }

  TEST_CASE("dimension map must cover every question and dimension") {
    CHECK_THROWS_AS(DimensionMap::parse(R"({"LS":[1,2,3],"IS":[4,5],"SPS":[6,7],"NES":[8,9],"LES":[10,11,12,13]})"),
                    ConfigError);
    CHECK_THROWS_AS(
        DimensionMap::parse(R"({"LS":[1,2,3],"IS":[3,4,5],"SPS":[6,7],"NES":[8,9],"LES":[10,11],"SJS":[12,13]})"),
        ConfigError);
    CHECK_THROWS_AS(
        DimensionMap::parse(R"({"LS":[1,2],"IS":[4,5],"SPS":[6,7],"NES":[8,9],"LES":[10,11],"SJS":[12,13]})"),
        ConfigError);
    CHECK_THROWS_AS(DimensionMap::parse(
                        R"({"LS":[1,2,3],"IS":[4,5],"SPS":[6,7],"NES":[8,9],"LES":[10,11],"SJS":[12,13],"aggregation":"mode"})"),
                    ConfigError);
    const DimensionMap ok = DimensionMap::parse(
        R"({"LS":[1,2,3],"IS":[4,5],"SPS":[6,7],"NES":[8,9],"LES":[10,11],"SJS":[12,13],"aggregation":"median"})");
    CHECK(ok.aggregation() == Aggregation::median);
  }

  TEST_CASE("cohort-shaped fixture round-trips its summary statistics") {
    // 892 women and 1126 men whose ages sum to 45082, a mean of 22.3399.
    constexpr int kFemale = 892, kMale = 1126, kAgeSum = 45082;
    std::string jsonl;
    int age_left = kAgeSum;
    for (int i = 0; i < kFemale + kMale; ++i) {
      const int age = i + 1 == kFemale + kMale ? age_left : (i % 3 == 0 ? 25 : 21);
      age_left -= age;
      nlohmann::json u{{"user_id", "c" + std::to_string(i)},
                       {"city", cities().entries()[static_cast<std::size_t>(i) % 21].city},
                       {"gender", i < kFemale ? "female" : "male"},
                       {"age", age},
                       {"registered_at", "2011-01-01T00:00:00Z"}};
      jsonl += u.dump() + "\n";
    }
    const auto records = ingest_text(jsonl, cities());
    REQUIRE(records.size() == 2018);
    const CohortSummary s = summarize(records);
    CHECK(s.users == 2018);
    CHECK(s.female == 892);
    CHECK(s.male == 1126);
    CHECK(s.unspecified == 0);
    CHECK(std::round(s.mean_age * 100) / 100 == doctest::Approx(22.34).epsilon(1e-12));
    for (const auto& r : records) CHECK(r.age >= 18);
  }
}
