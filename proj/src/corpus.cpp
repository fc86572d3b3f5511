#include "satislice/corpus.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "satislice/error.hpp"
#include "satislice/io.hpp"

namespace satislice {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kDimensionNames{"LS", "IS", "SPS", "NES", "LES", "SJS"};

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

long long require_integer(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_number_integer()) throw DataError(std::string("field '") + key + "' must be an integer");
  return v.get<long long>();
}

Gender parse_gender(const json& obj) {
  auto it = obj.find("gender");
  if (it == obj.end() || it->is_null()) return Gender::unspecified;
  if (!it->is_string()) throw DataError("field 'gender' must be a string");
  const auto& g = it->get_ref<const std::string&>();
  if (g == "female") return Gender::female;
  if (g == "male") return Gender::male;
  if (g == "unspecified") return Gender::unspecified;
  throw DataError("unknown gender '" + g + "'");
}

Profile parse_profile(const json& obj) {
  Profile profile;
  auto it = obj.find("profile");
  if (it == obj.end() || it->is_null()) return profile;
  if (!it->is_object()) throw DataError("field 'profile' must be an object");
  for (const auto& [key, value] : it->items()) {
    if (value.is_null()) continue;
    if (value.is_boolean()) {
      profile.emplace(key, value.get<bool>());
    } else if (value.is_number()) {
      profile.emplace(key, value.get<double>());
    } else if (value.is_string()) {
      profile.emplace(key, value.get<std::string>());
    } else if (value.is_array()) {
      profile.emplace(key, static_cast<double>(value.size()));
    } else {
      throw DataError("profile field '" + key + "' has unsupported type");
    }
  }
  return profile;
}

UserRecord parse_user(const json& obj, const CityTable& cities) {
  if (!obj.is_object()) throw DataError("line is not a JSON object");
  UserRecord r;
  r.user_id = require_string(obj, "user_id");
  if (r.user_id.empty()) throw DataError("empty user_id");
  r.city = require_string(obj, "city");
  if (!cities.contains(r.city)) throw DataError("unknown city '" + r.city + "'");
  r.gender = parse_gender(obj);
  const long long age = require_integer(obj, "age");
  if (age < 0 || age > 200) throw DataError("age out of range: " + std::to_string(age));
  r.age = static_cast<int>(age);
  r.registered_at = parse_timestamp(require_string(obj, "registered_at"));
  r.profile = parse_profile(obj);

  if (auto it = obj.find("statuses"); it != obj.end()) {
    if (!it->is_array()) throw DataError("field 'statuses' must be an array");
    r.statuses.reserve(it->size());
    for (const json& s : *it) {
      Status st;
      st.posted_at = parse_timestamp(require_string(s, "posted_at"));
      st.text = require_string(s, "text");
      if (auto rp = s.find("is_repost"); rp != s.end()) {
        if (!rp->is_boolean()) throw DataError("field 'is_repost' must be a boolean");
        st.is_repost = rp->get<bool>();
      }
      if (st.text.empty() && !st.is_repost) throw DataError("empty text on an original status");
      if (st.posted_at < r.registered_at) {
        throw DataError("status posted at " + format_timestamp(st.posted_at) + " precedes registration");
      }
      r.statuses.push_back(std::move(st));
    }
    std::stable_sort(r.statuses.begin(), r.statuses.end(),
                     [](const Status& a, const Status& b) { return a.posted_at < b.posted_at; });
  }

  if (auto it = obj.find("answers"); it != obj.end()) {
    if (!it->is_array()) throw DataError("field 'answers' must be an array");
    std::set<int> seen;
    for (const json& a : *it) {
      SurveyAnswer ans;
      const long long q = require_integer(a, "question_id");
      const long long score = require_integer(a, "score");
      if (q < 1 || q > kQuestionCount) throw DataError("question_id out of range: " + std::to_string(q));
      if (score < kMinScore || score > kMaxScore) throw DataError("score out of range: " + std::to_string(score));
      ans.question_id = static_cast<int>(q);
      ans.score = static_cast<int>(score);
      ans.submitted_at = parse_timestamp(require_string(a, "submitted_at"));
      if (!seen.insert(ans.question_id).second) {
        throw DataError("duplicate question_id " + std::to_string(q));
      }
      r.answers.push_back(ans);
    }
  }
  return r;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string_view dimension_name(Dimension d) { return kDimensionNames[static_cast<std::size_t>(d)]; }

std::optional<Dimension> parse_dimension(std::string_view name) {
  for (Dimension d : kDimensions) {
    if (dimension_name(d) == name) return d;
  }
  return std::nullopt;
}

std::string_view gender_name(Gender g) {
  switch (g) {
    case Gender::female:
      return "female";
    case Gender::male:
      return "male";
    case Gender::unspecified:
      break;
  }
  return "unspecified";
}

CityTable::CityTable(std::vector<Entry> entries) : entries_(std::move(entries)) {
  std::set<std::string, std::less<>> names;
  for (const auto& e : entries_) {
    if (e.city.empty()) throw ConfigError("city table: empty city name");
    if (!names.insert(e.city).second) throw ConfigError("city table: duplicate city '" + e.city + "'");
  }
}

CityTable CityTable::load(const std::filesystem::path& csv) {
  std::istringstream in(read_file(csv));
  std::string line;
  std::vector<Entry> entries;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    auto fields = split_csv_line(line);
    if (header) {
      if (fields.size() < 2 || fields[0] != "city" || fields[1] != "population_millions") {
        throw ConfigError(csv.string() + ": expected header 'city,population_millions'");
      }
      header = false;
      continue;
    }
    if (fields.size() != 2) throw ConfigError(csv.string() + ":" + std::to_string(lineno) + ": expected 2 fields");
    Entry e;
    e.city = fields[0];
    try {
      e.population_millions = std::stod(fields[1]);
    } catch (const std::exception&) {
      throw ConfigError(csv.string() + ":" + std::to_string(lineno) + ": bad population '" + fields[1] + "'");
    }
    entries.push_back(std::move(e));
  }
  return CityTable(std::move(entries));
}

bool CityTable::contains(std::string_view city) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.city == city; });
}

DimensionMap::DimensionMap(std::array<std::vector<int>, 6> questions, Aggregation rule)
    : questions_(std::move(questions)), rule_(rule) {
  std::array<int, kQuestionCount + 1> owner{};
  for (Dimension d : kDimensions) {
    auto& qs = questions_[static_cast<std::size_t>(d)];
    if (qs.empty()) throw ConfigError("dimension map: " + std::string(dimension_name(d)) + " has no questions");
    for (int q : qs) {
      if (q < 1 || q > kQuestionCount) throw ConfigError("dimension map: question " + std::to_string(q) + " out of range");
      if (owner[q]++ != 0) throw ConfigError("dimension map: question " + std::to_string(q) + " mapped twice");
    }
    std::sort(qs.begin(), qs.end());
  }
  for (int q = 1; q <= kQuestionCount; ++q) {
    if (owner[q] == 0) throw ConfigError("dimension map: question " + std::to_string(q) + " is unmapped");
  }
}

DimensionMap DimensionMap::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dimension map: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("dimension map: expected a JSON object");
  std::array<std::vector<int>, 6> questions;
  Aggregation rule = Aggregation::mean;
  for (const auto& [key, value] : doc.items()) {
    if (key == "aggregation") {
      const std::string r = value.is_string() ? value.get<std::string>() : "";
      if (r == "mean") {
        rule = Aggregation::mean;
      } else if (r == "median") {
        rule = Aggregation::median;
      } else {
        throw ConfigError("dimension map: aggregation must be \"mean\" or \"median\"");
      }
      continue;
    }
    auto d = parse_dimension(key);
    if (!d) throw ConfigError("dimension map: unknown dimension '" + key + "'");
    if (!value.is_array()) throw ConfigError("dimension map: " + key + " must list question ids");
    for (const json& q : value) {
      if (!q.is_number_integer()) throw ConfigError("dimension map: question ids must be integers");
      questions[static_cast<std::size_t>(*d)].push_back(q.get<int>());
    }
  }
  return DimensionMap(std::move(questions), rule);
}

DimensionMap DimensionMap::load(const std::filesystem::path& json_path) { return parse(read_file(json_path)); }

std::vector<UserRecord> ingest_text(std::string_view jsonl, const CityTable& cities, std::string_view source) {
  std::vector<UserRecord> out;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= jsonl.size()) {
    std::size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    ++lineno;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == jsonl.size()) break;
      continue;
    }
    try {
      out.push_back(parse_user(json::parse(line), cities));
    } catch (const json::exception& e) {
      throw DataError(std::string(source), lineno, std::string("malformed JSON: ") + e.what());
    } catch (const DataError& e) {
      throw DataError(std::string(source), lineno, e.what());
    }
    if (end == jsonl.size()) break;
  }
  return out;
}

std::vector<UserRecord> ingest(const std::filesystem::path& path, const CityTable& cities) {
  if (!std::filesystem::exists(path)) throw ConfigError("corpus not found: " + path.string());
  return ingest_text(read_file(path), cities, path.string());
}

std::string_view exclusion_reason_name(ExclusionReason r) {
  return r == ExclusionReason::too_few_statuses ? "too_few_statuses" : "inactive_recently";
}

FilterResult filter_active(const std::vector<UserRecord>& records, Timestamp as_of, const ActivityFilter& filter) {
  FilterResult result;
  const Timestamp window_start = as_of - filter.recency;
  for (const auto& r : records) {
    // Statuses after as_of are not part of the observed history.
    auto it = std::upper_bound(r.statuses.begin(), r.statuses.end(), as_of,
                               [](Timestamp t, const Status& s) { return t < s.posted_at; });
    if (static_cast<std::size_t>(it - r.statuses.begin()) < filter.min_statuses) {
      result.excluded.push_back({r.user_id, ExclusionReason::too_few_statuses});
      continue;
    }
    const bool recent = it != r.statuses.begin() && std::prev(it)->posted_at >= window_start;
    if (!recent) {
      result.excluded.push_back({r.user_id, ExclusionReason::inactive_recently});
      continue;
    }
    result.kept.push_back(r);
  }
  return result;
}

std::string_view survey_verdict_name(SurveyVerdict v) {
  switch (v) {
    case SurveyVerdict::valid:
      return "valid";
    case SurveyVerdict::incomplete:
      return "incomplete";
    case SurveyVerdict::too_fast:
      break;
  }
  return "too_fast";
}

SurveyCheck validate_survey(const UserRecord& record, Duration min_gap) {
  SurveyCheck check;
  std::vector<Timestamp> times;
  times.reserve(record.answers.size());
  for (const auto& a : record.answers) times.push_back(a.submitted_at);
  std::sort(times.begin(), times.end());
  for (std::size_t i = 1; i < times.size(); ++i) {
    const Duration gap = times[i] - times[i - 1];
    if (i == 1 || gap < check.shortest_gap) check.shortest_gap = gap;
  }
  if (record.answers.size() < static_cast<std::size_t>(kQuestionCount)) {
    check.verdict = SurveyVerdict::incomplete;
  } else if (times.size() >= 2 && check.shortest_gap < min_gap) {
    check.verdict = SurveyVerdict::too_fast;
  }
  return check;
}

SatisfactionLabels labels_from_answers(const UserRecord& record, const DimensionMap& map) {
  std::array<int, kQuestionCount + 1> score_of{};
  for (const auto& a : record.answers) score_of[a.question_id] = a.score;
  SatisfactionLabels labels;
  for (Dimension d : kDimensions) {
    std::vector<double> scores;
    for (int q : map.questions(d)) {
      if (score_of[q] != 0) scores.push_back(score_of[q]);
    }
    if (scores.empty()) {
      throw DataError("user " + record.user_id + ": no answered question for dimension " +
                      std::string(dimension_name(d)));
    }
    labels[d] = map.aggregation() == Aggregation::mean
                    ? std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size())
                    : median_of(std::move(scores));
  }
  return labels;
}

CohortSummary summarize(const std::vector<UserRecord>& records) {
  CohortSummary s;
  s.users = records.size();
  long long age_sum = 0;
  for (const auto& r : records) {
    switch (r.gender) {
      case Gender::female:
        ++s.female;
        break;
      case Gender::male:
        ++s.male;
        break;
      case Gender::unspecified:
        ++s.unspecified;
        break;
    }
    age_sum += r.age;
  }
  s.mean_age = records.empty() ? 0.0 : static_cast<double>(age_sum) / static_cast<double>(records.size());
  return s;
}

}  // namespace satislice
