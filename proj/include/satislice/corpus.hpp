#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "satislice/time.hpp"

namespace satislice {

inline constexpr int kQuestionCount = 13;
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

/// The six satisfaction dimensions, in report order.
enum class Dimension { LS, IS, SPS, NES, LES, SJS };
inline constexpr std::array<Dimension, 6> kDimensions{Dimension::LS,  Dimension::IS,  Dimension::SPS,
                                                      Dimension::NES, Dimension::LES, Dimension::SJS};
std::string_view dimension_name(Dimension d);
std::optional<Dimension> parse_dimension(std::string_view name);

struct Status {
  Timestamp posted_at;
  std::string text;
  bool is_repost = false;
};

struct SurveyAnswer {
  int question_id = 0;
  int score = 0;
  Timestamp submitted_at;
};

enum class Gender { female, male, unspecified };
std::string_view gender_name(Gender g);

// Profile values as they appear in the export. Arrays are stored as their length.
using ProfileValue = std::variant<bool, double, std::string>;
using Profile = std::map<std::string, ProfileValue, std::less<>>;

struct UserRecord {
  std::string user_id;
  std::string city;
  Gender gender = Gender::unspecified;
  int age = 0;
  Timestamp registered_at;
  Profile profile;
  std::vector<Status> statuses;  // ascending posted_at
  std::vector<SurveyAnswer> answers;
};

/// City identifiers with their population (millions). Order is file order.
class CityTable {
 public:
  struct Entry {
    std::string city;
    double population_millions = 0;
  };

  CityTable() = default;
  explicit CityTable(std::vector<Entry> entries);

  static CityTable load(const std::filesystem::path& csv);

  bool contains(std::string_view city) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Entry> entries_;
};

/// Per-dimension scores, each in [1, 5].
struct SatisfactionLabels {
  std::array<double, 6> scores{};
  double operator[](Dimension d) const { return scores[static_cast<std::size_t>(d)]; }
  double& operator[](Dimension d) { return scores[static_cast<std::size_t>(d)]; }
};

enum class Aggregation { mean, median };

/// Question → dimension assignment. Construction enforces that every question
/// 1..13 maps to exactly one dimension and every dimension receives a question.
class DimensionMap {
 public:
  DimensionMap(std::array<std::vector<int>, 6> questions, Aggregation rule);

  static DimensionMap load(const std::filesystem::path& json_path);
  static DimensionMap parse(std::string_view json_text);

  const std::vector<int>& questions(Dimension d) const { return questions_[static_cast<std::size_t>(d)]; }
  Aggregation aggregation() const { return rule_; }

 private:
  std::array<std::vector<int>, 6> questions_;
  Aggregation rule_;
};

/// Reads one user per JSONL line, validates schema and invariants, and sorts
/// statuses by posted_at. Blank lines are skipped. Errors carry the line number.
std::vector<UserRecord> ingest(const std::filesystem::path& path, const CityTable& cities);
std::vector<UserRecord> ingest_text(std::string_view jsonl, const CityTable& cities,
                                    std::string_view source = "<memory>");

enum class ExclusionReason { too_few_statuses, inactive_recently };
std::string_view exclusion_reason_name(ExclusionReason r);

struct Exclusion {
  std::string user_id;
  ExclusionReason reason;
};

struct ActivityFilter {
  std::size_t min_statuses = 500;
  Duration recency = days(90);
};

struct FilterResult {
  std::vector<UserRecord> kept;
  std::vector<Exclusion> excluded;
};

/// Keeps users with at least `min_statuses` statuses posted at or before as_of and
/// at least one status in [as_of - recency, as_of]. Input order is preserved.
FilterResult filter_active(const std::vector<UserRecord>& records, Timestamp as_of, const ActivityFilter& filter = {});

enum class SurveyVerdict { valid, incomplete, too_fast };
std::string_view survey_verdict_name(SurveyVerdict v);

struct SurveyCheck {
  SurveyVerdict verdict = SurveyVerdict::valid;
  Duration shortest_gap{0};  // smallest adjacent gap seen, 0 when fewer than 2 answers
  bool valid() const { return verdict == SurveyVerdict::valid; }
};

/// A survey is invalid when incomplete or when two adjacent submissions (by
/// time) are strictly less than `min_gap` apart.
SurveyCheck validate_survey(const UserRecord& record, Duration min_gap = std::chrono::seconds{2});

/// Aggregates answered questions into the six dimension scores.
SatisfactionLabels labels_from_answers(const UserRecord& record, const DimensionMap& map);

struct CohortSummary {
  std::size_t users = 0;
  std::size_t female = 0;
  std::size_t male = 0;
  std::size_t unspecified = 0;
  double mean_age = 0;
};

CohortSummary summarize(const std::vector<UserRecord>& records);

}  // namespace satislice
