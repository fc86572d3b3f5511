#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "satislice/corpus.hpp"
#include "satislice/time.hpp"

namespace support {

inline satislice::Timestamp ts(const std::string& text) { return satislice::parse_timestamp(text); }

inline std::filesystem::path source_dir() { return SATISLICE_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }

/// Small seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0, double hi = 1) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>(0, 1)(engine_); }
  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  bool chance(double p) { return uniform() < p; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// A record with `count` statuses spaced one hour apart ending at `last`.
inline satislice::UserRecord user_with_statuses(const std::string& id, std::size_t count, satislice::Timestamp last,
                                                const std::string& city = "Zhuhai") {
  satislice::UserRecord r;
  r.user_id = id;
  r.city = city;
  r.registered_at = last - std::chrono::hours(static_cast<long>(count) + 24);
  for (std::size_t i = 0; i < count; ++i) {
    r.statuses.push_back({last - std::chrono::hours(static_cast<long>(count - 1 - i)), "s", false});
  }
  return r;
}

/// 13 answers, question i submitted `gap_ms` after question i-1.
inline std::vector<satislice::SurveyAnswer> answers_with_gap(long long gap_ms, int score = 3, int count = 13) {
  std::vector<satislice::SurveyAnswer> a;
  const auto start = ts("2013-02-20T10:00:00Z");
  for (int q = 1; q <= count; ++q) {
    a.push_back({q, score, start + satislice::Duration{gap_ms * (q - 1)}});
  }
  return a;
}

}  // namespace support
