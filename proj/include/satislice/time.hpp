#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace satislice {

using Duration = std::chrono::milliseconds;
using Timestamp = std::chrono::sys_time<Duration>;

/// Parses an RFC 3339 timestamp ("2012-02-01T00:00:00Z", "2013-03-02T10:11:12.5+08:00").
/// Fractional seconds beyond millisecond resolution are truncated. Throws DataError.
Timestamp parse_timestamp(std::string_view text);

/// Formats as UTC RFC 3339; milliseconds are printed only when non-zero.
std::string format_timestamp(Timestamp t);

/// "YYYY-MM-DD" of the UTC calendar day containing t.
std::string format_date(Timestamp t);

/// Parses "YYYY-MM".
std::chrono::year_month parse_year_month(std::string_view text);

inline constexpr Duration days(long long n) { return std::chrono::duration_cast<Duration>(std::chrono::days{n}); }

}  // namespace satislice
