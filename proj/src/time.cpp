#include "satislice/time.hpp"

#include <charconv>
#include <cstdio>

#include "satislice/error.hpp"

namespace satislice {
namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  int digits(std::size_t n) {
    if (pos_ + n > s_.size()) fail("truncated");
    int value = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const char c = s_[pos_ + i];
      if (c < '0' || c > '9') fail("expected digit");
      value = value * 10 + (c - '0');
    }
    pos_ += n;
    return value;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  bool accept(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool accept_any(std::string_view chars) {
    if (pos_ < s_.size() && chars.find(s_[pos_]) != std::string_view::npos) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool peek_digit() const { return pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9'; }
  bool done() const { return pos_ == s_.size(); }

  [[noreturn]] void fail(const std::string& why) const {
    throw DataError("invalid RFC 3339 timestamp '" + std::string(s_) + "': " + why);
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  Cursor c(text);
  const int y = c.digits(4);
  c.expect('-');
  const int mo = c.digits(2);
  c.expect('-');
  const int d = c.digits(2);
  if (!c.accept_any("Tt ")) c.fail("expected 'T'");
  const int hh = c.digits(2);
  c.expect(':');
  const int mm = c.digits(2);
  c.expect(':');
  const int ss = c.digits(2);

  int millis = 0;
  if (c.accept('.')) {
    if (!c.peek_digit()) c.fail("empty fraction");
    int scale = 100;
    while (c.peek_digit()) {
      millis += c.digits(1) * scale;
      scale /= 10;
    }
  }

  int offset_minutes = 0;
  if (c.accept_any("Zz")) {
  } else if (const bool negative = c.accept('-'); negative || c.accept('+')) {
    const int oh = c.digits(2);
    c.expect(':');
    const int om = c.digits(2);
    offset_minutes = (oh * 60 + om) * (negative ? -1 : 1);
  } else {
    c.fail("missing UTC offset");
  }
  if (!c.done()) c.fail("trailing characters");

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) c.fail("no such calendar date");
  if (hh > 23 || mm > 59 || ss > 60) c.fail("time of day out of range");

  const auto local = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} + milliseconds{millis};
  return time_point_cast<Duration>(local - minutes{offset_minutes});
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<std::chrono::days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss<Duration> tod{t - day_start};
  char buf[40];
  const long long ms = tod.subseconds().count();
  if (ms != 0) {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%03lldZ", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), static_cast<long long>(tod.hours().count()),
                  static_cast<long long>(tod.minutes().count()), static_cast<long long>(tod.seconds().count()),
                  ms);
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()), static_cast<long long>(tod.hours().count()),
                  static_cast<long long>(tod.minutes().count()), static_cast<long long>(tod.seconds().count()));
  }
  return buf;
}

std::string format_date(Timestamp t) {
  using namespace std::chrono;
  const year_month_day ymd{floor<std::chrono::days>(t)};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

std::chrono::year_month parse_year_month(std::string_view text) {
  using namespace std::chrono;
  int y = 0;
  unsigned m = 0;
  const char* end = text.data() + text.size();
  auto r1 = std::from_chars(text.data(), end, y);
  if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != '-' || r1.ptr - text.data() != 4) {
    throw ConfigError("invalid year-month '" + std::string(text) + "' (expected YYYY-MM)");
  }
  auto r2 = std::from_chars(r1.ptr + 1, end, m);
  if (r2.ec != std::errc{} || r2.ptr != end || m < 1 || m > 12) {
    throw ConfigError("invalid year-month '" + std::string(text) + "' (expected YYYY-MM)");
  }
  return year{y} / month{m};
}

}  // namespace satislice
