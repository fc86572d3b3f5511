#include "satislice/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "satislice/error.hpp"

namespace satislice {
namespace {

using std::chrono::duration;
using std::chrono::duration_cast;

constexpr std::array<std::string_view, kBehaviorGroupCount> kGroupNames{"profile", "self_presentation",
                                                                         "security_settings", "social_networking"};

// Hour-of-day and calendar features use Beijing time, which has no DST.
constexpr auto kLocalOffset = std::chrono::hours{8};

const ProfileValue* lookup(const BehaviorContext& ctx, std::string_view key) {
  auto it = ctx.record.profile.find(key);
  return it == ctx.record.profile.end() ? nullptr : &it->second;
}

FeatureValue flag_field(const BehaviorContext& ctx, std::string_view key) {
  const ProfileValue* v = lookup(ctx, key);
  if (v == nullptr) return {0.0, true};
  if (const bool* b = std::get_if<bool>(v)) return {*b ? 1.0 : 0.0, false};
  if (const double* d = std::get_if<double>(v)) return {*d != 0.0 ? 1.0 : 0.0, false};
  return {std::get<std::string>(*v).empty() ? 0.0 : 1.0, false};
}

FeatureValue count_field(const BehaviorContext& ctx, std::string_view key) {
  const ProfileValue* v = lookup(ctx, key);
  if (v == nullptr) return {0.0, true};
  if (const bool* b = std::get_if<bool>(v)) return {*b ? 1.0 : 0.0, false};
  if (const double* d = std::get_if<double>(v)) return {std::isfinite(*d) ? std::max(0.0, *d) : 0.0, false};
  const std::string& s = std::get<std::string>(*v);
  char* end = nullptr;
  const double parsed = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(parsed)) return {0.0, true};
  return {std::max(0.0, parsed), false};
}

FeatureValue gender_male(const BehaviorContext& ctx) {
  const ProfileValue* v = lookup(ctx, "gender");
  const std::string* s = v ? std::get_if<std::string>(v) : nullptr;
  if (s == nullptr) return {0.0, true};
  if (*s == "m" || *s == "male") return {1.0, false};
  if (*s == "f" || *s == "female") return {0.0, false};
  return {0.0, true};
}

double fraction(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

template <typename Pred>
std::size_t count_if(std::span<const Status> h, Pred pred) {
  return static_cast<std::size_t>(std::count_if(h.begin(), h.end(), pred));
}

bool contains(const std::string& text, std::string_view needle) { return text.find(needle) != std::string::npos; }

std::size_t utf8_length(const std::string& s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::size_t mentions(const std::string& s) {
  std::size_t n = 0;
  for (std::size_t pos = 0; (pos = s.find('@', pos)) != std::string::npos; ++pos) ++n;
  for (std::size_t pos = 0; (pos = s.find("\xEF\xBC\xA0", pos)) != std::string::npos; pos += 3) ++n;  // ＠
  return n;
}

bool has_emoticon(const std::string& s) {
  const auto open = s.find('[');
  return open != std::string::npos && s.find(']', open + 1) != std::string::npos;
}

std::chrono::sys_days local_day(Timestamp t) { return std::chrono::floor<std::chrono::days>(t + kLocalOffset); }

int local_hour(Timestamp t) {
  const auto local = t + kLocalOffset;
  return static_cast<int>(std::chrono::floor<std::chrono::hours>(local - local_day(t)).count());
}

double to_days(Duration d) { return duration<double, std::ratio<86400>>(d).count(); }

double hour_entropy(std::span<const Status> h) {
  if (h.empty()) return 0.0;
  std::array<std::size_t, 24> bins{};
  for (const auto& s : h) ++bins[static_cast<std::size_t>(local_hour(s.posted_at))];
  double entropy = 0;
  for (std::size_t b : bins) {
    if (b == 0) continue;
    const double p = static_cast<double>(b) / static_cast<double>(h.size());
    entropy -= p * std::log2(p);
  }
  return entropy;
}

std::map<std::chrono::sys_days, std::size_t> posts_per_day(std::span<const Status> h) {
  std::map<std::chrono::sys_days, std::size_t> per_day;
  for (const auto& s : h) ++per_day[local_day(s.posted_at)];
  return per_day;
}

FeatureValue v(double x) { return {x, false}; }

std::vector<BehaviorFeature> build_features() {
  using G = BehaviorGroup;
  using K = ValueKind;
  std::vector<BehaviorFeature> f;
  auto add = [&](std::string id, G g, K k, std::string desc, auto fn) {
    f.push_back({std::move(id), g, k, std::move(desc), 0.0, std::move(fn)});
  };
  auto flag = [&](std::string id, G g, std::string key, std::string desc) {
    add(std::move(id), g, K::flag, std::move(desc),
        [key](const BehaviorContext& c) { return flag_field(c, key); });
  };
  auto count = [&](std::string id, G g, std::string key, std::string desc) {
    add(std::move(id), g, K::count, std::move(desc),
        [key](const BehaviorContext& c) { return count_field(c, key); });
  };

  // Profile
  add("gender_male", G::profile, K::flag, "1 when profile.gender is male ('m'/'male')", gender_male);
  count("age", G::profile, "age", "declared age from profile.age");
  flag("hometown_set", G::profile, "hometown", "profile.hometown is filled in");
  flag("verified", G::profile, "verified", "account carries a verification badge (profile.verified)");

  // Self-presentation
  flag("screen_name_set", G::self_presentation, "screen_name", "custom screen name set (profile.screen_name)");
  flag("avatar_set", G::self_presentation, "avatar", "avatar uploaded (profile.avatar)");
  flag("description_set", G::self_presentation, "description", "self description filled in");
  flag("domain_set", G::self_presentation, "domain", "personalised profile domain set");
  flag("url_set", G::self_presentation, "url", "personal homepage URL set");
  count("tags_count", G::self_presentation, "tags", "number of self-chosen profile tags");
  flag("education_set", G::self_presentation, "education", "education history filled in");
  flag("career_set", G::self_presentation, "career", "career history filled in");
  flag("birthday_set", G::self_presentation, "birthday", "birthday shown on profile");
  flag("email_set", G::self_presentation, "email", "contact e-mail shown on profile");
  flag("qq_set", G::self_presentation, "qq", "QQ number shown on profile");
  flag("msn_set", G::self_presentation, "msn", "MSN account shown on profile");

  // Security settings
  flag("comments_available", G::security_settings, "allow_all_comment", "strangers may comment");
  flag("messages_available", G::security_settings, "allow_all_act_msg", "strangers may send private messages");
  flag("geo_enabled", G::security_settings, "geo_enabled", "location tagging enabled");

  // Social networking: profile counters
  count("friend_count", G::social_networking, "friends_count", "number of followed accounts");
  count("follower_count", G::social_networking, "followers_count", "number of followers");
  add("follower_friend_ratio", G::social_networking, K::real, "follower_count / friend_count, 0 when no friends",
      [](const BehaviorContext& c) {
        const FeatureValue followers = count_field(c, "followers_count");
        const FeatureValue friends = count_field(c, "friends_count");
        const double ratio = friends.value == 0 ? 0.0 : followers.value / friends.value;
        return FeatureValue{ratio, followers.missing || friends.missing};
      });
  count("bi_follower_count", G::social_networking, "bi_followers_count", "number of mutual follows");
  count("favourites_count", G::social_networking, "favourites_count", "number of favourited statuses");

  // Social networking: status history up to the cut-off
  add("status_count", G::social_networking, K::count, "statuses posted", [](const BehaviorContext& c) {
    return v(static_cast<double>(c.history.size()));
  });
  add("original_count", G::social_networking, K::count, "original (non-repost) statuses",
      [](const BehaviorContext& c) {
        return v(static_cast<double>(count_if(c.history, [](const Status& s) { return !s.is_repost; })));
      });
  add("repost_count", G::social_networking, K::count, "reposted statuses", [](const BehaviorContext& c) {
    return v(static_cast<double>(count_if(c.history, [](const Status& s) { return s.is_repost; })));
  });
  add("repost_ratio", G::social_networking, K::real, "repost_count / status_count", [](const BehaviorContext& c) {
    return v(fraction(count_if(c.history, [](const Status& s) { return s.is_repost; }), c.history.size()));
  });
  add("statuses_per_day", G::social_networking, K::real,
      "status_count / max(1, days between registration and cut-off)", [](const BehaviorContext& c) {
        const double span = std::max(1.0, to_days(c.up_to - c.record.registered_at));
        return v(static_cast<double>(c.history.size()) / span);
      });
  add("mean_status_length", G::social_networking, K::real, "mean status length in code points",
      [](const BehaviorContext& c) {
        if (c.history.empty()) return v(0.0);
        double total = 0;
        for (const auto& s : c.history) total += static_cast<double>(utf8_length(s.text));
        return v(total / static_cast<double>(c.history.size()));
      });
  add("mention_count", G::social_networking, K::count, "total '@' mentions", [](const BehaviorContext& c) {
    std::size_t n = 0;
    for (const auto& s : c.history) n += mentions(s.text);
    return v(static_cast<double>(n));
  });
  add("mention_ratio", G::social_networking, K::real, "share of statuses with a mention",
      [](const BehaviorContext& c) {
        return v(fraction(count_if(c.history, [](const Status& s) { return mentions(s.text) > 0; }), c.history.size()));
      });
  add("hashtag_ratio", G::social_networking, K::real, "share of statuses with a '#' topic tag",
      [](const BehaviorContext& c) {
        return v(fraction(count_if(c.history, [](const Status& s) { return contains(s.text, "#"); }),
                          c.history.size()));
      });
  add("url_ratio", G::social_networking, K::real, "share of statuses with a link", [](const BehaviorContext& c) {
    return v(fraction(count_if(c.history,
                               [](const Status& s) {
                                 return contains(s.text, "http://") || contains(s.text, "https://");
                               }),
                      c.history.size()));
  });
  add("emoticon_ratio", G::social_networking, K::real, "share of statuses with a bracketed [emoticon]",
      [](const BehaviorContext& c) {
        return v(fraction(count_if(c.history, [](const Status& s) { return has_emoticon(s.text); }),
                          c.history.size()));
      });
  add("question_ratio", G::social_networking, K::real, "share of statuses containing a question mark",
      [](const BehaviorContext& c) {
        return v(fraction(count_if(c.history,
                                   [](const Status& s) {
                                     return contains(s.text, "?") || contains(s.text, "\xEF\xBC\x9F");
                                   }),
                          c.history.size()));
      });
  add("exclamation_ratio", G::social_networking, K::real, "share of statuses containing an exclamation mark",
      [](const BehaviorContext& c) {
        return v(fraction(count_if(c.history,
                                   [](const Status& s) {
                                     return contains(s.text, "!") || contains(s.text, "\xEF\xBC\x81");
                                   }),
                          c.history.size()));
      });
  add("posting_hour_entropy", G::social_networking, K::real,
      "Shannon entropy (bits) of the hour-of-day histogram, Beijing time",
      [](const BehaviorContext& c) { return v(hour_entropy(c.history)); });
  add("night_post_ratio", G::social_networking, K::real, "share of statuses posted 00:00-05:59 Beijing time",
      [](const BehaviorContext& c) {
        return v(fraction(count_if(c.history, [](const Status& s) { return local_hour(s.posted_at) < 6; }),
                          c.history.size()));
      });
  add("weekend_post_ratio", G::social_networking, K::real, "share of statuses posted on Saturday or Sunday",
      [](const BehaviorContext& c) {
        return v(fraction(count_if(c.history,
                                   [](const Status& s) {
                                     const std::chrono::weekday wd{local_day(s.posted_at)};
                                     return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
                                   }),
                          c.history.size()));
      });
  add("active_days", G::social_networking, K::count, "distinct calendar days with a status",
      [](const BehaviorContext& c) { return v(static_cast<double>(posts_per_day(c.history).size())); });
  add("max_daily_posts", G::social_networking, K::count, "most statuses posted on a single day",
      [](const BehaviorContext& c) {
        std::size_t best = 0;
        for (const auto& [day, n] : posts_per_day(c.history)) best = std::max(best, n);
        return v(static_cast<double>(best));
      });
  add("mean_interval_hours", G::social_networking, K::real, "mean hours between consecutive statuses",
      [](const BehaviorContext& c) {
        if (c.history.size() < 2) return v(0.0);
        const auto span = c.history.back().posted_at - c.history.front().posted_at;
        return v(duration<double, std::ratio<3600>>(span).count() / static_cast<double>(c.history.size() - 1));
      });
  add("days_since_last_status", G::social_networking, K::real, "days from the latest status to the cut-off",
      [](const BehaviorContext& c) {
        return v(c.history.empty() ? 0.0 : to_days(c.up_to - c.history.back().posted_at));
      });
  add("statuses_last_30d", G::social_networking, K::count, "statuses in the 30 days before the cut-off",
      [](const BehaviorContext& c) {
        const Timestamp from = c.up_to - days(30);
        return v(static_cast<double>(count_if(c.history, [&](const Status& s) { return s.posted_at > from; })));
      });
  return f;
}

}  // namespace

std::string_view behavior_group_name(BehaviorGroup g) { return kGroupNames[static_cast<std::size_t>(g)]; }

std::string_view value_kind_name(ValueKind k) {
  switch (k) {
    case ValueKind::flag:
      return "flag";
    case ValueKind::count:
      return "count";
    case ValueKind::real:
      break;
  }
  return "real";
}

BehaviorRegistry::BehaviorRegistry(std::vector<BehaviorFeature> features) : features_(std::move(features)) {
  std::set<std::string, std::less<>> ids;
  for (const auto& f : features_) {
    if (!ids.insert(f.id).second) throw ConfigError("behavior registry: duplicate feature '" + f.id + "'");
    if (!f.extract) throw ConfigError("behavior registry: feature '" + f.id + "' has no extractor");
  }
  if (features_.size() != kBehaviorFeatureCount || group_sizes() != kBehaviorGroupSizes) {
    throw ConfigError("behavior registry: expected 45 features grouped 4/12/3/26");
  }
}

std::array<std::size_t, kBehaviorGroupCount> BehaviorRegistry::group_sizes() const {
  std::array<std::size_t, kBehaviorGroupCount> sizes{};
  for (const auto& f : features_) ++sizes[static_cast<std::size_t>(f.group)];
  return sizes;
}

std::string BehaviorRegistry::manifest_json() const {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& f : features_) {
    arr.push_back({{"feature_id", f.id},
                   {"group", behavior_group_name(f.group)},
                   {"kind", value_kind_name(f.kind)},
                   {"description", f.description},
                   {"default", f.default_value}});
  }
  return arr.dump(2);
}

const BehaviorRegistry& default_registry() {
  static const BehaviorRegistry registry(build_features());
  return registry;
}

std::span<const Status> history_until(const UserRecord& record, Timestamp up_to) {
  auto end = std::upper_bound(record.statuses.begin(), record.statuses.end(), up_to,
                              [](Timestamp t, const Status& s) { return t < s.posted_at; });
  return {record.statuses.data(), static_cast<std::size_t>(end - record.statuses.begin())};
}

BehaviorFeatures extract_behavior(const UserRecord& record, Timestamp up_to, const BehaviorRegistry& registry) {
  const BehaviorContext ctx{record, up_to, history_until(record, up_to)};
  BehaviorFeatures out;
  out.values.reserve(registry.size());
  out.was_missing.reserve(registry.size());
  for (const auto& f : registry.features()) {
    FeatureValue fv = f.extract(ctx);
    if (fv.missing) fv.value = f.default_value;
    out.values.push_back(fv.value);
    out.was_missing.push_back(fv.missing ? 1 : 0);
  }
  return out;
}

}  // namespace satislice
