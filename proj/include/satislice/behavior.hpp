#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "satislice/corpus.hpp"
#include "satislice/time.hpp"

namespace satislice {

enum class BehaviorGroup { profile, self_presentation, security_settings, social_networking };
inline constexpr std::size_t kBehaviorGroupCount = 4;
inline constexpr std::array<std::size_t, kBehaviorGroupCount> kBehaviorGroupSizes{4, 12, 3, 26};
inline constexpr std::size_t kBehaviorFeatureCount = 45;
std::string_view behavior_group_name(BehaviorGroup g);

enum class ValueKind { flag, count, real };
std::string_view value_kind_name(ValueKind k);

/// What an extractor sees: the record and its statuses posted at or before `up_to`.
struct BehaviorContext {
  const UserRecord& record;
  Timestamp up_to;
  std::span<const Status> history;
};

struct FeatureValue {
  double value = 0;
  bool missing = false;  // a profile field was absent and the default was used
};

struct BehaviorFeature {
  std::string id;
  BehaviorGroup group;
  ValueKind kind;
  std::string description;
  double default_value = 0;
  std::function<FeatureValue(const BehaviorContext&)> extract;
};

/// Ordered, immutable list of behavioral extractors.
class BehaviorRegistry {
 public:
  explicit BehaviorRegistry(std::vector<BehaviorFeature> features);

  const std::vector<BehaviorFeature>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  std::array<std::size_t, kBehaviorGroupCount> group_sizes() const;

  /// JSON array of {feature_id, group, kind, description, default}.
  std::string manifest_json() const;

  static constexpr std::string_view kVersion = "behavior-registry/1";

 private:
  std::vector<BehaviorFeature> features_;
};

/// The 45-feature registry: 4 profile, 12 self-presentation, 3 security
/// settings and 26 social-networking features.
const BehaviorRegistry& default_registry();

struct BehaviorFeatures {
  std::vector<double> values;                // registry order
  std::vector<unsigned char> was_missing;    // 1 where the documented default was applied
};

BehaviorFeatures extract_behavior(const UserRecord& record, Timestamp up_to, const BehaviorRegistry& registry);

/// Statuses of `record` posted at or before `up_to`.
std::span<const Status> history_until(const UserRecord& record, Timestamp up_to);

}  // namespace satislice
