#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "satislice/behavior.hpp"
#include "satislice/corpus.hpp"
#include "satislice/lexicon.hpp"
#include "satislice/time.hpp"

namespace satislice {

/// Strictly increasing, non-empty list of cut-off instants.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<Timestamp> points);

  const std::vector<Timestamp>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }

 private:
  std::vector<Timestamp> points_;
};

/// First day of `count` consecutive months starting at `start`, 00:00:00 UTC.
TimeGrid monthly_grid(std::chrono::year_month start, int count);

/// Column names of a feature row: behavior registry order, then lexicon order.
std::vector<std::string> feature_columns(const BehaviorRegistry& registry, const Lexicon& lexicon);

/// Fingerprint of the ordered column names; models record it to reject mismatched inputs.
std::string feature_manifest_hash(const std::vector<std::string>& columns);

struct FeatureOptions {
  TokenizerMode mode = TokenizerMode::max_match;
  WordBagOptions bag;
};

/// Behavioral features followed by linguistic features for one user at `up_to`.
std::vector<double> feature_row(const UserRecord& record, Timestamp up_to, const BehaviorRegistry& registry,
                                const Lexicon& lexicon, const FeatureOptions& options);

struct SliceBlock {
  std::string city;
  Timestamp at;
  std::vector<std::string> users;
  std::vector<std::vector<double>> rows;  // |users| rows of feature_columns().size() values
};

/// One block per (city present in records) x (grid point). Cities are ordered
/// by name, users keep input order, and every user appears in every block of
/// their city, with empty-history features before their first status.
std::vector<SliceBlock> build_blocks(const std::vector<UserRecord>& records, const TimeGrid& grid,
                                     const BehaviorRegistry& registry, const Lexicon& lexicon,
                                     const FeatureOptions& options);

/// "<city>__<YYYY-MM-DD>.csv"
std::string block_file_name(const SliceBlock& block);

/// Writes one CSV per block plus index.json into `dir`.
void write_block_store(const std::filesystem::path& dir, const std::vector<SliceBlock>& blocks,
                       const std::vector<std::string>& columns);

/// Reads a store written by write_block_store; columns are returned through `columns`.
std::vector<SliceBlock> read_block_store(const std::filesystem::path& dir, std::vector<std::string>* columns);

}  // namespace satislice
