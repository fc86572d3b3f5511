#include "satislice/timeslice.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "satislice/error.hpp"
#include "satislice/io.hpp"
#include "satislice/parallel.hpp"

namespace satislice {

TimeGrid::TimeGrid(std::vector<Timestamp> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("time grid is empty");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i - 1] < points_[i])) throw ConfigError("time grid is not strictly increasing");
  }
}

TimeGrid monthly_grid(std::chrono::year_month start, int count) {
  using namespace std::chrono;
  if (count < 1) throw ConfigError("monthly grid needs at least one point");
  if (!start.ok()) throw ConfigError("invalid start month");
  std::vector<Timestamp> points;
  points.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const year_month ym = start + months{i};
    points.push_back(time_point_cast<Duration>(sys_days{ym / 1}));
  }
  return TimeGrid(std::move(points));
}

std::vector<std::string> feature_columns(const BehaviorRegistry& registry, const Lexicon& lexicon) {
  std::vector<std::string> cols;
  cols.reserve(registry.size() + lexicon.size());
  for (const auto& f : registry.features()) cols.push_back(f.id);
  for (const auto& c : lexicon.categories()) cols.push_back(c.id);
  return cols;
}

std::string feature_manifest_hash(const std::vector<std::string>& columns) {
  std::uint64_t h = fnv1a64("");
  for (const auto& c : columns) {
    h = fnv1a64(c, h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

std::vector<double> feature_row(const UserRecord& record, Timestamp up_to, const BehaviorRegistry& registry,
                                const Lexicon& lexicon, const FeatureOptions& options) {
  std::vector<double> row = extract_behavior(record, up_to, registry).values;
  const auto ling = extract_linguistic(build_word_bag(record, up_to, options.bag), lexicon, options.mode);
  row.insert(row.end(), ling.values.begin(), ling.values.end());
  return row;
}

std::vector<SliceBlock> build_blocks(const std::vector<UserRecord>& records, const TimeGrid& grid,
                                     const BehaviorRegistry& registry, const Lexicon& lexicon,
                                     const FeatureOptions& options) {
  std::map<std::string, std::vector<std::size_t>> by_city;
  for (std::size_t i = 0; i < records.size(); ++i) by_city[records[i].city].push_back(i);

  std::vector<SliceBlock> blocks;
  blocks.reserve(by_city.size() * grid.size());
  for (const auto& [city, members] : by_city) {
    for (Timestamp at : grid.points()) {
      SliceBlock b;
      b.city = city;
      b.at = at;
      for (std::size_t i : members) b.users.push_back(records[i].user_id);
      b.rows.resize(members.size());
      blocks.push_back(std::move(b));
    }
  }

  // Flatten (block, row) work items so rows fill in parallel into fixed slots.
  std::vector<std::pair<std::size_t, std::size_t>> work;
  std::vector<std::vector<std::size_t>> members_of(blocks.size());
  {
    std::size_t bi = 0;
    for (const auto& [city, members] : by_city) {
      for (std::size_t p = 0; p < grid.size(); ++p, ++bi) {
        members_of[bi] = members;
        for (std::size_t r = 0; r < members.size(); ++r) work.emplace_back(bi, r);
      }
    }
  }
  parallel_for(work.size(), [&](std::size_t w) {
    const auto [bi, r] = work[w];
    blocks[bi].rows[r] = feature_row(records[members_of[bi][r]], blocks[bi].at, registry, lexicon, options);
  });
  return blocks;
}

std::string block_file_name(const SliceBlock& block) { return block.city + "__" + format_date(block.at) + ".csv"; }

void write_block_store(const std::filesystem::path& dir, const std::vector<SliceBlock>& blocks,
                       const std::vector<std::string>& columns) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json index;
  index["columns"] = columns;
  index["manifest_hash"] = feature_manifest_hash(columns);
  index["blocks"] = nlohmann::ordered_json::array();
  for (const auto& b : blocks) {
    std::string csv = "user_id";
    for (const auto& c : columns) csv += "," + csv_field(c);
    csv += "\n";
    for (std::size_t r = 0; r < b.users.size(); ++r) {
      csv += csv_field(b.users[r]);
      for (double v : b.rows[r]) csv += "," + format_double(v);
      csv += "\n";
    }
    const std::string name = block_file_name(b);
    write_file(dir / name, csv);
    index["blocks"].push_back(
        {{"city", b.city}, {"at", format_timestamp(b.at)}, {"file", name}, {"rows", b.users.size()}});
  }
  write_file(dir / "index.json", index.dump(2) + "\n");
}

std::vector<SliceBlock> read_block_store(const std::filesystem::path& dir, std::vector<std::string>* columns) {
  const auto index_path = dir / "index.json";
  if (!std::filesystem::exists(index_path)) {
    throw StageError("slice", "block store index missing at " + index_path.string() + "; run `slice` first");
  }
  const auto index = nlohmann::json::parse(read_file(index_path));
  const auto cols = index.at("columns").get<std::vector<std::string>>();
  if (columns != nullptr) *columns = cols;

  std::vector<SliceBlock> blocks;
  for (const auto& entry : index.at("blocks")) {
    SliceBlock b;
    b.city = entry.at("city").get<std::string>();
    b.at = parse_timestamp(entry.at("at").get<std::string>());
    const auto file = dir / entry.at("file").get<std::string>();
    std::istringstream in(read_file(file));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_csv_line(line);
      if (header) {
        header = false;
        continue;
      }
      if (fields.size() != cols.size() + 1) throw DataError(file.string() + ": row width mismatch");
      b.users.push_back(fields[0]);
      std::vector<double> row;
      row.reserve(cols.size());
      for (std::size_t i = 1; i < fields.size(); ++i) {
        double v = 0;
        const auto& s = fields[i];
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw DataError(file.string() + ": bad number '" + s + "'");
        row.push_back(v);
      }
      b.rows.push_back(std::move(row));
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace satislice
