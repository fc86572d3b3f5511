#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace satislice {

/// Splits one RFC 4180 CSV record. Quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(std::string_view field);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Fixed-point text with `decimals` places ("0.66").
std::string format_fixed(double value, int decimals);

std::string read_file(const std::filesystem::path& path);

/// Writes atomically enough for a batch tool: parent directories are created,
/// content replaces any existing file.
void write_file(const std::filesystem::path& path, std::string_view content);

/// 64-bit FNV-1a, used for manifest and artifact fingerprints.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t value);

}  // namespace satislice
