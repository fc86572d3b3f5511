#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "satislice/corpus.hpp"
#include "satislice/time.hpp"

namespace satislice {

enum class CategoryGroup { basic_usage, journey_word, personal_vocabulary, spoken_word, chinese_characteristic };
inline constexpr std::size_t kCategoryGroupCount = 5;
std::string_view category_group_name(CategoryGroup g);

// Category counts per group for a conformant 88-feature lexicon.
inline constexpr std::array<std::size_t, kCategoryGroupCount> kConformantGroupSizes{35, 32, 7, 3, 11};

/// One lexicon category. Dictionary categories match word tokens against
/// patterns; a trailing '*' matches any suffix. Structural categories count
/// token-stream properties instead, with these pattern forms:
///   @words      word and number tokens
///   @sentences  non-empty segments between sentence terminators or line breaks
///   @numbers    number tokens
///   @punct      punctuation tokens
///   <literal>   punctuation tokens whose surface equals the literal
struct Category {
  std::string id;
  CategoryGroup group = CategoryGroup::basic_usage;
  bool structural = false;
  std::vector<std::string> patterns;
};

class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::vector<Category> categories);

  static Lexicon load(const std::filesystem::path& csv);
  static Lexicon parse(std::string_view csv_text, std::string_view source = "<memory>");

  const std::vector<Category>& categories() const { return categories_; }
  std::size_t size() const { return categories_.size(); }

  /// Literal stems of all dictionary patterns, used for maximum matching.
  const std::unordered_set<std::string>& vocabulary() const { return vocabulary_; }
  std::size_t longest_entry() const { return longest_entry_; }  // in code points

  std::array<std::size_t, kCategoryGroupCount> group_sizes() const;
  bool is_conformant() const { return group_sizes() == kConformantGroupSizes; }

  std::size_t duplicates_dropped() const { return duplicates_dropped_; }

  /// Whether `word` (already case-folded) matches any pattern of dictionary category `index`.
  bool matches(std::size_t index, std::string_view word) const;

 private:
  struct Matcher {
    std::unordered_set<std::string> exact;
    std::vector<std::string> prefixes;
  };

  std::vector<Category> categories_;
  std::vector<Matcher> matchers_;
  std::unordered_set<std::string> vocabulary_;
  std::size_t longest_entry_ = 0;
  std::size_t duplicates_dropped_ = 0;
};

enum class TokenKind { word, punctuation, number, other };
std::string_view token_kind_name(TokenKind k);

struct Token {
  std::string surface;
  TokenKind kind = TokenKind::other;
  bool operator==(const Token&) const = default;
};

// Whitespace and unclassified symbols are kept as `other` tokens, so the
// surfaces always concatenate back to the input.
using TokenStream = std::vector<Token>;

enum class TokenizerMode { max_match, whitespace };
std::string_view tokenizer_mode_name(TokenizerMode m);
TokenizerMode parse_tokenizer_mode(std::string_view name);

TokenStream tokenize(std::string_view text, const Lexicon& lexicon, TokenizerMode mode);

/// True for tokens made only of Unicode whitespace.
bool is_whitespace_token(const Token& t);

struct WordBagOptions {
  bool include_reposts = true;
};

/// Texts of statuses posted at or before `up_to`, in order, joined by '\n'.
std::string build_word_bag(const UserRecord& record, Timestamp up_to, const WordBagOptions& options = {});

/// One value per lexicon category, in lexicon order.
struct LinguisticFeatures {
  std::vector<double> values;
  std::size_t word_total = 0;
};

/// Structural categories yield raw counts; dictionary categories yield the
/// share of word tokens matching the category, 0 for an empty bag.
LinguisticFeatures extract_linguistic(std::string_view bag, const Lexicon& lexicon, TokenizerMode mode);

}  // namespace satislice
