#include "satislice/lexicon.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "satislice/error.hpp"
#include "satislice/io.hpp"

namespace satislice {
namespace {

constexpr std::array<std::string_view, kCategoryGroupCount> kGroupNames{
    "basic_usage", "journey_word", "personal_vocabulary", "spoken_word", "chinese_characteristic"};

constexpr std::array<std::string_view, 4> kStructuralMetrics{"@words", "@sentences", "@numbers", "@punct"};

// ---- UTF-8 ---------------------------------------------------------------

struct CodePoint {
  char32_t value;  // U+FFFD stand-in when invalid
  std::size_t length;
  bool valid;
};

CodePoint decode(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1, true};
  std::size_t len = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return {0xFFFD, 1, false};
  }
  if (pos + len > s.size()) return {0xFFFD, 1, false};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1, false};
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return {0xFFFD, 1, false};
  return {cp, len, true};
}

enum class CharClass { space, punct, cjk, digit, letter, symbol };

bool in(char32_t c, char32_t lo, char32_t hi) { return c >= lo && c <= hi; }

bool is_space(char32_t c) {
  return c == ' ' || in(c, 0x09, 0x0D) || c == 0x85 || c == 0xA0 || c == 0x1680 || in(c, 0x2000, 0x200A) ||
         c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

CharClass classify(const CodePoint& cp) {
  const char32_t c = cp.value;
  if (!cp.valid) return CharClass::symbol;
  if (is_space(c)) return CharClass::space;
  if (c < 0x80) {
    if (c >= '0' && c <= '9') return CharClass::digit;
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return CharClass::letter;
    if (c < 0x20 || c == 0x7F) return CharClass::symbol;
    return CharClass::punct;
  }
  if (in(c, 0xFF10, 0xFF19)) return CharClass::digit;
  if (in(c, 0x3400, 0x4DBF) || in(c, 0x4E00, 0x9FFF) || in(c, 0xF900, 0xFAFF) || in(c, 0x20000, 0x2FA1F) ||
      c == 0x3005 || c == 0x3007) {
    return CharClass::cjk;
  }
  if (in(c, 0xA1, 0xBF) || c == 0xD7 || c == 0xF7 || in(c, 0x2010, 0x2027) || in(c, 0x2030, 0x205E) ||
      in(c, 0x3001, 0x3003) || in(c, 0x3008, 0x3011) || in(c, 0x3014, 0x301F) || in(c, 0xFE10, 0xFE1F) ||
      in(c, 0xFE30, 0xFE4F) || in(c, 0xFF01, 0xFF0F) || in(c, 0xFF1A, 0xFF20) || in(c, 0xFF3B, 0xFF40) ||
      in(c, 0xFF5B, 0xFF65)) {
    return CharClass::punct;
  }
  if (in(c, 0x80, 0x9F) || in(c, 0x200B, 0x200F) || in(c, 0x2060, 0x206F) || in(c, 0x2190, 0x2BFF) ||
      in(c, 0xFE00, 0xFE0F) || in(c, 0x1F000, 0x1FAFF) || c == 0xFEFF) {
    return CharClass::symbol;
  }
  return CharClass::letter;
}

struct Char {
  std::size_t begin;
  std::size_t length;
  CharClass cls;
};

std::vector<Char> scan(std::string_view text) {
  std::vector<Char> out;
  out.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const CodePoint cp = decode(text, pos);
    out.push_back({pos, cp.length, classify(cp)});
    pos += cp.length;
  }
  return out;
}

std::size_t code_points(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < s.size(); ++n) pos += decode(s, pos).length;
  return n;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_alnum(CharClass c) { return c == CharClass::letter || c == CharClass::digit; }

class StreamBuilder {
 public:
  StreamBuilder(std::string_view text, const std::vector<Char>& chars) : text_(text), chars_(chars) {}

  void emit(std::size_t first, std::size_t last, TokenKind kind) {
    const std::size_t begin = chars_[first].begin;
    const std::size_t end = chars_[last - 1].begin + chars_[last - 1].length;
    out_.push_back({std::string(text_.substr(begin, end - begin)), kind});
  }

  // Emits [first, last) as a letter/digit run.
  void emit_alnum(std::size_t first, std::size_t last) {
    bool digits = true;
    for (std::size_t i = first; i < last; ++i) digits = digits && chars_[i].cls == CharClass::digit;
    emit(first, last, digits ? TokenKind::number : TokenKind::word);
  }

  TokenStream take() { return std::move(out_); }

 private:
  std::string_view text_;
  const std::vector<Char>& chars_;
  TokenStream out_;
};

TokenStream tokenize_max_match(std::string_view text, const Lexicon& lexicon) {
  const auto chars = scan(text);
  StreamBuilder out(text, chars);
  const auto& vocab = lexicon.vocabulary();
  std::size_t i = 0;
  while (i < chars.size()) {
    const CharClass cls = chars[i].cls;
    std::size_t j = i + 1;
    switch (cls) {
      case CharClass::space:
        while (j < chars.size() && chars[j].cls == CharClass::space) ++j;
        out.emit(i, j, TokenKind::other);
        break;
      case CharClass::punct:
        out.emit(i, j, TokenKind::punctuation);
        break;
      case CharClass::symbol:
        out.emit(i, j, TokenKind::other);
        break;
      case CharClass::letter:
      case CharClass::digit:
        while (j < chars.size() && is_alnum(chars[j].cls)) ++j;
        out.emit_alnum(i, j);
        break;
      case CharClass::cjk: {
        std::size_t run_end = j;
        while (run_end < chars.size() && chars[run_end].cls == CharClass::cjk) ++run_end;
        // Greedy forward maximum matching over the CJK run.
        for (std::size_t k = i; k < run_end;) {
          std::size_t take = 1;
          for (std::size_t len = std::min(lexicon.longest_entry(), run_end - k); len >= 2; --len) {
            const std::size_t begin = chars[k].begin;
            const std::size_t end = chars[k + len - 1].begin + chars[k + len - 1].length;
            if (vocab.count(std::string(text.substr(begin, end - begin))) != 0) {
              take = len;
              break;
            }
          }
          out.emit(k, k + take, TokenKind::word);
          k += take;
        }
        j = run_end;
        break;
      }
    }
    i = j;
  }
  return out.take();
}

TokenStream tokenize_whitespace(std::string_view text) {
  const auto chars = scan(text);
  StreamBuilder out(text, chars);
  std::size_t i = 0;
  while (i < chars.size()) {
    std::size_t j = i + 1;
    switch (chars[i].cls) {
      case CharClass::space:
        while (j < chars.size() && chars[j].cls == CharClass::space) ++j;
        out.emit(i, j, TokenKind::other);
        break;
      case CharClass::punct:
        out.emit(i, j, TokenKind::punctuation);
        break;
      case CharClass::symbol:
        out.emit(i, j, TokenKind::other);
        break;
      default:
        while (j < chars.size() &&
               (is_alnum(chars[j].cls) || chars[j].cls == CharClass::cjk)) {
          ++j;
        }
        out.emit_alnum(i, j);
        break;
    }
    i = j;
  }
  return out.take();
}

bool is_sentence_terminator(std::string_view s) {
  return s == "." || s == "!" || s == "?" || s == "\xE3\x80\x82" /* 。 */ || s == "\xEF\xBC\x81" /* ！ */ ||
         s == "\xEF\xBC\x9F" /* ？ */;
}

}  // namespace

std::string_view category_group_name(CategoryGroup g) { return kGroupNames[static_cast<std::size_t>(g)]; }

std::string_view token_kind_name(TokenKind k) {
  switch (k) {
    case TokenKind::word:
      return "word";
    case TokenKind::punctuation:
      return "punctuation";
    case TokenKind::number:
      return "number";
    case TokenKind::other:
      break;
  }
  return "other";
}

std::string_view tokenizer_mode_name(TokenizerMode m) {
  return m == TokenizerMode::max_match ? "max_match" : "whitespace";
}

TokenizerMode parse_tokenizer_mode(std::string_view name) {
  if (name == "max_match") return TokenizerMode::max_match;
  if (name == "whitespace") return TokenizerMode::whitespace;
  throw ConfigError("unknown tokenizer mode '" + std::string(name) + "'");
}

Lexicon::Lexicon(std::vector<Category> categories) : categories_(std::move(categories)) {
  std::set<std::string, std::less<>> ids;
  matchers_.resize(categories_.size());
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    Category& cat = categories_[i];
    if (cat.id.empty()) throw ConfigError("lexicon: empty category id");
    if (!ids.insert(cat.id).second) throw ConfigError("lexicon: duplicate category '" + cat.id + "'");
    if (cat.patterns.empty()) throw ConfigError("lexicon: category '" + cat.id + "' has no patterns");

    std::vector<std::string> unique;
    std::set<std::string, std::less<>> seen;
    for (auto& p : cat.patterns) {
      if (p.empty()) throw ConfigError("lexicon: empty pattern in category '" + cat.id + "'");
      std::string folded = cat.structural ? p : ascii_lower(p);
      if (!seen.insert(folded).second) {
        ++duplicates_dropped_;
        continue;
      }
      unique.push_back(std::move(folded));
    }
    cat.patterns = std::move(unique);

    if (cat.structural) {
      for (const auto& p : cat.patterns) {
        if (p.size() > 1 && p.front() == '@' &&
            std::find(kStructuralMetrics.begin(), kStructuralMetrics.end(), p) == kStructuralMetrics.end()) {
          throw ConfigError("lexicon: unknown structural metric '" + p + "' in '" + cat.id + "'");
        }
      }
      continue;
    }
    for (const auto& p : cat.patterns) {
      const bool wildcard = p.back() == '*';
      std::string stem = wildcard ? p.substr(0, p.size() - 1) : p;
      if (stem.empty()) throw ConfigError("lexicon: bare '*' pattern in category '" + cat.id + "'");
      longest_entry_ = std::max(longest_entry_, code_points(stem));
      vocabulary_.insert(stem);
      if (wildcard) {
        matchers_[i].prefixes.push_back(std::move(stem));
      } else {
        matchers_[i].exact.insert(std::move(stem));
      }
    }
  }
}

Lexicon Lexicon::parse(std::string_view csv_text, std::string_view source) {
  std::vector<Category> categories;
  std::map<std::string, std::size_t, std::less<>> index;
  std::istringstream in{std::string(csv_text)};
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  auto fail = [&](const std::string& why) {
    throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    std::vector<std::string> f;
    try {
      f = split_csv_line(line);
    } catch (const DataError& e) {
      fail(e.what());
    }
    if (header) {
      if (f.size() != 4 || f[0] != "category_id" || f[1] != "group" || f[2] != "structural" || f[3] != "pattern") {
        fail("expected header 'category_id,group,structural,pattern'");
      }
      header = false;
      continue;
    }
    if (f.size() != 4) fail("expected 4 fields, got " + std::to_string(f.size()));
    auto group_it = std::find(kGroupNames.begin(), kGroupNames.end(), f[1]);
    if (group_it == kGroupNames.end()) fail("unknown group '" + f[1] + "'");
    if (f[2] != "0" && f[2] != "1") fail("structural must be 0 or 1");
    if (f[3].empty()) fail("empty pattern");
    const auto group = static_cast<CategoryGroup>(group_it - kGroupNames.begin());
    const bool structural = f[2] == "1";

    auto [it, inserted] = index.try_emplace(f[0], categories.size());
    if (inserted) {
      categories.push_back({f[0], group, structural, {}});
    } else if (categories[it->second].group != group || categories[it->second].structural != structural) {
      fail("category '" + f[0] + "' redeclared with a different group or structural flag");
    }
    categories[it->second].patterns.push_back(f[3]);
  }
  if (header) throw ConfigError(std::string(source) + ": missing header");
  return Lexicon(std::move(categories));
}

Lexicon Lexicon::load(const std::filesystem::path& csv) { return parse(read_file(csv), csv.string()); }

std::array<std::size_t, kCategoryGroupCount> Lexicon::group_sizes() const {
  std::array<std::size_t, kCategoryGroupCount> sizes{};
  for (const auto& c : categories_) ++sizes[static_cast<std::size_t>(c.group)];
  return sizes;
}

bool Lexicon::matches(std::size_t index, std::string_view word) const {
  const Matcher& m = matchers_[index];
  if (m.exact.count(std::string(word)) != 0) return true;
  return std::any_of(m.prefixes.begin(), m.prefixes.end(),
                     [&](const std::string& p) { return word.substr(0, p.size()) == p; });
}

TokenStream tokenize(std::string_view text, const Lexicon& lexicon, TokenizerMode mode) {
  return mode == TokenizerMode::max_match ? tokenize_max_match(text, lexicon) : tokenize_whitespace(text);
}

bool is_whitespace_token(const Token& t) {
  if (t.kind != TokenKind::other || t.surface.empty()) return false;
  for (std::size_t pos = 0; pos < t.surface.size();) {
    const CodePoint cp = decode(t.surface, pos);
    if (!cp.valid || !is_space(cp.value)) return false;
    pos += cp.length;
  }
  return true;
}

std::string build_word_bag(const UserRecord& record, Timestamp up_to, const WordBagOptions& options) {
  std::string bag;
  bool first = true;
  for (const auto& s : record.statuses) {
    if (s.posted_at > up_to) break;
    if (s.is_repost && !options.include_reposts) continue;
    if (!first) bag.push_back('\n');
    bag += s.text;
    first = false;
  }
  return bag;
}

LinguisticFeatures extract_linguistic(std::string_view bag, const Lexicon& lexicon, TokenizerMode mode) {
  const TokenStream tokens = tokenize(bag, lexicon, mode);

  std::size_t words = 0, numbers = 0, punct = 0, sentences = 0;
  std::map<std::string, std::size_t, std::less<>> punct_counts;
  bool open_segment = false;
  for (const Token& t : tokens) {
    switch (t.kind) {
      case TokenKind::word:
      case TokenKind::number:
        ++words;
        if (t.kind == TokenKind::number) ++numbers;
        open_segment = true;
        break;
      case TokenKind::punctuation:
        ++punct;
        ++punct_counts[t.surface];
        if (is_sentence_terminator(t.surface) && open_segment) {
          ++sentences;
          open_segment = false;
        }
        break;
      case TokenKind::other:
        if (open_segment && t.surface.find('\n') != std::string::npos) {
          ++sentences;
          open_segment = false;
        }
        break;
    }
  }
  if (open_segment) ++sentences;

  const auto& cats = lexicon.categories();
  std::vector<std::size_t> hits(cats.size(), 0);
  for (const Token& t : tokens) {
    if (t.kind != TokenKind::word && t.kind != TokenKind::number) continue;
    const std::string folded = ascii_lower(t.surface);
    for (std::size_t c = 0; c < cats.size(); ++c) {
      if (!cats[c].structural && lexicon.matches(c, folded)) ++hits[c];
    }
  }

  LinguisticFeatures out;
  out.word_total = words;
  out.values.resize(cats.size(), 0.0);
  for (std::size_t c = 0; c < cats.size(); ++c) {
    if (!cats[c].structural) {
      out.values[c] = words == 0 ? 0.0 : static_cast<double>(hits[c]) / static_cast<double>(words);
      continue;
    }
    // Patterns of a structural category are summed.
    double value = 0;
    for (const auto& p : cats[c].patterns) {
      if (p == "@words") {
        value += static_cast<double>(words);
      } else if (p == "@sentences") {
        value += static_cast<double>(sentences);
      } else if (p == "@numbers") {
        value += static_cast<double>(numbers);
      } else if (p == "@punct") {
        value += static_cast<double>(punct);
      } else if (auto it = punct_counts.find(p); it != punct_counts.end()) {
        value += static_cast<double>(it->second);
      }
    }
    out.values[c] = value;
  }
  return out;
}

}  // namespace satislice
