#pragma once

// Offset-preserving tokenization and morphological normalization:
// surface form -> lemma -> root of the derivation tree.

#include "mtsquad/errors.hpp"
#include "mtsquad/unicode.hpp"

#include <cstddef>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mtsquad {

struct Token {
  std::string surface;
  std::size_t start = 0;  // code points, half-open [start, end)
  std::size_t end = 0;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  bool is_word = false;
  std::string root;  // filled by normalize_tokens, word tokens only

  bool operator==(const Token&) const = default;
};

/// Word tokens are maximal runs of letters and decimal digits. Every other
/// non-whitespace code point is a one-character non-word token; whitespace
/// separates tokens and belongs to none.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0, cp = 0;
  std::optional<Token> word;
  auto flush = [&] {
    if (!word) return;
    word->surface = std::string(text.substr(word->byte_start, word->byte_end - word->byte_start));
    out.push_back(std::move(*word));
    word.reset();
  };
  while (i < text.size()) {
    std::size_t b = i;
    char32_t c = unicode::next(text, i);
    if (unicode::is_word_char(c)) {
      if (!word) {
        word.emplace();
        word->is_word = true;
        word->start = cp;
        word->byte_start = b;
      }
      word->end = cp + 1;
      word->byte_end = i;
    } else {
      flush();
      if (!u_isUWhiteSpace(static_cast<UChar32>(c))) {
        Token t;
        t.surface = std::string(text.substr(b, i - b));
        t.start = cp;
        t.end = cp + 1;
        t.byte_start = b;
        t.byte_end = i;
        out.push_back(std::move(t));
      }
    }
    ++cp;
  }
  flush();
  return out;
}

namespace detail {

/// Splits one TSV line, dropping a trailing '\r'.
inline std::vector<std::string_view> split_tabs(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> cols;
  std::size_t pos = 0;
  while (true) {
    auto tab = line.find('\t', pos);
    cols.push_back(line.substr(pos, tab == std::string_view::npos ? tab : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return cols;
}

inline bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (std::size_t i = 0; i < s.size();)
    if (!u_isdigit(static_cast<UChar32>(unicode::next(s, i)))) return false;
  return true;
}

}  // namespace detail

/// Context-free form -> lemma dictionary keyed by case-folded form. Unknown
/// forms are their own lemma.
class LemmaLexicon {
 public:
  LemmaLexicon() = default;

  /// Adds a form; the first lemma registered for a form wins.
  void add(std::string_view form, std::string lemma) {
    entries_.try_emplace(unicode::fold_case(form), std::move(lemma));
  }

  /// Reads `form<TAB>lemma[<TAB>...]` rows; extra columns are ignored.
  static LemmaLexicon load(std::istream& in, const std::string& source = "lexicon") {
    LemmaLexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto cols = detail::split_tabs(line);
      if (cols.size() < 2 || cols[0].empty() || cols[1].empty())
        throw ParseError(source + ":" + std::to_string(lineno), "expected form<TAB>lemma");
      lex.add(cols[0], std::string(cols[1]));
    }
    return lex;
  }

  std::string lemma(std::string_view form) const {
    auto folded = unicode::fold_case(form);
    auto it = entries_.find(folded);
    return it == entries_.end() ? folded : it->second;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::string> entries_;
};

/// Lemma -> parent links of a word-formation forest. Roots are resolved once
/// at construction, so lookups are read-only and safe to share across threads.
class DerivationForest {
 public:
  DerivationForest() = default;

  /// Builds from (lemma, parent) pairs; an empty parent marks a root. Throws
  /// CycleError on cycles and ParseError on conflicting parents.
  static DerivationForest from_pairs(const std::vector<std::pair<std::string, std::string>>& rows,
                                     const std::string& source = "forest") {
    DerivationForest f;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& [lemma, parent] = rows[i];
      if (lemma.empty()) throw ParseError(source + ":" + std::to_string(i + 1), "empty lemma");
      auto [it, inserted] = f.parent_.try_emplace(lemma, parent);
      if (!inserted && it->second != parent)
        throw ParseError(source + ":" + std::to_string(i + 1),
                         "conflicting parents for '" + lemma + "': '" + it->second + "' and '" +
                             parent + "'");
    }
    f.resolve_roots();
    return f;
  }

  /// Reads `lemma<TAB>parent` or `lemma` rows.
  static DerivationForest load(std::istream& in, const std::string& source = "forest") {
    std::vector<std::pair<std::string, std::string>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto cols = detail::split_tabs(line);
      if (cols.size() > 2 || cols[0].empty())
        throw ParseError(source + ":" + std::to_string(lineno), "expected lemma[<TAB>parent]");
      rows.emplace_back(std::string(cols[0]), cols.size() == 2 ? std::string(cols[1]) : "");
    }
    return from_pairs(rows, source);
  }

  std::string root_of(const std::string& lemma) const {
    auto it = root_.find(lemma);
    return it == root_.end() ? lemma : it->second;
  }

  /// Direct parent, or nullopt for roots and unknown lemmas.
  std::optional<std::string> parent_of(const std::string& lemma) const {
    auto it = parent_.find(lemma);
    if (it == parent_.end() || it->second.empty()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return parent_.size(); }

 private:
  void resolve_roots() {
    // 0 = unvisited, 1 = on the current chain, 2 = resolved
    std::unordered_map<std::string, int> state;
    std::vector<std::string> chain;
    for (const auto& [start, unused] : parent_) {
      if (state[start] == 2) continue;
      chain.clear();
      std::string cur = start;
      std::string root;
      while (true) {
        auto st = state[cur];
        if (st == 2) {
          root = root_.at(cur);
          break;
        }
        if (st == 1)
          throw CycleError(cur, "derivation cycle through '" + cur + "'");
        auto it = parent_.find(cur);
        if (it == parent_.end() || it->second.empty()) {
          root = cur;
          state[cur] = 2;
          root_[cur] = cur;
          break;
        }
        state[cur] = 1;
        chain.push_back(cur);
        cur = it->second;
      }
      for (const auto& l : chain) {
        root_[l] = root;
        state[l] = 2;
      }
    }
  }

  std::unordered_map<std::string, std::string> parent_;
  std::unordered_map<std::string, std::string> root_;
};

enum class NormMode { raw, lemma, root };

inline const char* to_string(NormMode m) {
  switch (m) {
    case NormMode::raw: return "raw";
    case NormMode::lemma: return "lemma";
    case NormMode::root: return "root";
  }
  return "?";
}

inline NormMode parse_norm_mode(std::string_view s) {
  if (s == "raw") return NormMode::raw;
  if (s == "lemma") return NormMode::lemma;
  if (s == "root") return NormMode::root;
  throw ConfigError("unknown normalization mode '" + std::string(s) + "'");
}

/// Maps word surfaces to comparison keys. Keys are case-folded in every mode;
/// digit-only words are their own lemma and root.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(NormMode mode, std::shared_ptr<const LemmaLexicon> lexicon,
             std::shared_ptr<const DerivationForest> forest)
      : mode_(mode), lexicon_(std::move(lexicon)), forest_(std::move(forest)) {
    if (mode_ != NormMode::raw && !lexicon_)
      throw ConfigError(std::string(to_string(mode_)) + " normalization needs a lemma lexicon");
    if (mode_ == NormMode::root && !forest_)
      throw ConfigError("root normalization needs a derivation forest");
  }

  static Normalizer raw() { return {}; }

  NormMode mode() const { return mode_; }

  std::string word(std::string_view surface) const {
    if (mode_ == NormMode::raw || detail::all_digits(surface)) return unicode::fold_case(surface);
    std::string lemma = lexicon_->lemma(surface);
    if (mode_ == NormMode::lemma) return unicode::fold_case(lemma);
    return unicode::fold_case(forest_->root_of(lemma));
  }

 private:
  NormMode mode_ = NormMode::raw;
  std::shared_ptr<const LemmaLexicon> lexicon_;
  std::shared_ptr<const DerivationForest> forest_;
};

/// Fills `root` on every word token.
inline void normalize_tokens(std::vector<Token>& tokens, const Normalizer& n) {
  for (auto& t : tokens)
    if (t.is_word) t.root = n.word(t.surface);
}

/// Normalized keys of the word tokens of `text`, in order.
inline std::vector<std::string> normalize_text(std::string_view text, const Normalizer& n) {
  std::vector<std::string> out;
  for (const auto& t : tokenize(text))
    if (t.is_word) out.push_back(n.word(t.surface));
  return out;
}

}  // namespace mtsquad
