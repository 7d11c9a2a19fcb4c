#pragma once

// UTF-8 helpers. All offsets exposed by the library count Unicode scalar
// values (code points); byte offsets stay internal.

#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/locid.h>
#include <unicode/utf8.h>

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mtsquad::unicode {

/// Decode the next code point at byte offset `i`, advancing `i`. Malformed
/// sequences yield U+FFFD and advance by at least one byte.
inline char32_t next(std::string_view s, std::size_t& i) {
  int32_t pos = static_cast<int32_t>(i);
  UChar32 c;
  U8_NEXT_OR_FFFD(reinterpret_cast<const uint8_t*>(s.data()), pos,
                  static_cast<int32_t>(s.size()), c);
  i = static_cast<std::size_t>(pos);
  return static_cast<char32_t>(c);
}

inline void append(std::string& out, char32_t c) {
  uint8_t buf[U8_MAX_LENGTH];
  int32_t n = 0;
  U8_APPEND_UNSAFE(buf, n, static_cast<UChar32>(c));
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

inline std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) out.push_back(next(s, i));
  return out;
}

inline std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) append(out, c);
  return out;
}

/// Number of code points.
inline std::size_t length(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++n) next(s, i);
  return n;
}

/// Number of UTF-16 code units (what JavaScript/Java string indices count).
inline std::size_t utf16_length(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size();) n += next(s, i) > 0xFFFF ? 2 : 1;
  return n;
}

inline bool valid_utf8(std::string_view s) {
  for (std::size_t i = 0; i < s.size();) {
    int32_t pos = static_cast<int32_t>(i);
    UChar32 c;
    U8_NEXT(reinterpret_cast<const uint8_t*>(s.data()), pos,
            static_cast<int32_t>(s.size()), c);
    if (c < 0) return false;
    i = static_cast<std::size_t>(pos);
  }
  return true;
}

/// Byte offset of every code point boundary: result[k] is where code point k
/// starts, and result.back() == s.size().
inline std::vector<std::size_t> boundaries(std::string_view s) {
  std::vector<std::size_t> out;
  out.reserve(s.size() + 1);
  for (std::size_t i = 0; i < s.size();) {
    out.push_back(i);
    next(s, i);
  }
  out.push_back(s.size());
  return out;
}

/// Substring by code point offsets; clamps to the end of `s`.
inline std::string substr(std::string_view s, std::size_t start, std::size_t count) {
  std::size_t i = 0, cp = 0;
  while (i < s.size() && cp < start) {
    next(s, i);
    ++cp;
  }
  std::size_t begin = i;
  while (i < s.size() && cp < start + count) {
    next(s, i);
    ++cp;
  }
  return std::string(s.substr(begin, i - begin));
}

/// Letters (general category L*) and decimal digits (Nd).
inline bool is_word_char(char32_t c) {
  auto u = static_cast<UChar32>(c);
  return u_isalpha(u) || u_isdigit(u);
}

/// Simple (1:1) case folding, so folded text keeps its code point offsets.
inline char32_t fold(char32_t c) {
  return static_cast<char32_t>(u_foldCase(static_cast<UChar32>(c), U_FOLD_CASE_DEFAULT));
}

inline std::string fold_case(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) append(out, fold(next(s, i)));
  return out;
}

// Python str semantics, used to reproduce the reference SQuAD normalization.

/// Full Unicode lowercase mapping, root locale (Python `str.lower`).
inline std::string full_lower(std::string_view s) {
  auto us = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  us.toLower(icu::Locale::getRoot());
  std::string out;
  us.toUTF8String(out);
  return out;
}

/// Python `str.isspace` (also what `str.split()` splits on).
inline bool is_py_space(char32_t c) {
  if (c >= 0x1C && c <= 0x1F) return true;
  auto u = static_cast<UChar32>(c);
  if (u_isUWhiteSpace(u)) return true;
  auto bidi = u_charDirection(u);
  return bidi == U_WHITE_SPACE_NEUTRAL || bidi == U_BLOCK_SEPARATOR || bidi == U_SEGMENT_SEPARATOR;
}

/// Python `re` `\w` for str patterns: alphanumerics plus underscore.
inline bool is_py_word(char32_t c) {
  if (c == U'_') return true;
  auto u = static_cast<UChar32>(c);
  return u_isalpha(u) || u_getNumericValue(u) != U_NO_NUMERIC_VALUE;
}

}  // namespace mtsquad::unicode
