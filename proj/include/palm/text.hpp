#pragma once

// Small string helpers shared across the library.

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace palm::text {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '\'';
}

// Identifier in the Coq sense, possibly module-qualified (Z.le_refl).
inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  bool prev_dot = false;
  for (char c : s) {
    if (c == '.') {
      if (prev_dot) return false;
      prev_dot = true;
      continue;
    }
    if (!is_ident_char(c)) return false;
    prev_dot = false;
  }
  return !prev_dot;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Trim plus collapse every internal whitespace run to a single space.
// This is the normalization rule used to key mock-prover transitions.
inline std::string normalize_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += c;
  }
  return out;
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

// Replaces whole-word occurrences of `from`. A match must not butt against
// identifier characters, nor continue a qualified name on either side
// ("Foo.bar" is one name, "bar." at end of sentence is a terminator).
inline std::string replace_word(std::string_view s, std::string_view from, std::string_view to) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t hit = s.find(from, i);
    if (hit == std::string_view::npos) {
      out.append(s.substr(i));
      break;
    }
    bool left_ok = hit == 0 || (!is_ident_char(s[hit - 1]) && s[hit - 1] != '.');
    std::size_t after = hit + from.size();
    bool right_ok =
        after >= s.size() ||
        (!is_ident_char(s[after]) &&
         !(s[after] == '.' && after + 1 < s.size() && is_ident_char(s[after + 1])));
    out.append(s.substr(i, hit - i));
    if (left_ok && right_ok) {
      out.append(to);
    } else {
      out.append(s.substr(hit, from.size()));
    }
    i = after;
  }
  return out;
}

}  // namespace palm::text
