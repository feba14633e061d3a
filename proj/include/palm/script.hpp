#pragma once

// Coq proof-script surface syntax: splitting raw text into sentences,
// classifying each sentence, and rendering a script back to text.
//
// The splitter is deliberately not a full Coq lexer. A dot terminates a
// sentence when it is followed by whitespace or end of input; dots inside
// qualified identifiers (Z.le_refl), comments and string literals never do.
// Bullets (-, +, *, possibly repeated) and goal braces are sentences of
// their own. Comments may nest and are dropped.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "palm/text.hpp"

namespace palm::script {

enum class SentenceKind { Bullet, Tactic, ProofCmd, QedCmd, AbortCmd, BraceOpen, BraceClose };

struct Sentence {
  std::string raw;  // verbatim text, comments stripped, including the terminator
  SentenceKind kind = SentenceKind::Tactic;
  std::size_t begin = 0;  // byte offsets into the source it was split from
  std::size_t end = 0;
};

struct ParseError : std::runtime_error {
  enum class Kind { UnterminatedComment, UnterminatedString };
  ParseError(Kind k, std::size_t off)
      : std::runtime_error(k == Kind::UnterminatedComment
                               ? "unterminated comment at byte " + std::to_string(off)
                               : "unterminated string literal at byte " + std::to_string(off)),
        kind(k),
        offset(off) {}
  Kind kind;
  std::size_t offset;
};

// A tactic invocation: leading keyword plus its argument terms.
struct Tactic {
  std::string head;
  std::vector<std::string> args;  // whitespace/comma-separated, terminator excluded
  std::string raw;
};

struct BulletMarker {
  char symbol = '-';
  int count = 1;  // "--" has count 2
};

struct CommandMarker {
  SentenceKind kind = SentenceKind::ProofCmd;
};

using Parsed = std::variant<Tactic, BulletMarker, CommandMarker>;

struct ProofScript {
  std::vector<Sentence> sentences;
  std::string source;
};

namespace detail {

inline std::string head_of(std::string_view raw) {
  std::size_t i = 0;
  while (i < raw.size() && text::is_space(raw[i])) ++i;
  std::size_t b = i;
  while (i < raw.size() && text::is_ident_char(raw[i])) ++i;
  return std::string(raw.substr(b, i - b));
}

inline SentenceKind kind_of(const std::string& raw) {
  const std::string norm = text::normalize_ws(raw);
  if (norm == "Proof." || text::starts_with(norm, "Proof using") ||
      text::starts_with(norm, "Proof with")) {
    return SentenceKind::ProofCmd;
  }
  if (norm == "Qed." || norm == "Defined.") return SentenceKind::QedCmd;
  const std::string head = head_of(norm);
  if (head == "Abort") return SentenceKind::AbortCmd;
  return SentenceKind::Tactic;
}

}  // namespace detail

inline std::vector<Sentence> split_sentences(std::string_view source) {
  std::vector<Sentence> out;
  std::string buf;
  std::size_t buf_begin = 0;
  std::size_t i = 0;
  const std::size_t n = source.size();

  while (i < n) {
    const char c = source[i];

    if (c == '(' && i + 1 < n && source[i + 1] == '*') {
      const std::size_t open = i;
      int depth = 1;
      i += 2;
      while (i < n && depth > 0) {
        if (source[i] == '(' && i + 1 < n && source[i + 1] == '*') {
          ++depth;
          i += 2;
        } else if (source[i] == '*' && i + 1 < n && source[i + 1] == ')') {
          --depth;
          i += 2;
        } else {
          ++i;
        }
      }
      if (depth > 0) throw ParseError(ParseError::Kind::UnterminatedComment, open);
      // A comment separates tokens the way whitespace does.
      if (!buf.empty() && !text::is_space(buf.back())) buf += ' ';
      continue;
    }

    if (buf.empty()) {
      if (text::is_space(c)) {
        ++i;
        continue;
      }
      buf_begin = i;
      if (c == '-' || c == '+' || c == '*') {
        std::size_t j = i;
        while (j < n && source[j] == c) ++j;
        out.push_back(Sentence{std::string(j - i, c), SentenceKind::Bullet, i, j});
        i = j;
        continue;
      }
      if (c == '{' || c == '}') {
        out.push_back(Sentence{std::string(1, c),
                               c == '{' ? SentenceKind::BraceOpen : SentenceKind::BraceClose, i,
                               i + 1});
        ++i;
        continue;
      }
    }

    if (c == '"') {
      const std::size_t open = i;
      buf += c;
      ++i;
      bool closed = false;
      while (i < n) {
        if (source[i] == '"') {
          if (i + 1 < n && source[i + 1] == '"') {  // Coq escapes a quote by doubling it
            buf += "\"\"";
            i += 2;
            continue;
          }
          buf += '"';
          ++i;
          closed = true;
          break;
        }
        buf += source[i];
        ++i;
      }
      if (!closed) throw ParseError(ParseError::Kind::UnterminatedString, open);
      continue;
    }

    if (c == '.') {
      buf += '.';
      ++i;
      const bool at_end = i >= n;
      const bool before_space = !at_end && text::is_space(source[i]);
      const bool qualified = !at_end && (std::isalpha(static_cast<unsigned char>(source[i])) ||
                                         source[i] == '_');
      if ((at_end || before_space) && !qualified) {
        out.push_back(Sentence{buf, detail::kind_of(buf), buf_begin, i});
        buf.clear();
      }
      continue;
    }

    buf += c;
    ++i;
  }

  // A trailing fragment with no terminator is not a sentence; drop it.
  return out;
}

inline Parsed parse_sentence(const Sentence& s) {
  switch (s.kind) {
    case SentenceKind::Bullet:
      return BulletMarker{s.raw.empty() ? '-' : s.raw[0], static_cast<int>(s.raw.size())};
    case SentenceKind::ProofCmd:
    case SentenceKind::QedCmd:
    case SentenceKind::AbortCmd:
    case SentenceKind::BraceOpen:
    case SentenceKind::BraceClose:
      return CommandMarker{s.kind};
    case SentenceKind::Tactic:
      break;
  }
  Tactic t;
  t.raw = s.raw;
  std::string body = text::trim(s.raw);
  if (!body.empty() && body.back() == '.') body.pop_back();
  t.head = detail::head_of(body);
  std::size_t i = t.head.size();
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      t.args.push_back(cur);
      cur.clear();
    }
  };
  for (; i < body.size(); ++i) {
    const char c = body[i];
    if (text::is_space(c) || c == ',') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return t;
}

// Tactic view of any sentence; bullets and commands get their raw text as head.
inline Tactic as_tactic(const Sentence& s) {
  Parsed p = parse_sentence(s);
  if (auto* t = std::get_if<Tactic>(&p)) return *t;
  Tactic t;
  t.raw = s.raw;
  if (s.kind == SentenceKind::Bullet || s.kind == SentenceKind::BraceOpen ||
      s.kind == SentenceKind::BraceClose) {
    t.head = s.raw;
  } else {
    t.head = detail::head_of(s.raw);
  }
  return t;
}

inline std::string render(const ProofScript& script) {
  std::string out;
  for (const Sentence& s : script.sentences) {
    if (!out.empty()) out += ' ';
    out += s.raw;
  }
  return out;
}

inline std::string render(const std::vector<Sentence>& sentences) {
  return render(ProofScript{sentences, {}});
}

inline ProofScript make_script(std::string source) {
  ProofScript s;
  s.sentences = split_sentences(source);
  s.source = std::move(source);
  return s;
}

inline bool same_sentences(const std::vector<Sentence>& a, const std::vector<Sentence>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].raw != b[i].raw || a[i].kind != b[i].kind) return false;
  }
  return true;
}

// Static bullet depth of every sentence: a fresh bullet symbol nests one
// level deeper, the same symbol at an enclosing level pops back to it.
// Tactics carry the depth they execute under; bullets the depth they open.
inline std::vector<int> bullet_depths(const std::vector<Sentence>& sentences) {
  std::vector<int> depths;
  depths.reserve(sentences.size());
  std::vector<std::string> stack;
  for (const Sentence& s : sentences) {
    if (s.kind == SentenceKind::Bullet) {
      auto it = std::find(stack.begin(), stack.end(), s.raw);
      if (it != stack.end()) {
        stack.resize(static_cast<std::size_t>(it - stack.begin()) + 1);
      } else {
        stack.push_back(s.raw);
      }
      depths.push_back(static_cast<int>(stack.size()));
    } else if (s.kind == SentenceKind::QedCmd) {
      stack.clear();
      depths.push_back(0);
    } else {
      depths.push_back(static_cast<int>(stack.size()));
    }
  }
  return depths;
}

}  // namespace palm::script
