#pragma once

// Classification of prover error messages into the seven-way taxonomy used
// by the repair layer, plus the Unknown bucket routed to backtracking.
//
// Patterns are data, not code: an ordered rule table is loaded from JSON so
// that phrasings from new Coq releases can be added without a rebuild. A
// rule is an anchored-substring pattern with optional {name} capture slots
// and an optional restriction on the failing tactic's head. The first rule
// that matches wins; bullet rules come first so a bullet message is always
// BulletMisuse, whatever tactic tripped it.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "palm/script.hpp"
#include "palm/text.hpp"

namespace palm::errors {

enum class ErrorCategory {
  WrongTheoremApplication,
  InvalidReference,
  IncorrectRewrite,
  RedundantIntroduction,
  TacticMisuse,
  BulletMisuse,
  Miscellaneous,
  Unknown,
};

inline const std::vector<ErrorCategory>& all_categories() {
  static const std::vector<ErrorCategory> cats = {
      ErrorCategory::WrongTheoremApplication, ErrorCategory::InvalidReference,
      ErrorCategory::IncorrectRewrite,        ErrorCategory::RedundantIntroduction,
      ErrorCategory::TacticMisuse,            ErrorCategory::BulletMisuse,
      ErrorCategory::Miscellaneous,           ErrorCategory::Unknown};
  return cats;
}

inline std::string to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::WrongTheoremApplication: return "WrongTheoremApplication";
    case ErrorCategory::InvalidReference: return "InvalidReference";
    case ErrorCategory::IncorrectRewrite: return "IncorrectRewrite";
    case ErrorCategory::RedundantIntroduction: return "RedundantIntroduction";
    case ErrorCategory::TacticMisuse: return "TacticMisuse";
    case ErrorCategory::BulletMisuse: return "BulletMisuse";
    case ErrorCategory::Miscellaneous: return "Miscellaneous";
    case ErrorCategory::Unknown: return "Unknown";
  }
  return "Unknown";
}

inline ErrorCategory category_from_string(std::string_view s) {
  for (ErrorCategory c : all_categories()) {
    if (to_string(c) == s) return c;
  }
  throw std::runtime_error("unknown error category: " + std::string(s));
}

struct ErrorFacts {
  ErrorCategory category = ErrorCategory::Unknown;
  std::optional<std::string> bad_reference;   // InvalidReference only
  std::optional<std::string> expected_bullet; // BulletMisuse only
  bool unfinished_bullet = false;             // BulletMisuse only
  std::optional<std::string> misused_theorem;
};

namespace detail {

struct Segment {
  enum class Kind { Literal, Capture, Wildcard } kind;
  std::string value;  // literal text or capture name
};

inline std::vector<Segment> compile_pattern(const std::string& pattern) {
  std::vector<Segment> segs;
  std::string lit;
  auto flush = [&] {
    if (!lit.empty()) {
      segs.push_back({Segment::Kind::Literal, lit});
      lit.clear();
    }
  };
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const char c = pattern[i];
    if (c == '*') {
      flush();
      segs.push_back({Segment::Kind::Wildcard, {}});
    } else if (c == '{') {
      const std::size_t close = pattern.find('}', i);
      if (close == std::string::npos) throw std::runtime_error("unclosed capture in pattern");
      flush();
      segs.push_back({Segment::Kind::Capture, pattern.substr(i + 1, close - i - 1)});
      i = close;
    } else {
      lit += c;
    }
  }
  flush();
  return segs;
}

// Anchored-substring match: the first literal may start anywhere; captures
// and wildcards are lazy, ending at the next literal (or end of message).
inline bool match_pattern(const std::vector<Segment>& segs, const std::string& message,
                          std::map<std::string, std::string>& captures) {
  captures.clear();
  std::size_t pos = 0;
  std::optional<std::string> pending_capture;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const Segment& seg = segs[i];
    if (seg.kind == Segment::Kind::Literal) {
      const std::size_t hit = message.find(seg.value, pos);
      if (hit == std::string::npos) return false;
      if (i == 0) {
        pos = hit + seg.value.size();
        continue;
      }
      if (pending_capture) {
        captures[*pending_capture] = message.substr(pos, hit - pos);
        pending_capture.reset();
      } else if (hit != pos) {
        return false;  // adjacent literals must be contiguous
      }
      pos = hit + seg.value.size();
    } else if (seg.kind == Segment::Kind::Capture) {
      pending_capture = seg.value;
    }
    // Wildcard: nothing to do, the next literal floats.
  }
  if (pending_capture) captures[*pending_capture] = message.substr(pos);
  return true;
}

inline std::string clean_capture(std::string s) {
  std::string t = text::trim(s);
  while (!t.empty() && (t.back() == '.' || t.back() == ',' || t.back() == '"')) t.pop_back();
  while (!t.empty() && t.front() == '"') t.erase(t.begin());
  return t;
}

inline std::optional<std::string> first_identifier_arg(const script::Tactic& t) {
  static const std::vector<std::string> skip = {"in", "at", "as", "with", "using", "use:", "by"};
  for (const std::string& a : t.args) {
    if (!text::is_identifier(a)) continue;
    bool skipped = false;
    for (const auto& s : skip) {
      if (a == s) {
        skipped = true;
        break;
      }
    }
    if (!skipped) return a;
  }
  return std::nullopt;
}

}  // namespace detail

struct Rule {
  std::string pattern;
  std::vector<detail::Segment> segments;
  std::vector<std::string> heads;  // empty = any tactic head
  ErrorCategory category = ErrorCategory::Unknown;
  std::optional<std::string> bad_reference_slot;   // capture name
  std::optional<std::string> expected_bullet_slot; // capture name
  bool unfinished = false;
  bool misused_from_tactic = false;
};

class RuleTable {
 public:
  static RuleTable from_json(const nlohmann::json& doc) {
    RuleTable table;
    for (const auto& jr : doc.at("rules")) {
      Rule r;
      r.pattern = jr.at("pattern").get<std::string>();
      r.segments = detail::compile_pattern(r.pattern);
      if (jr.contains("heads")) r.heads = jr["heads"].get<std::vector<std::string>>();
      r.category = category_from_string(jr.at("category").get<std::string>());
      if (jr.contains("bad_reference")) r.bad_reference_slot = slot(jr["bad_reference"]);
      if (jr.contains("expected_bullet")) r.expected_bullet_slot = slot(jr["expected_bullet"]);
      r.unfinished = jr.value("unfinished", false);
      r.misused_from_tactic = jr.value("misused_from_tactic", false);
      table.rules_.push_back(std::move(r));
    }
    return table;
  }

  static RuleTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rule table: " + path);
    nlohmann::json doc;
    in >> doc;
    return from_json(doc);
  }

  ErrorFacts classify(const std::string& error_text, const script::Tactic& failing) const {
    ErrorFacts facts;
    std::map<std::string, std::string> captures;
    for (const Rule& r : rules_) {
      if (!r.heads.empty()) {
        bool head_ok = false;
        for (const auto& h : r.heads) head_ok = head_ok || h == failing.head;
        if (!head_ok) continue;
      }
      if (!detail::match_pattern(r.segments, error_text, captures)) continue;
      facts.category = r.category;
      if (r.bad_reference_slot && captures.count(*r.bad_reference_slot)) {
        facts.bad_reference = detail::clean_capture(captures[*r.bad_reference_slot]);
      }
      if (r.expected_bullet_slot && captures.count(*r.expected_bullet_slot)) {
        facts.expected_bullet = detail::clean_capture(captures[*r.expected_bullet_slot]);
      }
      facts.unfinished_bullet = r.unfinished;
      if (r.misused_from_tactic) facts.misused_theorem = detail::first_identifier_arg(failing);
      return facts;
    }
    return facts;  // Unknown
  }

  std::size_t size() const { return rules_.size(); }

 private:
  static std::string slot(const nlohmann::json& j) {
    std::string s = j.get<std::string>();
    if (s.size() >= 2 && s.front() == '{' && s.back() == '}') return s.substr(1, s.size() - 2);
    return s;
  }

  std::vector<Rule> rules_;
};

inline std::map<ErrorCategory, int> category_histogram(const std::vector<ErrorFacts>& events) {
  std::map<ErrorCategory, int> hist;
  for (ErrorCategory c : all_categories()) hist[c] = 0;
  for (const ErrorFacts& e : events) ++hist[e.category];
  return hist;
}

inline std::string render_histogram(const std::map<ErrorCategory, int>& hist) {
  int total = 0;
  for (const auto& [cat, n] : hist) total += n;
  std::ostringstream out;
  for (ErrorCategory c : all_categories()) {
    const int n = hist.count(c) ? hist.at(c) : 0;
    const double pct = total == 0 ? 0.0 : 100.0 * n / total;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", pct);
    out << to_string(c) << "\t" << n << "\t" << buf << "%\n";
  }
  out << "Total\t" << total << "\t100%\n";
  return out.str();
}

}  // namespace palm::errors
