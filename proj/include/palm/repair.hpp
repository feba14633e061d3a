#pragma once

// The four targeted repair mechanisms, dispatched by error category:
//
//   InvalidReference        -> reference replacement (similar-name search)
//   RedundantIntroduction   -> renaming / dropping the intros
//   BulletMisuse            -> bullet substitution (unfinished -> backtrack)
//   WrongTheoremApplication,
//   IncorrectRewrite,
//   TacticMisuse            -> premise augmentation via hammer simplification
//   Miscellaneous           -> not repaired
//
// Every mechanism either executes a replacement successfully or leaves the
// session exactly as it found it. Repairs only ever touch the failing
// sentence; structural fixes belong to backtracking.

#include <chrono>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "palm/errors.hpp"
#include "palm/prover.hpp"
#include "palm/retrieval.hpp"
#include "palm/script.hpp"
#include "palm/text.hpp"

namespace palm::repair {

enum class Mechanism { ReferenceReplacement, Renaming, BulletTransformation, PremiseAugmentation };

inline std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::ReferenceReplacement: return "ReferenceReplacement";
    case Mechanism::Renaming: return "Renaming";
    case Mechanism::BulletTransformation: return "BulletTransformation";
    case Mechanism::PremiseAugmentation: return "PremiseAugmentation";
  }
  return "?";
}

enum class Status { Repaired, Dropped, NotRepaired };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::Repaired: return "Repaired";
    case Status::Dropped: return "Dropped";
    case Status::NotRepaired: return "NotRepaired";
  }
  return "?";
}

struct Outcome {
  Status status = Status::NotRepaired;
  std::vector<script::Sentence> replacement;  // executed successfully when Repaired
  int attempts = 0;
  std::optional<Mechanism> mechanism;

  static Outcome repaired(Mechanism m, std::vector<script::Sentence> r, int attempts) {
    return Outcome{Status::Repaired, std::move(r), attempts, m};
  }
  static Outcome dropped(Mechanism m) { return Outcome{Status::Dropped, {}, 0, m}; }
  static Outcome not_repaired(Mechanism m, int attempts = 0) {
    return Outcome{Status::NotRepaired, {}, attempts, m};
  }
};

struct Context {
  std::vector<std::string> premise_names;     // retrieved for this theorem
  std::vector<std::string> hypothesis_names;  // of the focused goal
  int replacement_bound = 10;                 // M
  std::chrono::seconds hammer_timeout{10};
};

namespace detail {

inline script::Sentence single_sentence(const std::string& raw) {
  auto ss = script::split_sentences(raw);
  if (ss.size() != 1) {
    script::Sentence s;
    s.raw = raw;
    s.kind = script::SentenceKind::Tactic;
    return s;
  }
  return ss[0];
}

inline std::set<std::string> focused_hypothesis_names(const prover::ProofState& state) {
  std::set<std::string> names;
  if (state.goals.empty()) return names;
  for (const auto& h : state.goals.front().hypotheses) {
    names.insert(h.names.begin(), h.names.end());
  }
  return names;
}

}  // namespace detail

// Substitutes similarly named candidates for the undefined reference, best
// match first, until one executes; at most `bound` attempts.
inline Outcome replace_reference(const script::Tactic& failing, const std::string& bad,
                                 const std::vector<std::string>& candidates,
                                 prover::Session& session, int bound) {
  const auto ranked = retrieval::rank_names(candidates, bad);
  int attempts = 0;
  std::set<std::string> tried;
  for (const std::string& candidate : ranked) {
    if (attempts >= bound) break;
    if (candidate == bad || !tried.insert(candidate).second) continue;
    const std::string raw = text::replace_word(failing.raw, bad, candidate);
    if (raw == failing.raw) continue;  // bad does not occur; nothing to try
    ++attempts;
    const script::Sentence s = detail::single_sentence(raw);
    if (session.execute(s).ok()) {
      return Outcome::repaired(Mechanism::ReferenceReplacement, {s}, attempts);
    }
  }
  return Outcome::not_repaired(Mechanism::ReferenceReplacement, attempts);
}

// Renames clashing intros arguments by appending apostrophes until fresh;
// with nothing to introduce the sentence is dropped instead.
inline Outcome rename_intro(const script::Tactic& failing, const prover::ProofState& state,
                            prover::Session& session) {
  if (failing.head != "intros" && failing.head != "intro") {
    return Outcome::not_repaired(Mechanism::Renaming);
  }
  std::set<std::string> taken = detail::focused_hypothesis_names(state);
  bool any_clash = false;
  std::vector<std::string> renamed;
  for (const std::string& arg : failing.args) {
    std::string name = arg;
    if (text::is_identifier(arg) && taken.count(arg)) {
      any_clash = true;
      while (taken.count(name)) name += '\'';
    }
    taken.insert(name);
    renamed.push_back(name);
  }
  if (!any_clash) {
    // No clashing name: the failure means nothing can be introduced.
    return Outcome::dropped(Mechanism::Renaming);
  }
  std::string raw = failing.head;
  for (const std::string& name : renamed) raw += " " + name;
  raw += ".";
  const script::Sentence s = detail::single_sentence(raw);
  if (session.execute(s).ok()) {
    return Outcome::repaired(Mechanism::Renaming, {s}, 1);
  }
  return Outcome::not_repaired(Mechanism::Renaming, 1);
}

// Swaps in the bullet the prover asked for; an unfinished-bullet error is
// left to the backtracking procedure.
inline Outcome transform_bullet(const errors::ErrorFacts& facts, prover::Session& session) {
  if (facts.unfinished_bullet || !facts.expected_bullet) {
    return Outcome::not_repaired(Mechanism::BulletTransformation);
  }
  script::Sentence s;
  s.raw = *facts.expected_bullet;
  s.kind = script::SentenceKind::Bullet;
  if (session.execute(s).ok()) {
    return Outcome::repaired(Mechanism::BulletTransformation, {s}, 1);
  }
  return Outcome::not_repaired(Mechanism::BulletTransformation, 1);
}

// Hands the misused theorem to the hammer's simplification tactic in place
// of the failing sentence.
inline Outcome augment_premise(const std::string& misused, prover::Session& session,
                               std::chrono::seconds /*timeout*/) {
  const prover::ProofState before = session.state();
  const script::Sentence s = detail::single_sentence("qsimpl use: " + misused + ".");
  const prover::StepResult r = session.execute(s);
  if (!r.ok()) {
    return Outcome::not_repaired(Mechanism::PremiseAugmentation, 1);
  }
  if (r.state->same_goals(before)) {
    session.undo();  // succeeded but did nothing; that is not a repair
    return Outcome::not_repaired(Mechanism::PremiseAugmentation, 1);
  }
  return Outcome::repaired(Mechanism::PremiseAugmentation, {s}, 1);
}

inline Outcome repair(const errors::ErrorFacts& facts, const script::Tactic& failing,
                      const prover::ProofState& state, prover::Session& session,
                      const Context& context) {
  using errors::ErrorCategory;
  switch (facts.category) {
    case ErrorCategory::InvalidReference: {
      if (!facts.bad_reference) return Outcome::not_repaired(Mechanism::ReferenceReplacement);
      std::vector<std::string> candidates = context.premise_names;
      candidates.insert(candidates.end(), context.hypothesis_names.begin(),
                        context.hypothesis_names.end());
      return replace_reference(failing, *facts.bad_reference, candidates, session,
                               context.replacement_bound);
    }
    case ErrorCategory::RedundantIntroduction:
      return rename_intro(failing, state, session);
    case ErrorCategory::BulletMisuse:
      return transform_bullet(facts, session);
    case ErrorCategory::WrongTheoremApplication:
    case ErrorCategory::IncorrectRewrite:
    case ErrorCategory::TacticMisuse: {
      if (!facts.misused_theorem) return Outcome::not_repaired(Mechanism::PremiseAugmentation);
      return augment_premise(*facts.misused_theorem, session, context.hammer_timeout);
    }
    case ErrorCategory::Miscellaneous:
    case ErrorCategory::Unknown:
      return Outcome{Status::NotRepaired, {}, 0, std::nullopt};
  }
  return Outcome{Status::NotRepaired, {}, 0, std::nullopt};
}

}  // namespace palm::repair
