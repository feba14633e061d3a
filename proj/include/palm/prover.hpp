#pragma once

// Abstract prover backend. A Session drives one proof attempt: execute one
// sentence at a time, observe the open goals, undo, and call hammer-style
// automation on the focused goal. Implementations: a deterministic mock
// replaying transcript fixtures (mock_prover.hpp) and a subprocess adapter
// around a Coq toplevel (coqtop.hpp).

#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "palm/script.hpp"

namespace palm::retrieval {
struct Corpus;
}

namespace palm::prover {

struct Hypothesis {
  std::vector<std::string> names;
  std::string type_text;

  bool operator==(const Hypothesis&) const = default;
};

struct Goal {
  std::vector<Hypothesis> hypotheses;
  std::string conclusion;
  std::string id;

  bool operator==(const Goal&) const = default;
};

struct ProofState {
  std::vector<Goal> goals;  // all open goals, focused goal first
  int depth = 0;            // sentences executed since session start

  // Textual goal equality; ids are opaque bookkeeping and do not count.
  bool same_goals(const ProofState& other) const {
    if (goals.size() != other.goals.size()) return false;
    for (std::size_t i = 0; i < goals.size(); ++i) {
      if (goals[i].hypotheses != other.goals[i].hypotheses ||
          goals[i].conclusion != other.goals[i].conclusion) {
        return false;
      }
    }
    return true;
  }
};

// Outcome of executing one sentence. A failure leaves the session's
// observable state exactly as it was.
struct StepResult {
  std::optional<ProofState> state;
  std::string error;

  bool ok() const { return state.has_value(); }

  static StepResult advanced(ProofState s) { return StepResult{std::move(s), {}}; }
  static StepResult failed(std::string error_text) { return StepResult{std::nullopt, std::move(error_text)}; }
};

struct BackendUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TheoremRejected : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NothingToUndo : std::logic_error {
  NothingToUndo() : std::logic_error("undo at depth zero") {}
};

class Session {
 public:
  virtual ~Session() = default;

  virtual const std::string& theorem_name() const = 0;
  virtual const std::string& theorem_statement() const = 0;

  virtual ProofState state() const = 0;
  virtual int depth() const = 0;

  // Executes one sentence. Failures are reported in the result and never
  // terminate the session.
  virtual StepResult execute(const script::Sentence& s) = 0;

  // Reverts the last successful execute. Throws NothingToUndo at depth 0.
  virtual ProofState undo() = 0;

  // True when no goals remain and Qed would be accepted.
  virtual bool is_complete() const = 0;

  // Runs hammer automation against the focused goal. On success the goal is
  // discharged and the closing sentences are returned; on failure the state
  // is untouched. Hints, when supported, are premise names passed to the
  // automation tactic. A timeout is a failure, not an exception.
  virtual std::optional<std::vector<script::Sentence>> try_hammer(
      const std::vector<std::string>& hints, std::chrono::seconds timeout) = 0;

  // Key identifying the current state for hammer memoization: the fixture
  // state id on the mock, the history depth on the live adapter.
  virtual std::string state_key() const = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;

  // Starts a proof session for a theorem statement ("Theorem foo : ...").
  // env, when present, is the premise corpus the attempt runs against.
  virtual std::unique_ptr<Session> start_session(const std::string& theorem_statement,
                                                 const retrieval::Corpus* env) = 0;
};

// Theorem name from a statement header, e.g. "Lemma sqr_le: ..." -> sqr_le.
inline std::optional<std::string> statement_name(const std::string& statement) {
  static const std::vector<std::string> keywords = {
      "Theorem", "Lemma", "Fact", "Corollary", "Remark", "Proposition", "Example"};
  const auto words = text::split_ws(statement);
  if (words.size() < 2) return std::nullopt;
  for (const auto& k : keywords) {
    if (words[0] != k) continue;
    std::string name = words[1];
    while (!name.empty() && (name.back() == ':' || name.back() == '.')) name.pop_back();
    if (text::is_identifier(name)) return name;
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace palm::prover
