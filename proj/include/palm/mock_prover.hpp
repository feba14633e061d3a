#pragma once

// Deterministic prover backend driven by transcript fixtures: an explicit
// state machine with named states (goal lists), a transition table keyed by
// normalized sentence text, per-state hammer verdicts, and the set of states
// where the proof is finished. One JSON document per theorem:
//
// {
//   "theorem": "add_comm",
//   "statement": "Theorem add_comm : forall n m : nat, n + m = m + n.",
//   "initial": "start",
//   "states": {
//     "start": {"goals": [{"hyps": [{"names": ["n","m"], "type": "nat"}],
//                          "conclusion": "n + m = m + n"}]}
//   },
//   "transitions": {
//     "start": {"intros n m.": "intros_done",
//               "apply H.": {"error": "Unable to unify ..."}}
//   },
//   "hammer": {"start": {"proof": ["auto."]}, "other": "fail"},
//   "complete": ["solved"]
// }
//
// Sentences are normalized by trimming and collapsing whitespace runs to a
// single space before lookup. A sentence with no declared transition fails.

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "palm/prover.hpp"
#include "palm/script.hpp"
#include "palm/text.hpp"

namespace palm::prover {

struct FixtureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TranscriptFixture {
  struct Target {
    std::string to;     // next state, when the step succeeds
    std::string error;  // error text, when it fails
    bool fails() const { return to.empty(); }
  };

  std::string theorem;
  std::string statement;
  std::string initial;
  std::map<std::string, std::vector<Goal>> states;
  std::map<std::string, std::map<std::string, Target>> transitions;
  std::map<std::string, std::vector<std::string>> hammer;  // state -> proof sentences
  std::set<std::string> hammer_fails;                      // states with an explicit "fail"
  std::set<std::string> complete;

  static TranscriptFixture from_json(const nlohmann::json& doc) {
    TranscriptFixture fx;
    fx.theorem = doc.at("theorem").get<std::string>();
    fx.statement = doc.at("statement").get<std::string>();
    fx.initial = doc.at("initial").get<std::string>();
    for (const auto& [id, js] : doc.at("states").items()) {
      std::vector<Goal> goals;
      int index = 0;
      for (const auto& jg : js.at("goals")) {
        Goal g;
        g.conclusion = jg.at("conclusion").get<std::string>();
        g.id = id + "/" + std::to_string(index++);
        if (jg.contains("hyps")) {
          for (const auto& jh : jg["hyps"]) {
            Hypothesis h;
            h.names = jh.at("names").get<std::vector<std::string>>();
            h.type_text = jh.at("type").get<std::string>();
            g.hypotheses.push_back(std::move(h));
          }
        }
        goals.push_back(std::move(g));
      }
      fx.states.emplace(id, std::move(goals));
    }
    if (doc.contains("transitions")) {
      for (const auto& [from, jmap] : doc["transitions"].items()) {
        for (const auto& [sentence, jt] : jmap.items()) {
          Target t;
          if (jt.is_string()) {
            t.to = jt.get<std::string>();
          } else {
            t.error = jt.at("error").get<std::string>();
          }
          fx.transitions[from][text::normalize_ws(sentence)] = std::move(t);
        }
      }
    }
    if (doc.contains("hammer")) {
      for (const auto& [state, jh] : doc["hammer"].items()) {
        if (jh.is_string() && jh.get<std::string>() == "fail") {
          fx.hammer_fails.insert(state);
        } else {
          fx.hammer[state] = jh.at("proof").get<std::vector<std::string>>();
        }
      }
    }
    if (doc.contains("complete")) {
      for (const auto& jid : doc["complete"]) fx.complete.insert(jid.get<std::string>());
    }
    fx.validate();
    return fx;
  }

  void validate() const {
    auto require_state = [&](const std::string& id, const char* where) {
      if (!states.count(id)) {
        throw FixtureError("fixture " + theorem + ": " + where + " references unknown state '" +
                           id + "'");
      }
    };
    require_state(initial, "initial");
    for (const auto& [from, row] : transitions) {
      require_state(from, "transition source");
      for (const auto& [sentence, target] : row) {
        if (!target.fails()) require_state(target.to, "transition target");
      }
    }
    for (const auto& id : complete) {
      require_state(id, "complete set");
      if (!states.at(id).empty()) {
        throw FixtureError("fixture " + theorem + ": complete state '" + id + "' has open goals");
      }
    }
    for (const auto& [state, proof] : hammer) require_state(state, "hammer verdict");
  }
};

class MockSession final : public Session {
 public:
  MockSession(const TranscriptFixture& fx, const retrieval::Corpus* env)
      : fixture_(fx), env_(env), current_(fx.initial) {}

  const std::string& theorem_name() const override { return fixture_.theorem; }
  const std::string& theorem_statement() const override { return fixture_.statement; }

  ProofState state() const override {
    ProofState s;
    s.goals = fixture_.states.at(current_);
    s.depth = static_cast<int>(history_.size());
    return s;
  }

  int depth() const override { return static_cast<int>(history_.size()); }

  StepResult execute(const script::Sentence& s) override {
    const std::string key = text::normalize_ws(s.raw);
    const auto row = fixture_.transitions.find(current_);
    if (row == fixture_.transitions.end()) {
      return StepResult::failed(kNoTransition);
    }
    const auto hit = row->second.find(key);
    if (hit == row->second.end()) {
      return StepResult::failed(kNoTransition);
    }
    if (hit->second.fails()) {
      return StepResult::failed(hit->second.error);
    }
    history_.emplace_back(s, current_);
    current_ = hit->second.to;
    return StepResult::advanced(state());
  }

  ProofState undo() override {
    if (history_.empty()) throw NothingToUndo();
    current_ = history_.back().second;
    history_.pop_back();
    return state();
  }

  bool is_complete() const override {
    return fixture_.complete.count(current_) > 0 && fixture_.states.at(current_).empty();
  }

  std::optional<std::vector<script::Sentence>> try_hammer(
      const std::vector<std::string>& /*hints*/, std::chrono::seconds /*timeout*/) override {
    const auto verdict = fixture_.hammer.find(current_);
    if (verdict == fixture_.hammer.end()) return std::nullopt;
    std::vector<script::Sentence> proof;
    for (const std::string& raw : verdict->second) {
      auto split = script::split_sentences(raw);
      proof.insert(proof.end(), split.begin(), split.end());
    }
    for (const script::Sentence& s : proof) {
      StepResult r = execute(s);
      if (!r.ok()) {
        throw FixtureError("fixture " + fixture_.theorem + ": hammer proof sentence '" + s.raw +
                           "' has no successful transition from state '" + current_ + "'");
      }
    }
    return proof;
  }

  std::string state_key() const override { return current_; }

  const retrieval::Corpus* env() const { return env_; }

 private:
  static constexpr const char* kNoTransition =
      "The tactic could not be applied (no transcript transition).";

  const TranscriptFixture& fixture_;
  const retrieval::Corpus* env_;
  std::string current_;
  std::vector<std::pair<script::Sentence, std::string>> history_;  // sentence, previous state
};

class MockBackend final : public Backend {
 public:
  MockBackend() = default;

  explicit MockBackend(const std::filesystem::path& fixture_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(fixture_dir)) {
      throw BackendUnavailable("fixture directory not found: " + fixture_dir.string());
    }
    for (const auto& entry : fs::directory_iterator(fixture_dir)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      nlohmann::json doc;
      in >> doc;
      if (!doc.contains("theorem")) continue;  // not a transcript document
      add(TranscriptFixture::from_json(doc));
    }
  }

  void add(TranscriptFixture fx) {
    const std::string name = fx.theorem;
    if (!fixtures_.emplace(name, std::move(fx)).second) {
      throw FixtureError("duplicate transcript fixture for theorem: " + name);
    }
  }

  std::unique_ptr<Session> start_session(const std::string& theorem_statement,
                                         const retrieval::Corpus* env) override {
    const auto name = statement_name(theorem_statement);
    if (!name) {
      throw TheoremRejected("statement has no parsable theorem header: " + theorem_statement);
    }
    const auto it = fixtures_.find(*name);
    if (it == fixtures_.end()) {
      throw TheoremRejected("unknown theorem: " + *name);
    }
    return std::make_unique<MockSession>(it->second, env);
  }

  const TranscriptFixture* find(const std::string& name) const {
    const auto it = fixtures_.find(name);
    return it == fixtures_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, TranscriptFixture> fixtures_;
};

}  // namespace palm::prover
