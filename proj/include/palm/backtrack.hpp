#pragma once

// Backtracking over an execution trace. When a goal resists repair, try
// hammer automation on it; on failure undo executed sentences one at a
// time. Hitting a bullet means the focused subgoal is unprovable here, so
// the tactic that produced it (the root) is discarded together with its
// whole bullet subtree, and the search resumes at the enclosing goal. The
// procedure returns the hammer proof it found, or nothing once the trace
// is exhausted.

#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "palm/prover.hpp"
#include "palm/script.hpp"

namespace palm::backtrack {

struct TraceEntry {
  script::Sentence sentence;
  int pre_state_depth = 0;  // session depth before this sentence ran
  int produced_goals = 0;   // subgoals this sentence left in place of the focused one
  int bullet_depth = 0;     // bullet nesting: bullets carry the depth they open
};

struct TraceDesync : std::logic_error {
  TraceDesync() : std::logic_error("execution trace out of sync with session history") {}
};

class ExecutionTrace {
 public:
  // Records a successfully executed sentence. Goal counts are the open-goal
  // totals around the execution; a tactic consuming the focused goal that
  // leaves the total unchanged produced exactly one subgoal.
  void record(const script::Sentence& s, std::size_t goals_before, std::size_t goals_after,
              int pre_state_depth) {
    TraceEntry e;
    e.sentence = s;
    e.pre_state_depth = pre_state_depth;
    const int delta = static_cast<int>(goals_after) - static_cast<int>(goals_before) + 1;
    e.produced_goals = delta < 0 ? 0 : delta;
    if (s.kind == script::SentenceKind::Bullet) {
      e.produced_goals = 1;
      push_bullet(s.raw);
      e.bullet_depth = static_cast<int>(bullet_stack_.size());
    } else {
      e.bullet_depth = static_cast<int>(bullet_stack_.size());
    }
    entries_.push_back(std::move(e));
  }

  // Records a hammer-proof sentence: it closes goals, never splits them.
  void record_closer(const script::Sentence& s, int pre_state_depth) {
    TraceEntry e;
    e.sentence = s;
    e.pre_state_depth = pre_state_depth;
    e.produced_goals = 0;
    e.bullet_depth = static_cast<int>(bullet_stack_.size());
    entries_.push_back(std::move(e));
  }

  void pop() {
    if (entries_.empty()) throw TraceDesync();
    const bool was_bullet = entries_.back().sentence.kind == script::SentenceKind::Bullet;
    entries_.pop_back();
    if (was_bullet) rebuild_bullet_stack();
  }

  const std::vector<TraceEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  // The final proof under construction.
  std::vector<script::Sentence> accepted() const {
    std::vector<script::Sentence> out;
    out.reserve(entries_.size());
    for (const TraceEntry& e : entries_) out.push_back(e.sentence);
    return out;
  }

  int bullet_depth() const { return static_cast<int>(bullet_stack_.size()); }

 private:
  void push_bullet(const std::string& symbol) {
    for (std::size_t i = 0; i < bullet_stack_.size(); ++i) {
      if (bullet_stack_[i] == symbol) {  // sibling at an existing level
        bullet_stack_.resize(i + 1);
        return;
      }
    }
    bullet_stack_.push_back(symbol);
  }

  void rebuild_bullet_stack() {
    bullet_stack_.clear();
    for (const TraceEntry& e : entries_) {
      if (e.sentence.kind == script::SentenceKind::Bullet) push_bullet(e.sentence.raw);
    }
  }

  std::vector<TraceEntry> entries_;
  std::vector<std::string> bullet_stack_;
};

// Index of the tactic that produced the subgoal the trailing bullet focuses:
// the nearest earlier entry splitting the goal at one level up.
inline std::optional<std::size_t> find_root(const ExecutionTrace& trace) {
  const auto& entries = trace.entries();
  if (entries.empty() || entries.back().sentence.kind != script::SentenceKind::Bullet) {
    throw std::logic_error("find_root: last trace entry is not a bullet");
  }
  const int target_depth = entries.back().bullet_depth - 1;
  for (std::size_t i = entries.size() - 1; i-- > 0;) {
    const TraceEntry& e = entries[i];
    if (e.produced_goals > 1 && e.bullet_depth == target_depth) return i;
  }
  return std::nullopt;
}

// Undoes every entry from the top of the trace down to and including
// root_index, pruning the trace in lockstep.
inline void discard_subtree(prover::Session& session, ExecutionTrace& trace,
                            std::size_t root_index) {
  if (root_index >= trace.size()) throw std::logic_error("discard_subtree: bad root index");
  while (trace.size() > root_index) {
    try {
      session.undo();
    } catch (const prover::NothingToUndo&) {
      throw TraceDesync();
    }
    trace.pop();
  }
}

struct HammerConfig {
  std::vector<std::string> hints;
  std::chrono::seconds timeout{10};
  // Hammer attempts stop once the deadline passes; the walk then fails fast.
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct Event {
  enum class Kind { Hammer, Undo, BulletHit, Discard };
  Kind kind;
  std::string detail;                     // sentence or root text
  bool ok = false;                        // hammer success
  std::vector<std::string> proof;         // hammer proof raws
  int undone = 0;                         // entries removed by a discard
};

using EventSink = std::function<void(const Event&)>;

inline std::optional<std::vector<script::Sentence>> run(prover::Session& session,
                                                        ExecutionTrace& trace,
                                                        const HammerConfig& cfg,
                                                        const EventSink& sink = {}) {
  auto emit = [&](Event e) {
    if (sink) sink(e);
  };
  std::set<std::string> hammered;  // one attempt per distinct state per call

  while (!trace.empty()) {
    if (cfg.deadline && std::chrono::steady_clock::now() >= *cfg.deadline) return std::nullopt;
    if (hammered.insert(session.state_key()).second) {
      const int depth_before = session.depth();
      auto proof = session.try_hammer(cfg.hints, cfg.timeout);
      Event ev{Event::Kind::Hammer, session.state_key(), proof.has_value(), {}, 0};
      if (proof) {
        for (const auto& s : *proof) ev.proof.push_back(s.raw);
        emit(ev);
        int pre = depth_before;
        for (const auto& s : *proof) trace.record_closer(s, pre++);
        return proof;
      }
      emit(ev);
    }
    const TraceEntry& last = trace.entries().back();
    if (last.sentence.kind == script::SentenceKind::Bullet) {
      const auto root = find_root(trace);
      if (root) {
        emit({Event::Kind::BulletHit, last.sentence.raw, false, {}, 0});
        const auto& root_entry = trace.entries()[*root];
        Event discard{Event::Kind::Discard, root_entry.sentence.raw, false, {},
                      static_cast<int>(trace.size() - *root)};
        discard_subtree(session, trace, *root);
        emit(discard);
        continue;
      }
      // Malformed trace (no splitting tactic to blame): plain undo.
    }
    emit({Event::Kind::Undo, last.sentence.raw, false, {}, 0});
    session.undo();
    trace.pop();
  }
  return std::nullopt;
}

}  // namespace palm::backtrack
