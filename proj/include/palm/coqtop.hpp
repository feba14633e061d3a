#pragma once

// Subprocess adapter driving a Coq toplevel (coqtop -emacs) over pipes.
// The -emacs prompt carries the current state id, which BackTo uses for
// undo. Goals are parsed from the textual display; a per-call timeout is
// enforced by interrupting the child with SIGINT, which aborts the running
// tactic and leaves the state untouched.
//
// Integration-only: nothing in the unit suite talks to a real Coq. The
// acceptance harness enables it when PALM_COQTOP names an executable.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "palm/prover.hpp"
#include "palm/script.hpp"
#include "palm/text.hpp"

namespace palm::prover {

struct CoqtopConfig {
  std::string executable;                  // path to coqtop
  std::vector<std::string> load_path_args; // extra -Q/-R flags etc.
  std::chrono::seconds call_timeout{30};   // per execute
  std::chrono::seconds hammer_timeout{10};
  // Candidate automation sentences; "{hints}" expands to comma-joined hints
  // and hinted candidates drop out when there are none.
  std::vector<std::string> hammer_candidates = {
      "hfcrush use: {hints}.",
      "hfcrush.",
      "sfirstorder.",
      "auto.",
      "eauto.",
  };
  std::vector<std::string> prelude = {"Set Printing Width 4096."};

  static CoqtopConfig from_env() {
    CoqtopConfig cfg;
    if (const char* v = std::getenv("PALM_COQTOP")) cfg.executable = v;
    return cfg;
  }
};

namespace coqtop_detail {

// Child process with merged stdout/stderr on one pipe.
class Subprocess {
 public:
  Subprocess(const std::string& executable, const std::vector<std::string>& args) {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
      throw BackendUnavailable("pipe() failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw BackendUnavailable("fork() failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      dup2(from_child[1], STDERR_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      std::vector<char*> argv;
      argv.push_back(const_cast<char*>(executable.c_str()));
      for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execvp(executable.c_str(), argv.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
  }

  ~Subprocess() {
    if (pid_ > 0) {
      close(in_fd_);
      close(out_fd_);
      kill(pid_, SIGTERM);
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  void write_line(const std::string& line) {
    std::string payload = line + "\n";
    std::size_t off = 0;
    while (off < payload.size()) {
      const ssize_t n = ::write(in_fd_, payload.data() + off, payload.size() - off);
      if (n <= 0) throw BackendUnavailable("write to coqtop failed");
      off += static_cast<std::size_t>(n);
    }
  }

  // Reads until `marker` appears; nullopt on timeout (caller interrupts).
  std::optional<std::string> read_until(const std::string& marker,
                                        std::chrono::milliseconds timeout) {
    std::string buf;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const std::size_t at = buf.find(marker);
      if (at != std::string::npos) return buf;
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) return std::nullopt;
      const auto left =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
      pollfd pfd{out_fd_, POLLIN, 0};
      const int pr = poll(&pfd, 1, static_cast<int>(left));
      if (pr <= 0) return std::nullopt;
      char chunk[4096];
      const ssize_t n = ::read(out_fd_, chunk, sizeof(chunk));
      if (n <= 0) throw BackendUnavailable("coqtop exited unexpectedly");
      buf.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void interrupt() { kill(pid_, SIGINT); }

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
};

struct Response {
  std::string body;   // output with the prompt stripped
  int state_id = -1;  // from the -emacs prompt
  bool timed_out = false;
};

inline int parse_prompt_state(const std::string& prompt_text) {
  // "<prompt>Coq < 3 |thm| 4 < </prompt>" — the first integer is the id of
  // the state the next command will run against.
  static const std::regex number("([0-9]+)");
  std::smatch m;
  if (std::regex_search(prompt_text, m, number)) return std::stoi(m[1].str());
  return -1;
}

inline std::optional<std::string> extract_error(const std::string& body) {
  const std::size_t at = body.find("Error:");
  if (at == std::string::npos) return std::nullopt;
  return text::trim(body.substr(at + std::strlen("Error:")));
}

// Parses the goal display:
//   "N subgoals" / "1 subgoal", hypothesis lines, a ==== rule, the focused
//   conclusion, then "subgoal K is:" blocks carrying conclusions only.
inline std::vector<Goal> parse_goals(const std::string& body) {
  std::vector<Goal> goals;
  std::istringstream in(body);
  std::string line;
  Goal current;
  enum class Where { Outside, Hyps, Conclusion } where = Where::Outside;
  auto flush = [&] {
    if (!current.conclusion.empty()) {
      current.conclusion = text::trim(current.conclusion);
      current.id = "g" + std::to_string(goals.size());
      goals.push_back(current);
    }
    current = Goal{};
  };
  static const std::regex header(R"(^\s*[0-9]+\s+(focused )?subgoals?)");
  static const std::regex subgoal(R"(^\s*subgoal\s+[0-9]+)");
  while (std::getline(in, line)) {
    if (std::regex_search(line, header)) {
      flush();
      where = Where::Hyps;
      continue;
    }
    if (std::regex_search(line, subgoal)) {
      flush();
      where = Where::Conclusion;
      continue;
    }
    if (line.find("====") != std::string::npos) {
      where = Where::Conclusion;
      continue;
    }
    if (where == Where::Hyps) {
      const std::size_t colon = line.find(" : ");
      if (colon == std::string::npos) continue;
      Hypothesis h;
      for (auto& name : text::split_ws(line.substr(0, colon))) {
        while (!name.empty() && name.back() == ',') name.pop_back();
        h.names.push_back(name);
      }
      h.type_text = text::trim(line.substr(colon + 3));
      if (!h.names.empty()) current.hypotheses.push_back(std::move(h));
    } else if (where == Where::Conclusion) {
      const std::string t = text::trim(line);
      if (t.empty()) {
        if (!current.conclusion.empty()) where = Where::Outside;
        continue;
      }
      if (!current.conclusion.empty()) current.conclusion += " ";
      current.conclusion += t;
    }
  }
  flush();
  return goals;
}

}  // namespace coqtop_detail

class CoqtopSession final : public Session {
 public:
  CoqtopSession(const CoqtopConfig& cfg, const std::string& theorem_statement)
      : cfg_(cfg), statement_(theorem_statement) {
    std::vector<std::string> args = {"-emacs", "-q"};
    args.insert(args.end(), cfg.load_path_args.begin(), cfg.load_path_args.end());
    proc_ = std::make_unique<coqtop_detail::Subprocess>(cfg.executable, args);
    auto hello = round_trip_raw("", cfg_.call_timeout);  // initial prompt
    if (!hello) throw BackendUnavailable("no prompt from " + cfg.executable);
    for (const auto& cmd : cfg_.prelude) {
      if (auto err = run_or_error(cmd)) {
        throw BackendUnavailable("prelude rejected: " + *err);
      }
    }
    name_ = statement_name(theorem_statement).value_or("goal");
    if (auto err = run_or_error(theorem_statement)) {
      throw TheoremRejected(*err);
    }
  }

  const std::string& theorem_name() const override { return name_; }
  const std::string& theorem_statement() const override { return statement_; }

  ProofState state() const override {
    ProofState s;
    s.goals = goals_;
    s.depth = static_cast<int>(history_.size());
    return s;
  }

  int depth() const override { return static_cast<int>(history_.size()); }

  StepResult execute(const script::Sentence& s) override { return execute_bounded(s, cfg_.call_timeout); }

  ProofState undo() override {
    if (history_.empty()) throw NothingToUndo();
    const Frame frame = history_.back();
    auto resp = round_trip_raw("BackTo " + std::to_string(frame.pre_state_id) + ".",
                               cfg_.call_timeout);
    if (!resp) throw BackendUnavailable("BackTo timed out");
    history_.pop_back();
    goals_ = frame.pre_goals;
    complete_ = frame.pre_complete;
    return state();
  }

  bool is_complete() const override { return complete_ && goals_.empty(); }

  std::optional<std::vector<script::Sentence>> try_hammer(
      const std::vector<std::string>& hints, std::chrono::seconds timeout) override {
    for (const auto& tmpl : cfg_.hammer_candidates) {
      std::string raw = tmpl;
      const std::size_t slot = raw.find("{hints}");
      if (slot != std::string::npos) {
        if (hints.empty()) continue;
        std::string joined;
        for (const auto& h : hints) {
          if (!joined.empty()) joined += ", ";
          joined += h;
        }
        raw.replace(slot, std::strlen("{hints}"), joined);
      }
      const auto split = script::split_sentences(raw);
      if (split.size() != 1) continue;
      const std::size_t goals_before = goals_.size();
      const StepResult r = execute_bounded(split[0], timeout);
      if (!r.ok()) continue;
      if (r.state->goals.size() < goals_before) {
        return std::vector<script::Sentence>{split[0]};
      }
      undo();  // ran but did not close the goal: not a hammer success
    }
    return std::nullopt;
  }

  std::string state_key() const override { return "depth:" + std::to_string(depth()); }

 private:
  struct Frame {
    script::Sentence sentence;
    int pre_state_id;
    std::vector<Goal> pre_goals;
    bool pre_complete;
  };

  StepResult execute_bounded(const script::Sentence& s, std::chrono::seconds timeout) {
    const int pre_state = current_state_id_;
    auto resp = round_trip_raw(text::normalize_ws(s.raw), timeout);
    if (!resp) {
      // Interrupt the tactic; the toplevel answers with a user-interrupt
      // error and an intact state.
      proc_->interrupt();
      round_trip_raw("", cfg_.call_timeout);
      return StepResult::failed("Timeout.");
    }
    if (auto err = coqtop_detail::extract_error(resp->body)) {
      return StepResult::failed(*err);
    }
    Frame frame{s, pre_state, goals_, complete_};
    history_.push_back(std::move(frame));
    refresh_goals(resp->body);
    return StepResult::advanced(state());
  }

  std::optional<std::string> run_or_error(const std::string& cmd) {
    auto resp = round_trip_raw(cmd, cfg_.call_timeout);
    if (!resp) return "timeout";
    if (auto err = coqtop_detail::extract_error(resp->body)) return err;
    refresh_goals(resp->body);
    return std::nullopt;
  }

  void refresh_goals(const std::string& body) {
    if (body.find("No more subgoals") != std::string::npos ||
        body.find("no more goals") != std::string::npos) {
      goals_.clear();
      complete_ = true;
      return;
    }
    if (body.find("subproof is complete") != std::string::npos) {
      goals_.clear();
      complete_ = false;  // unfocused goals remain
      return;
    }
    auto parsed = coqtop_detail::parse_goals(body);
    if (!parsed.empty()) {
      goals_ = std::move(parsed);
      complete_ = false;
    }
  }

  // Sends a command (empty = just read) and reads through the next prompt.
  std::optional<coqtop_detail::Response> round_trip_raw(const std::string& cmd,
                                                        std::chrono::seconds timeout) {
    if (!cmd.empty()) proc_->write_line(cmd);
    auto raw = proc_->read_until("</prompt>",
                                 std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    if (!raw) return std::nullopt;
    coqtop_detail::Response resp;
    const std::size_t open = raw->rfind("<prompt>");
    const std::size_t close = raw->rfind("</prompt>");
    if (open != std::string::npos && close != std::string::npos && close > open) {
      resp.state_id = coqtop_detail::parse_prompt_state(
          raw->substr(open + 8, close - open - 8));
      resp.body = raw->substr(0, open);
    } else {
      resp.body = *raw;
    }
    if (resp.state_id >= 0) current_state_id_ = resp.state_id;
    return resp;
  }

  CoqtopConfig cfg_;
  std::string statement_;
  std::string name_;
  std::unique_ptr<coqtop_detail::Subprocess> proc_;
  std::vector<Frame> history_;
  std::vector<Goal> goals_;
  bool complete_ = false;
  int current_state_id_ = 1;
};

class CoqtopBackend final : public Backend {
 public:
  explicit CoqtopBackend(CoqtopConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.executable.empty()) {
      throw BackendUnavailable("no coqtop executable configured (set PALM_COQTOP)");
    }
  }

  std::unique_ptr<Session> start_session(const std::string& theorem_statement,
                                         const retrieval::Corpus*) override {
    return std::make_unique<CoqtopSession>(cfg_, theorem_statement);
  }

 private:
  CoqtopConfig cfg_;
};

}  // namespace palm::prover
