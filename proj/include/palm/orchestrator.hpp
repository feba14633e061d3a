#pragma once

// The end-to-end pipeline: retrieve premises, build the prompt, query the
// model once, then execute the script sentence by sentence, repairing
// errors where a mechanism applies and backtracking with hammer automation
// where none does. Also the benchmark harness (parallel, resumable) and its
// report rendering.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "palm/backtrack.hpp"
#include "palm/errors.hpp"
#include "palm/genai.hpp"
#include "palm/prover.hpp"
#include "palm/repair.hpp"
#include "palm/retrieval.hpp"
#include "palm/script.hpp"

namespace palm::orchestrator {

struct ProveConfig {
  int retrieval_k = 50;
  int prompt_budget = 10;                      // premises shown to the model
  std::chrono::seconds hammer_timeout{10};     // per hammer invocation
  int replacement_bound = 10;                  // M, reference-replacement attempts
  std::chrono::seconds theorem_budget{600};    // prover+hammer wall clock per theorem
  std::optional<double> temperature;           // provider default when unset
  int max_tokens = 1024;
  bool knn_by_proof_usage = false;
  bool hammer_use_retrieved_hints = false;     // off: retrieved premises are not fed to hammer
};

struct TheoremRecord {
  std::string name;
  std::string statement;
  std::string project;
  std::string premises_file;                   // optional, overrides the default corpus
  std::optional<std::string> ground_truth_proof;
};

inline std::vector<TheoremRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  nlohmann::json doc;
  in >> doc;
  std::vector<TheoremRecord> out;
  for (const auto& jt : doc.at("theorems")) {
    TheoremRecord r;
    r.name = jt.at("name").get<std::string>();
    r.statement = jt.at("statement").get<std::string>();
    r.project = jt.value("project", "");
    r.premises_file = jt.value("premises_file", "");
    if (jt.contains("proof")) r.ground_truth_proof = jt["proof"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

struct Timings {
  double total_s = 0;
  double model_s = 0;
  double prover_s = 0;
  double hammer_s = 0;
  int hammer_invocations = 0;

  nlohmann::json to_json() const {
    return {{"total_s", total_s},
            {"model_s", model_s},
            {"prover_s", prover_s},
            {"hammer_s", hammer_s},
            {"hammer_invocations", hammer_invocations}};
  }
};

struct ProofEvent {
  enum class Kind {
    ModelQuery,
    Execute,
    Classify,
    Repair,
    BacktrackStart,
    Hammer,
    Undo,
    BulletHit,
    Discard,
    BacktrackEnd,
    Skip,
  };

  ProofEvent() = default;
  ProofEvent(Kind k, std::string s) : kind(k), sentence(std::move(s)) {}

  Kind kind = Kind::Execute;
  std::string sentence;     // raw sentence / root / state key, by kind
  bool ok = false;
  std::string error;
  std::optional<errors::ErrorCategory> category;
  std::optional<repair::Mechanism> mechanism;
  std::optional<repair::Status> repair_status;
  int attempts = 0;
  std::vector<std::string> proof;  // hammer proof sentences
  int undone = 0;

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::ModelQuery: return "model_query";
      case Kind::Execute: return "execute";
      case Kind::Classify: return "classify";
      case Kind::Repair: return "repair";
      case Kind::BacktrackStart: return "backtrack_start";
      case Kind::Hammer: return "hammer";
      case Kind::Undo: return "undo";
      case Kind::BulletHit: return "bullet_hit";
      case Kind::Discard: return "discard";
      case Kind::BacktrackEnd: return "backtrack_end";
      case Kind::Skip: return "skip";
    }
    return "?";
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["type"] = kind_name(kind);
    if (!sentence.empty()) j["sentence"] = sentence;
    switch (kind) {
      case Kind::Execute:
      case Kind::Hammer:
      case Kind::BacktrackEnd:
        j["ok"] = ok;
        break;
      default:
        break;
    }
    if (!error.empty()) j["error"] = error;
    if (category) j["category"] = errors::to_string(*category);
    if (mechanism) j["mechanism"] = repair::to_string(*mechanism);
    if (repair_status) j["repaired"] = *repair_status == repair::Status::Repaired;
    if (repair_status) j["repair_status"] = repair::to_string(*repair_status);
    if (attempts > 0) j["attempts"] = attempts;
    if (!proof.empty()) j["proof"] = proof;
    if (undone > 0) j["undone"] = undone;
    return j;
  }
};

struct ProofResult {
  std::string theorem;
  bool proved = false;
  std::optional<script::ProofScript> final_script;
  std::vector<ProofEvent> events;
  Timings timings;
  std::string failure_reason;
  std::string prompt_version;

  int model_queries() const {
    int n = 0;
    for (const auto& e : events) n += e.kind == ProofEvent::Kind::ModelQuery ? 1 : 0;
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["theorem"] = theorem;
    j["proved"] = proved;
    if (final_script) j["final_script"] = script::render(*final_script);
    if (!failure_reason.empty()) j["failure_reason"] = failure_reason;
    j["prompt_version"] = prompt_version;
    j["timings"] = timings.to_json();
    auto events_json = nlohmann::json::array();
    for (const auto& e : events) events_json.push_back(e.to_json());
    j["events"] = events_json;
    return j;
  }
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Session decorator accumulating prover and hammer wall time.
class InstrumentedSession final : public prover::Session {
 public:
  InstrumentedSession(std::unique_ptr<prover::Session> inner, Timings& timings)
      : inner_(std::move(inner)), timings_(timings) {}

  const std::string& theorem_name() const override { return inner_->theorem_name(); }
  const std::string& theorem_statement() const override { return inner_->theorem_statement(); }
  prover::ProofState state() const override { return inner_->state(); }
  int depth() const override { return inner_->depth(); }

  prover::StepResult execute(const script::Sentence& s) override {
    Stopwatch watch;
    auto r = inner_->execute(s);
    timings_.prover_s += watch.seconds();
    return r;
  }

  prover::ProofState undo() override {
    Stopwatch watch;
    auto r = inner_->undo();
    timings_.prover_s += watch.seconds();
    return r;
  }

  bool is_complete() const override { return inner_->is_complete(); }

  std::optional<std::vector<script::Sentence>> try_hammer(
      const std::vector<std::string>& hints, std::chrono::seconds timeout) override {
    Stopwatch watch;
    auto r = inner_->try_hammer(hints, timeout);
    timings_.hammer_s += watch.seconds();
    ++timings_.hammer_invocations;
    return r;
  }

  std::string state_key() const override { return inner_->state_key(); }

 private:
  std::unique_ptr<prover::Session> inner_;
  Timings& timings_;
};

inline std::vector<std::string> hypothesis_names(const prover::ProofState& state) {
  std::vector<std::string> names;
  if (state.goals.empty()) return names;
  for (const auto& h : state.goals.front().hypotheses) {
    names.insert(names.end(), h.names.begin(), h.names.end());
  }
  return names;
}

}  // namespace detail

struct ProveDeps {
  prover::Backend& backend;
  genai::ModelClient& model;
  const genai::PromptTemplate& prompt_template;
  const errors::RuleTable& rules;
};

inline ProofResult prove(const TheoremRecord& theorem, const retrieval::Corpus& env,
                         const ProveConfig& cfg, ProveDeps deps) {
  ProofResult result;
  result.theorem = theorem.name;
  result.prompt_version = deps.prompt_template.version;
  detail::Stopwatch total;
  auto finish = [&](bool proved, const std::string& reason) -> ProofResult& {
    result.proved = proved;
    result.failure_reason = reason;
    result.timings.total_s = total.seconds();
    return result;
  };

  // Premise retrieval, then the single model query.
  auto candidates = cfg.knn_by_proof_usage
                        ? retrieval::knn_premises_by_proof_usage(
                              env, theorem.statement, static_cast<std::size_t>(cfg.retrieval_k))
                        : retrieval::knn_premises(env, theorem.statement,
                                                  static_cast<std::size_t>(cfg.retrieval_k));
  auto reranked = retrieval::bm25_rerank(std::move(candidates), theorem.statement);
  if (reranked.size() > static_cast<std::size_t>(cfg.prompt_budget)) {
    reranked.resize(static_cast<std::size_t>(cfg.prompt_budget));
  }
  const genai::Prompt prompt =
      genai::build_prompt(theorem.name, theorem.statement, reranked, deps.prompt_template);

  genai::ModelReply reply;
  {
    detail::Stopwatch model_watch;
    ProofEvent ev{ProofEvent::Kind::ModelQuery, theorem.name};
    try {
      reply = genai::query_model(deps.model, prompt, cfg.temperature, cfg.max_tokens);
      ev.ok = true;
    } catch (const genai::ModelError& e) {
      result.timings.model_s += model_watch.seconds();
      ev.error = e.what();
      result.events.push_back(ev);
      return finish(false, std::string("model unavailable: ") + e.what());
    }
    result.timings.model_s += model_watch.seconds();
    result.events.push_back(ev);
  }
  if (!reply.extracted) {
    return finish(false, "model reply contained no proof script");
  }
  const std::vector<script::Sentence>& sentences = reply.extracted->sentences;
  const std::vector<int> depths = script::bullet_depths(sentences);

  std::unique_ptr<prover::Session> session;
  try {
    session = std::make_unique<detail::InstrumentedSession>(
        deps.backend.start_session(theorem.statement, &env), result.timings);
  } catch (const std::exception& e) {
    return finish(false, std::string("backend rejected the theorem: ") + e.what());
  }

  std::vector<std::string> premise_names;
  for (const auto& r : reranked) premise_names.push_back(r.doc.name);

  backtrack::ExecutionTrace trace;
  backtrack::HammerConfig hammer_cfg;
  hammer_cfg.timeout = cfg.hammer_timeout;
  hammer_cfg.deadline = std::chrono::steady_clock::now() + cfg.theorem_budget;
  if (cfg.hammer_use_retrieved_hints) hammer_cfg.hints = premise_names;

  auto over_budget = [&] {
    return result.timings.prover_s + result.timings.hammer_s >
           static_cast<double>(cfg.theorem_budget.count());
  };

  std::optional<int> skip_deeper_than;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const script::Sentence& s = sentences[i];
    if (over_budget()) {
      return finish(false, "per-theorem time budget exceeded");
    }
    if (skip_deeper_than) {
      if (depths[i] > *skip_deeper_than) {
        result.events.push_back({ProofEvent::Kind::Skip, s.raw});
        continue;
      }
      skip_deeper_than.reset();
    }

    const prover::ProofState before = session->state();
    prover::StepResult step =
        s.kind == script::SentenceKind::AbortCmd
            ? prover::StepResult::failed("Proof abandoned.")  // never executed
            : session->execute(s);
    {
      ProofEvent ev{ProofEvent::Kind::Execute, s.raw};
      ev.ok = step.ok();
      if (!step.ok()) ev.error = step.error;
      result.events.push_back(ev);
    }
    if (step.ok()) {
      trace.record(s, before.goals.size(), step.state->goals.size(), before.depth);
      continue;
    }

    // Classification, then one repair mechanism when the category has one.
    const script::Tactic failing = script::as_tactic(s);
    const errors::ErrorFacts facts = deps.rules.classify(step.error, failing);
    {
      ProofEvent ev{ProofEvent::Kind::Classify, s.raw};
      ev.category = facts.category;
      result.events.push_back(ev);
    }

    bool handled = false;
    if (facts.category != errors::ErrorCategory::Unknown) {
      repair::Context context;
      context.premise_names = premise_names;
      context.hypothesis_names = detail::hypothesis_names(before);
      context.replacement_bound = cfg.replacement_bound;
      context.hammer_timeout = cfg.hammer_timeout;
      const repair::Outcome outcome = repair::repair(facts, failing, before, *session, context);
      {
        ProofEvent ev{ProofEvent::Kind::Repair, s.raw};
        ev.mechanism = outcome.mechanism;
        ev.repair_status = outcome.status;
        ev.attempts = outcome.attempts;
        for (const auto& r : outcome.replacement) ev.proof.push_back(r.raw);
        result.events.push_back(ev);
      }
      if (outcome.status == repair::Status::Repaired) {
        const auto after = session->state();
        int pre = before.depth;
        for (const auto& r : outcome.replacement) {
          trace.record(r, before.goals.size(), after.goals.size(), pre++);
        }
        handled = true;
      } else if (outcome.status == repair::Status::Dropped) {
        handled = true;
      }
    }
    if (handled) continue;

    // Backtracking.
    result.events.push_back({ProofEvent::Kind::BacktrackStart, s.raw});
    auto to_proof_event = [](const backtrack::Event& e) {
      ProofEvent ev{ProofEvent::Kind::Hammer, e.detail};
      switch (e.kind) {
        case backtrack::Event::Kind::Hammer:
          ev.kind = ProofEvent::Kind::Hammer;
          ev.ok = e.ok;
          ev.proof = e.proof;
          break;
        case backtrack::Event::Kind::Undo:
          ev.kind = ProofEvent::Kind::Undo;
          break;
        case backtrack::Event::Kind::BulletHit:
          ev.kind = ProofEvent::Kind::BulletHit;
          break;
        case backtrack::Event::Kind::Discard:
          ev.kind = ProofEvent::Kind::Discard;
          ev.undone = e.undone;
          break;
      }
      return ev;
    };
    auto proof = backtrack::run(*session, trace, hammer_cfg, [&](const backtrack::Event& e) {
      result.events.push_back(to_proof_event(e));
    });
    {
      ProofEvent ev{ProofEvent::Kind::BacktrackEnd, s.raw};
      ev.ok = proof.has_value();
      result.events.push_back(ev);
    }
    if (!proof) {
      if (over_budget()) return finish(false, "per-theorem time budget exceeded");
      return finish(false, "backtracking exhausted the proof script");
    }
    // Skip the remainder of any subtree the backtracking discarded.
    skip_deeper_than = trace.bullet_depth();
  }

  if (!session->is_complete()) {
    return finish(false, "open goals remain after the script");
  }

  // Close the proof if the script's own Qed never ran.
  auto accepted = trace.accepted();
  if (accepted.empty() || accepted.back().kind != script::SentenceKind::QedCmd) {
    const script::Sentence qed = script::split_sentences("Qed.")[0];
    const prover::ProofState before = session->state();
    const auto r = session->execute(qed);
    ProofEvent ev{ProofEvent::Kind::Execute, qed.raw};
    ev.ok = r.ok();
    if (!r.ok()) ev.error = r.error;
    result.events.push_back(ev);
    if (!r.ok()) {
      return finish(false, "final Qed was rejected");
    }
    trace.record(qed, before.goals.size(), r.state->goals.size(), before.depth);
    accepted = trace.accepted();
  }

  script::ProofScript final_script;
  final_script.sentences = std::move(accepted);
  final_script.source = script::render(final_script.sentences);
  result.final_script = std::move(final_script);
  return finish(true, "");
}

// Independent check: a fresh session must replay the final script to
// completion.
inline bool replay_succeeds(const script::ProofScript& final_script, prover::Backend& backend,
                            const std::string& statement, const retrieval::Corpus* env = nullptr) {
  std::unique_ptr<prover::Session> session;
  try {
    session = backend.start_session(statement, env);
  } catch (const std::exception&) {
    return false;
  }
  for (const auto& s : final_script.sentences) {
    if (!session->execute(s).ok()) return false;
  }
  return session->is_complete();
}

// "4377 (40.4%)" — the report cell format.
inline std::string format_count_rate(long long count, long long total) {
  const double pct = total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%lld (%.1f%%)", count, pct);
  return buf;
}

struct BenchmarkReport {
  long long attempted = 0;
  long long proved = 0;
  std::map<errors::ErrorCategory, int> histogram;
  Timings timing_totals;
  std::vector<std::pair<std::string, bool>> per_theorem;  // sorted by name

  double rate() const {
    return attempted == 0 ? 0.0 : static_cast<double>(proved) / static_cast<double>(attempted);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["attempted"] = attempted;
    j["proved"] = proved;
    j["rate"] = rate();
    j["proved_cell"] = format_count_rate(proved, attempted);
    nlohmann::json hist;
    for (const auto& [cat, n] : histogram) hist[errors::to_string(cat)] = n;
    j["error_histogram"] = hist;
    j["timing_totals"] = timing_totals.to_json();
    nlohmann::json per;
    for (const auto& [name, ok] : per_theorem) per[name] = ok;
    j["per_theorem"] = per;
    return j;
  }

  std::string to_text() const {
    std::ostringstream out;
    out << "Approach              Theorems proven\n";
    out << "palm                  " << format_count_rate(proved, attempted) << "\n\n";
    out << "Error categories observed:\n" << errors::render_histogram(histogram);
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "\nTiming: total %.1fs, model %.1fs, prover %.1fs, hammer %.1fs, "
                  "%d hammer invocations\n",
                  timing_totals.total_s, timing_totals.model_s, timing_totals.prover_s,
                  timing_totals.hammer_s, timing_totals.hammer_invocations);
    out << buf;
    return out.str();
  }
};

inline BenchmarkReport aggregate_report(const std::vector<ProofResult>& results) {
  BenchmarkReport report;
  for (errors::ErrorCategory c : errors::all_categories()) report.histogram[c] = 0;
  for (const auto& r : results) {
    ++report.attempted;
    report.proved += r.proved ? 1 : 0;
    report.per_theorem.emplace_back(r.theorem, r.proved);
    for (const auto& e : r.events) {
      if (e.kind == ProofEvent::Kind::Classify && e.category) ++report.histogram[*e.category];
    }
    report.timing_totals.total_s += r.timings.total_s;
    report.timing_totals.model_s += r.timings.model_s;
    report.timing_totals.prover_s += r.timings.prover_s;
    report.timing_totals.hammer_s += r.timings.hammer_s;
    report.timing_totals.hammer_invocations += r.timings.hammer_invocations;
  }
  std::sort(report.per_theorem.begin(), report.per_theorem.end());
  return report;
}

struct BenchmarkOptions {
  int parallelism = 1;
  std::string results_path;  // JSONL, appended per theorem; enables resuming
};

// Runs every theorem through prove(). Workers each own a session; results
// are persisted as they arrive and aggregation is order-independent. Parse
// or per-theorem failures are recorded, never fatal.
inline BenchmarkReport run_benchmark(
    const std::vector<TheoremRecord>& dataset, const retrieval::Corpus& default_env,
    const ProveConfig& cfg, const std::function<ProveDeps()>& deps_factory,
    const BenchmarkOptions& options,
    const std::function<const retrieval::Corpus*(const TheoremRecord&)>& env_for = {}) {
  std::vector<std::optional<ProofResult>> slots(dataset.size());
  std::set<std::string> done;

  std::ofstream persist;
  if (!options.results_path.empty()) {
    std::ifstream existing(options.results_path);
    std::string line;
    while (std::getline(existing, line)) {
      if (text::trim(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        ProofResult r;
        r.theorem = j.at("theorem").get<std::string>();
        r.proved = j.at("proved").get<bool>();
        if (j.contains("final_script")) {
          r.final_script = script::make_script(j["final_script"].get<std::string>());
        }
        if (j.contains("failure_reason")) r.failure_reason = j["failure_reason"];
        if (j.contains("timings")) {
          r.timings.total_s = j["timings"].value("total_s", 0.0);
          r.timings.model_s = j["timings"].value("model_s", 0.0);
          r.timings.prover_s = j["timings"].value("prover_s", 0.0);
          r.timings.hammer_s = j["timings"].value("hammer_s", 0.0);
          r.timings.hammer_invocations = j["timings"].value("hammer_invocations", 0);
        }
        if (j.contains("events")) {
          for (const auto& je : j["events"]) {
            if (je.value("type", "") != "classify") continue;
            ProofEvent e{ProofEvent::Kind::Classify, je.value("sentence", "")};
            if (je.contains("category")) {
              e.category = errors::category_from_string(je["category"].get<std::string>());
            }
            r.events.push_back(e);
          }
        }
        for (std::size_t i = 0; i < dataset.size(); ++i) {
          if (dataset[i].name == r.theorem && !slots[i]) {
            done.insert(r.theorem);
            slots[i] = std::move(r);
            break;
          }
        }
      } catch (const std::exception&) {
        // A torn line from an interrupted run; recompute that theorem.
      }
    }
    persist.open(options.results_path, std::ios::app);
  }

  std::mutex persist_mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    ProveDeps deps = deps_factory();
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= dataset.size()) return;
      if (slots[i]) continue;  // resumed from a previous run
      const retrieval::Corpus* env = env_for ? env_for(dataset[i]) : &default_env;
      ProofResult r;
      try {
        r = prove(dataset[i], env ? *env : default_env, cfg, deps);
      } catch (const std::exception& e) {
        r.theorem = dataset[i].name;
        r.proved = false;
        r.failure_reason = std::string("unexpected error: ") + e.what();
      }
      if (persist.is_open()) {
        std::lock_guard<std::mutex> lock(persist_mu);
        persist << r.to_json().dump() << "\n";
        persist.flush();
      }
      slots[i] = std::move(r);
    }
  };

  const int n = std::max(1, options.parallelism);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<ProofResult> results;
  results.reserve(dataset.size());
  for (auto& slot : slots) {
    if (slot) results.push_back(std::move(*slot));
  }
  return aggregate_report(results);
}

inline void write_event_log(const ProofResult& result, std::ostream& out) {
  for (const auto& e : result.events) out << e.to_json().dump() << "\n";
}

}  // namespace palm::orchestrator
