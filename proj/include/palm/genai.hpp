#pragma once

// Prompt construction and model-reply handling. The instruction block and
// the two few-shot examples ship as a data file (the template is versioned
// and the version is stamped into reports). The model client is a contract
// with two implementations: a fixture-backed mock keyed by theorem name and
// a generic remote chat-completion client.

#include <chrono>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "palm/retrieval.hpp"
#include "palm/script.hpp"
#include "palm/text.hpp"

namespace palm::genai {

struct FewShotExample {
  std::string theorem;
  std::string proof;
};

struct PromptTemplate {
  std::string version = "unversioned";
  std::string instructions;
  std::vector<FewShotExample> examples;

  static PromptTemplate from_json(const nlohmann::json& doc) {
    PromptTemplate t;
    t.version = doc.value("version", "unversioned");
    t.instructions = doc.at("instructions").get<std::string>();
    for (const auto& je : doc.at("examples")) {
      t.examples.push_back({je.at("theorem").get<std::string>(), je.at("proof").get<std::string>()});
    }
    return t;
  }

  static PromptTemplate load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open prompt template: " + path);
    nlohmann::json doc;
    in >> doc;
    return from_json(doc);
  }
};

struct Prompt {
  std::string instructions;
  std::vector<FewShotExample> examples;
  std::vector<std::pair<std::string, std::string>> premises;  // name, statement
  std::string target;       // the theorem statement to prove
  std::string target_name;  // used for fixture keying and logging

  // Deterministic rendering: equal prompts yield byte-identical text.
  std::string render() const {
    std::string out = instructions;
    out += "\n";
    int i = 0;
    for (const auto& ex : examples) {
      ++i;
      out += "\nExample " + std::to_string(i) + ":\n";
      out += "Theorem: " + ex.theorem + "\n";
      out += "Proof:\n" + ex.proof + "\n";
    }
    out += "\nPremises you may use:\n";
    for (const auto& [name, statement] : premises) {
      out += name + ": " + statement + "\n";
    }
    out += "\nTheorem: " + target + "\n";
    out += "Proof:\n";
    return out;
  }
};

inline Prompt build_prompt(const std::string& target_name, const std::string& target_statement,
                           const std::vector<retrieval::RankedPremise>& premises,
                           const PromptTemplate& tpl) {
  Prompt p;
  p.instructions = tpl.instructions;
  p.examples = tpl.examples;
  std::set<std::string> seen;
  for (const auto& r : premises) {
    if (!seen.insert(r.doc.name).second) continue;  // each premise name exactly once
    p.premises.emplace_back(r.doc.name, r.doc.statement);
  }
  p.target = target_statement;
  p.target_name = target_name;
  return p;
}

struct NoProofFound : std::runtime_error {
  NoProofFound() : std::runtime_error("model reply contains no proof script") {}
};

struct ModelError : std::runtime_error {
  enum class Kind { Timeout, Remote, FixtureMissing };
  ModelError(Kind k, const std::string& what, int status_code = 0)
      : std::runtime_error(what), kind(k), status(status_code) {}
  Kind kind;
  int status;
};

struct ModelReply {
  std::string raw;
  std::optional<script::ProofScript> extracted;
};

namespace detail {

// Tactics an LLM reply plausibly opens a proof with; used only to reject
// plain prose when the reply carries no fence and no Proof./Qed. markers.
inline const std::set<std::string>& common_tactic_heads() {
  static const std::set<std::string> heads = {
      "intros",      "intro",      "apply",       "eapply",       "exact",      "auto",
      "eauto",       "simpl",      "cbn",         "cbv",          "unfold",     "fold",
      "rewrite",     "erewrite",   "induction",   "destruct",     "case",       "split",
      "left",        "right",      "exists",      "reflexivity",  "symmetry",   "transitivity",
      "assumption",  "constructor","econstructor","ring",         "field",      "lia",
      "nia",         "omega",      "congruence",  "firstorder",   "intuition",  "tauto",
      "trivial",     "discriminate","inversion",  "subst",        "clear",      "revert",
      "generalize",  "specialize", "pose",        "assert",       "remember",   "f_equal",
      "hammer",      "sauto",      "hauto",       "qauto",        "hfcrush",    "chfcrush",
      "qsimpl",      "scrush",     "sfirstorder", "repeat",       "try",        "now",
      "idtac"};
  return heads;
}

inline bool is_statement_head(const std::string& head) {
  static const std::set<std::string> heads = {"Theorem", "Lemma",       "Fact",    "Corollary",
                                              "Remark",  "Proposition", "Example", "Goal"};
  return heads.count(head) > 0;
}

inline std::optional<std::string> first_fenced_block(const std::string& raw) {
  const std::size_t open = raw.find("```");
  if (open == std::string::npos) return std::nullopt;
  std::size_t body = raw.find('\n', open + 3);
  if (body == std::string::npos) return std::nullopt;
  ++body;
  const std::size_t close = raw.find("```", body);
  if (close == std::string::npos) return std::nullopt;
  return raw.substr(body, close - body);
}

inline bool plausible_script(const std::vector<script::Sentence>& sentences) {
  using script::SentenceKind;
  for (const auto& s : sentences) {
    switch (s.kind) {
      case SentenceKind::ProofCmd:
      case SentenceKind::QedCmd:
      case SentenceKind::Bullet:
      case SentenceKind::BraceOpen:
      case SentenceKind::BraceClose:
        return true;
      case SentenceKind::AbortCmd:
        return true;
      case SentenceKind::Tactic: {
        const auto t = script::as_tactic(s);
        if (common_tactic_heads().count(t.head) > 0) return true;
        if (t.raw.find(';') != std::string::npos) return true;
        break;
      }
    }
  }
  return false;
}

}  // namespace detail

// Pulls a proof script out of a raw model reply: the first fenced code block
// if there is one, else the text from the first "Proof." on, else the whole
// reply when it plausibly is a bare script. The result starts at Proof. (or
// the first tactic) and stops after the first Qed.
inline script::ProofScript extract_proof(const std::string& raw) {
  std::string candidate;
  bool bare = false;
  if (auto fenced = detail::first_fenced_block(raw)) {
    candidate = *fenced;
  } else if (const std::size_t at = raw.find("Proof."); at != std::string::npos) {
    candidate = raw.substr(at);
  } else {
    candidate = raw;
    bare = true;
  }

  std::vector<script::Sentence> sentences;
  try {
    sentences = script::split_sentences(candidate);
  } catch (const script::ParseError&) {
    throw NoProofFound();
  }

  // Start at the first Proof. when present; otherwise skip a restated
  // theorem header.
  std::size_t begin = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].kind == script::SentenceKind::ProofCmd) {
      begin = i;
      break;
    }
  }
  if (begin == 0 && !sentences.empty() && sentences[0].kind == script::SentenceKind::Tactic) {
    const auto t = script::as_tactic(sentences[0]);
    if (detail::is_statement_head(t.head)) begin = 1;
  }
  std::size_t end = sentences.size();
  for (std::size_t i = begin; i < sentences.size(); ++i) {
    if (sentences[i].kind == script::SentenceKind::QedCmd) {
      end = i + 1;
      break;
    }
  }
  sentences.assign(sentences.begin() + static_cast<std::ptrdiff_t>(begin),
                   sentences.begin() + static_cast<std::ptrdiff_t>(end));

  if (sentences.empty()) throw NoProofFound();
  if (bare && !detail::plausible_script(sentences)) throw NoProofFound();

  script::ProofScript out;
  out.sentences = std::move(sentences);
  out.source = script::render(out.sentences);
  return out;
}

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string name() const = 0;
  // One completion round-trip; exactly one sample per call.
  virtual std::string complete(const Prompt& prompt, std::optional<double> temperature,
                               int max_tokens) = 0;
};

// Runs one query and extracts the script; extraction failure leaves
// `extracted` empty rather than throwing.
inline ModelReply query_model(ModelClient& client, const Prompt& prompt,
                              std::optional<double> temperature, int max_tokens) {
  ModelReply reply;
  reply.raw = client.complete(prompt, temperature, max_tokens);
  try {
    reply.extracted = extract_proof(reply.raw);
  } catch (const NoProofFound&) {
    reply.extracted = std::nullopt;
  }
  return reply;
}

// Fixture-backed client: replies keyed by target theorem name.
class MockModelClient final : public ModelClient {
 public:
  MockModelClient() = default;

  explicit MockModelClient(const std::string& fixture_path) {
    std::ifstream in(fixture_path);
    if (!in) throw std::runtime_error("cannot open model fixture: " + fixture_path);
    nlohmann::json doc;
    in >> doc;
    for (const auto& [name, reply] : doc.items()) {
      replies_[name] = reply.get<std::string>();
    }
  }

  void add(const std::string& theorem, const std::string& reply) { replies_[theorem] = reply; }

  std::string name() const override { return "mock"; }

  std::string complete(const Prompt& prompt, std::optional<double>, int) override {
    const auto it = replies_.find(prompt.target_name);
    if (it == replies_.end()) {
      throw ModelError(ModelError::Kind::FixtureMissing,
                       "no fixture reply for theorem: " + prompt.target_name);
    }
    return it->second;
  }

 private:
  std::map<std::string, std::string> replies_;
};

struct RemoteConfig {
  std::string base_url;    // e.g. http://localhost:8080
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;
  int max_inflight = 4;
  int retries = 2;                                  // retries after the first attempt
  std::chrono::milliseconds backoff{250};           // doubled per retry
  std::chrono::seconds timeout{120};

  // PALM_API_BASE, PALM_API_KEY and PALM_MODEL select the endpoint.
  static RemoteConfig from_env() {
    RemoteConfig cfg;
    if (const char* v = std::getenv("PALM_API_BASE")) cfg.base_url = v;
    if (const char* v = std::getenv("PALM_API_KEY")) cfg.api_key = v;
    if (const char* v = std::getenv("PALM_MODEL")) cfg.model = v;
    return cfg;
  }
};

}  // namespace palm::genai
