// Acceptance harness: runs the eight release criteria and prints one
// pass/fail line per criterion. Exit code 0 only when every non-skipped
// criterion holds.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "palm/backtrack.hpp"
#include "palm/coqtop.hpp"
#include "palm/errors.hpp"
#include "palm/genai.hpp"
#include "palm/mock_prover.hpp"
#include "palm/orchestrator.hpp"
#include "palm/repair.hpp"
#include "palm/retrieval.hpp"
#include "palm/script.hpp"
#include "retrieval_oracle.hpp"

using namespace palm;

namespace {

const std::string kData = PALM_SOURCE_DATA_DIR;

struct Harness {
  int failed = 0;
  int index = 0;

  void run(const std::string& name, const std::function<void()>& body) {
    ++index;
    try {
      body();
      std::printf("PASS  criterion %d: %s\n", index, name.c_str());
    } catch (const std::exception& e) {
      ++failed;
      std::printf("FAIL  criterion %d: %s\n      %s\n", index, name.c_str(), e.what());
    }
  }

  void skip(const std::string& name, const std::string& why) {
    ++index;
    std::printf("SKIP  criterion %d: %s (%s)\n", index, name.c_str(), why.c_str());
  }
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

template <typename T>
void expect_eq(const T& got, const T& want, const std::string& what) {
  if (!(got == want)) {
    std::ostringstream msg;
    msg << what << ": got " << got << ", want " << want;
    throw std::runtime_error(msg.str());
  }
}

void expect_eq(const std::vector<std::string>& got, const std::vector<std::string>& want,
               const std::string& what) {
  if (got == want) return;
  std::ostringstream msg;
  msg << what << ": got " << got.size() << " items [";
  for (const auto& g : got) msg << g << " | ";
  msg << "], want " << want.size();
  throw std::runtime_error(msg.str());
}

std::vector<std::string> raws(const std::vector<script::Sentence>& ss) {
  std::vector<std::string> out;
  for (const auto& s : ss) out.push_back(s.raw);
  return out;
}

script::Sentence sent(const std::string& raw) { return script::split_sentences(raw).at(0); }

prover::MockBackend& mock_backend() {
  static prover::MockBackend b{std::filesystem::path(kData) / "fixtures"};
  return b;
}

genai::MockModelClient& mock_model() {
  static genai::MockModelClient m{kData + "/model_replies.json"};
  return m;
}

const genai::PromptTemplate& prompt_template() {
  static genai::PromptTemplate t = genai::PromptTemplate::load(kData + "/prompt_template.json");
  return t;
}

const errors::RuleTable& rules() {
  static errors::RuleTable t = errors::RuleTable::load(kData + "/error_rules.json");
  return t;
}

const retrieval::Corpus& corpus() {
  static retrieval::Corpus c =
      retrieval::build_index(retrieval::load_premises(kData + "/premises_core.jsonl"));
  return c;
}

orchestrator::ProveDeps deps() {
  return {mock_backend(), mock_model(), prompt_template(), rules()};
}

// --------------------------------------------------------------------------

void criterion_splitter() {
  const auto start = std::chrono::steady_clock::now();

  const std::string fig1_body =
      "Proof.\n intros n m.\n induction n.\n -\n auto.\n -\n simpl.\n rewrite IHn.\n"
      " apply plus_n_Sm.\nQed.";
  const auto fig1 = script::split_sentences(fig1_body);
  expect_eq(fig1.size(), std::size_t{10}, "first example proof body sentence count");
  expect_eq(raws(fig1),
            std::vector<std::string>{"Proof.", "intros n m.", "induction n.", "-", "auto.", "-",
                                     "simpl.", "rewrite IHn.", "apply plus_n_Sm.", "Qed."},
            "first example proof body sentences");

  const std::string fig6_body =
      "Proof.\n intros. destruct a.\n - reflexivity.\n - induction p.\n"
      "   + simpl. ring.\n   + apply Z_le_dec.\n   + apply Z.le_refl.\n"
      " - apply Z.eq_le_incl.\nQed.";
  const auto fig6 = script::split_sentences(fig6_body);
  expect_eq(raws(fig6),
            std::vector<std::string>{"Proof.", "intros.", "destruct a.", "-", "reflexivity.", "-",
                                     "induction p.", "+", "simpl.", "ring.", "+",
                                     "apply Z_le_dec.", "+", "apply Z.le_refl.", "-",
                                     "apply Z.eq_le_incl.", "Qed."},
            "second example proof body sentences");
  expect_eq(fig6.size(), std::size_t{17}, "second example proof body sentence count");

  // 200 random decorations: comments and string literals never move a
  // sentence boundary, and splitting is a fixpoint of rendering.
  std::mt19937 rng(20240817);
  const std::vector<std::string> pool = {
      "intros n m.", "induction n.", "-", "auto.", "+", "simpl.", "rewrite IHn.",
      "apply Z.le_refl.", "{", "}", "idtac \"a. b\".", "exists 0.", "Proof.", "Qed."};
  const std::vector<std::string> comments = {"(* c *)", "(* a. b *)", "(* (* nested *) tail *)"};
  for (int iter = 0; iter < 200; ++iter) {
    std::uniform_int_distribution<std::size_t> len(0, 12);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<std::size_t> cpick(0, comments.size() - 1);
    std::uniform_int_distribution<int> coin(0, 3);
    std::string src;
    const std::size_t k = len(rng);
    for (std::size_t j = 0; j < k; ++j) {
      if (coin(rng) == 0) src += comments[cpick(rng)] + " ";
      src += pool[pick(rng)];
      src += coin(rng) == 0 ? "\n" : " ";
    }
    const auto once = script::split_sentences(src);
    const auto again = script::split_sentences(script::render(once));
    expect(script::same_sentences(once, again), "split/render round trip");
    for (const auto& s : once) {
      expect(s.raw.find("(*") == std::string::npos, "comment leaked into a sentence");
    }
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect(elapsed < 1.0, "splitter suite exceeded one second");
}

void criterion_classifier() {
  auto classify = [&](const std::string& msg, const std::string& tactic) {
    const auto ss = script::split_sentences(tactic);
    return rules().classify(msg, script::as_tactic(ss.at(0)));
  };
  using errors::ErrorCategory;
  struct Case {
    std::string msg, tactic;
    ErrorCategory want;
  };
  const std::vector<Case> cases = {
      {"Unable to unify \"m=n\" with \"n=m\".", "apply H.",
       ErrorCategory::WrongTheoremApplication},
      {"Found no subterm matching \"b\" in the current goal.", "rewrite H2.",
       ErrorCategory::IncorrectRewrite},
      {"The reference in_remove_all was not found in the current environment.",
       "apply in_remove_all.", ErrorCategory::InvalidReference},
      {"Wrong bullet +: Expecting -.", "+", ErrorCategory::BulletMisuse},
      {"Wrong bullet -: Current bullet - is not finished.", "-", ErrorCategory::BulletMisuse},
      {"Not an inductive product.", "destruct f.", ErrorCategory::TacticMisuse},
      {"Cannot turn inductive into an evaluable reference.", "unfold nat.",
       ErrorCategory::TacticMisuse},
      {"H is already used.", "intros H.", ErrorCategory::RedundantIntroduction},
  };
  for (const auto& c : cases) {
    const auto facts = classify(c.msg, c.tactic);
    expect_eq(errors::to_string(facts.category), errors::to_string(c.want),
              "classification of: " + c.msg);
  }
  // capture slots
  expect_eq(*classify(cases[0].msg, cases[0].tactic).misused_theorem, std::string("H"),
            "misused theorem capture");
  expect_eq(*classify(cases[2].msg, cases[2].tactic).bad_reference,
            std::string("in_remove_all"), "bad reference capture");
  expect_eq(*classify(cases[3].msg, cases[3].tactic).expected_bullet, std::string("-"),
            "expected bullet capture");
  expect(classify(cases[4].msg, cases[4].tactic).unfinished_bullet, "unfinished bullet flag");

  std::ifstream in(kData + "/fixtures/error_study.jsonl");
  expect(in.good(), "error study fixture present");
  std::vector<errors::ErrorFacts> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    events.push_back(classify(j.at("error").get<std::string>(), j.at("tactic").get<std::string>()));
  }
  expect_eq(events.size(), std::size_t{520}, "study fixture size");
  const auto hist = errors::category_histogram(events);
  const std::vector<std::pair<errors::ErrorCategory, int>> want = {
      {errors::ErrorCategory::WrongTheoremApplication, 258},
      {errors::ErrorCategory::InvalidReference, 79},
      {errors::ErrorCategory::IncorrectRewrite, 61},
      {errors::ErrorCategory::RedundantIntroduction, 56},
      {errors::ErrorCategory::TacticMisuse, 44},
      {errors::ErrorCategory::BulletMisuse, 19},
      {errors::ErrorCategory::Miscellaneous, 3},
      {errors::ErrorCategory::Unknown, 0},
  };
  for (const auto& [cat, n] : want) {
    expect_eq(hist.at(cat), n, "histogram count for " + errors::to_string(cat));
  }
}

void criterion_retrieval_oracles() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(1207);
  const std::vector<std::string> vocab = {"forall", "nat",  "list", "app",  "length", "rev",
                                          "map",    "plus", "mult", "zero", "succ",   "comm",
                                          "assoc",  "nil",  "cons", "le"};
  auto random_statement = [&] {
    std::uniform_int_distribution<std::size_t> len(1, 12);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string s;
    const std::size_t k = len(rng);
    for (std::size_t i = 0; i < k; ++i) s += vocab[pick(rng)] + " ";
    return s;
  };

  int queries = 0;
  for (int corpus_iter = 0; corpus_iter < 50; ++corpus_iter) {
    std::uniform_int_distribution<std::size_t> ndocs(1, 50);
    const std::size_t n = ndocs(rng);
    std::vector<retrieval::PremiseDoc> docs;
    std::vector<std::vector<std::string>> oracle_docs;
    for (std::size_t i = 0; i < n; ++i) {
      retrieval::PremiseDoc d;
      d.name = "prem_" + std::to_string(i);
      d.statement = random_statement();
      oracle_docs.push_back(oracle::tokenize(d.statement));
      docs.push_back(std::move(d));
    }
    const auto index = retrieval::build_index(docs);
    for (int q = 0; q < 20; ++q) {
      ++queries;
      const std::string query = random_statement();
      const auto qtoks = oracle::tokenize(query);

      const auto got = retrieval::knn_premises(index, query, n);
      std::vector<std::pair<double, std::string>> want;
      for (std::size_t i = 0; i < n; ++i) {
        want.emplace_back(oracle::cosine(qtoks, oracle_docs[i], oracle_docs), docs[i].name);
      }
      std::stable_sort(want.begin(), want.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      expect_eq(got.size(), want.size(), "knn result size");
      for (std::size_t i = 0; i < got.size(); ++i) {
        expect(got[i].doc.name == want[i].second, "knn order matches the cosine oracle");
        expect(std::fabs(got[i].knn_score - want[i].first) <= 1e-9, "knn score delta <= 1e-9");
      }

      auto reranked = retrieval::bm25_rerank(got, query);
      std::vector<std::tuple<double, double, std::string>> bwant;
      for (std::size_t i = 0; i < got.size(); ++i) {
        bwant.emplace_back(oracle::bm25(oracle::tokenize(got[i].doc.statement), qtoks,
                                        [&] {
                                          std::vector<std::vector<std::string>> cand;
                                          for (const auto& c : got)
                                            cand.push_back(oracle::tokenize(c.doc.statement));
                                          return cand;
                                        }()),
                           got[i].knn_score, got[i].doc.name);
      }
      std::stable_sort(bwant.begin(), bwant.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
      });
      for (std::size_t i = 0; i < reranked.size(); ++i) {
        expect(reranked[i].doc.name == std::get<2>(bwant[i]),
               "bm25 order matches the formula oracle");
        expect(std::fabs(reranked[i].bm25_score - std::get<0>(bwant[i])) <= 1e-9,
               "bm25 score delta <= 1e-9");
      }
    }
  }
  expect_eq(queries, 1000, "query count");
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect(elapsed < 10.0, "retrieval oracle suite exceeded ten seconds");
}

void criterion_repair() {
  // Reference replacement.
  {
    auto s = mock_backend().start_session(
        "Lemma in_remove_all_case : forall x y l, In x (remove_all y l) -> In x l.", nullptr);
    s->execute(sent("Proof."));
    s->execute(sent("intros."));
    const auto r = s->execute(sent("apply in_remove_all."));
    expect(!r.ok(), "apply in_remove_all fails");
    const auto facts = rules().classify(r.error, script::as_tactic(sent("apply in_remove_all.")));
    repair::Context ctx;
    ctx.premise_names = {"map_insert", "in_remove_all_preserve"};
    const auto outcome =
        repair::repair(facts, script::as_tactic(sent("apply in_remove_all.")), s->state(), *s, ctx);
    expect(outcome.status == repair::Status::Repaired, "reference replacement repaired");
    expect_eq(outcome.replacement.at(0).raw, std::string("apply in_remove_all_preserve."),
              "reference replacement result");
  }
  // Renaming.
  {
    auto s = mock_backend().start_session(
        "Lemma rename_case : forall P Q : Prop, P -> (P -> Q) -> (Q -> Q) -> Q.", nullptr);
    s->execute(sent("Proof."));
    s->execute(sent("intros P Q H."));
    const auto r = s->execute(sent("intros H."));
    expect(!r.ok(), "clashing intros fails");
    const auto facts = rules().classify(r.error, script::as_tactic(sent("intros H.")));
    const auto outcome =
        repair::repair(facts, script::as_tactic(sent("intros H.")), s->state(), *s, {});
    expect(outcome.status == repair::Status::Repaired, "renaming repaired");
    expect_eq(outcome.replacement.at(0).raw, std::string("intros H'."), "renaming result");
  }
  // Bullet transformation.
  {
    auto s = mock_backend().start_session(
        "Lemma bullet_case : forall b : bool, b = true \\/ b = false.", nullptr);
    s->execute(sent("Proof."));
    s->execute(sent("destruct b."));
    s->execute(sent("-"));
    s->execute(sent("auto."));
    const auto r = s->execute(sent("+"));
    expect(!r.ok(), "wrong bullet fails");
    const auto facts = rules().classify(r.error, script::as_tactic(sent("+")));
    const auto outcome = repair::repair(facts, script::as_tactic(sent("+")), s->state(), *s, {});
    expect(outcome.status == repair::Status::Repaired, "bullet swap repaired");
    expect_eq(outcome.replacement.at(0).raw, std::string("-"), "bullet swap result");
  }
  // Premise augmentation.
  {
    auto s = mock_backend().start_session(
        "Lemma augment_case : forall a : Z, 0 < a -> a <= a * a.", nullptr);
    s->execute(sent("Proof."));
    s->execute(sent("intros a Ha."));
    const auto r = s->execute(sent("apply Zlt_le_succ."));
    expect(!r.ok(), "misapplied theorem fails");
    const auto facts = rules().classify(r.error, script::as_tactic(sent("apply Zlt_le_succ.")));
    const auto outcome =
        repair::repair(facts, script::as_tactic(sent("apply Zlt_le_succ.")), s->state(), *s, {});
    expect(outcome.status == repair::Status::Repaired, "premise augmentation repaired");
    expect_eq(outcome.replacement.at(0).raw, std::string("qsimpl use: Zlt_le_succ."),
              "premise augmentation result");
  }
  // Atomicity on NotRepaired paths.
  {
    auto s = mock_backend().start_session(
        "Lemma augment_case : forall a : Z, 0 < a -> a <= a * a.", nullptr);
    s->execute(sent("Proof."));
    s->execute(sent("intros a Ha."));
    const auto key = s->state_key();
    const int depth = s->depth();
    expect(repair::augment_premise("stubborn_lemma", *s, std::chrono::seconds(10)).status ==
               repair::Status::NotRepaired,
           "declared hammer failure folds to NotRepaired");
    expect(repair::augment_premise("lazy_lemma", *s, std::chrono::seconds(10)).status ==
               repair::Status::NotRepaired,
           "no-op simplification folds to NotRepaired");
    const auto failing = script::as_tactic(sent("apply in_remove_all."));
    expect(repair::replace_reference(failing, "in_remove_all", {"nonexistent_a", "nonexistent_b"},
                                     *s, 10)
                   .status == repair::Status::NotRepaired,
           "failed replacement folds to NotRepaired");
    errors::ErrorFacts facts;
    facts.category = errors::ErrorCategory::BulletMisuse;
    facts.unfinished_bullet = true;
    expect(repair::transform_bullet(facts, *s).status == repair::Status::NotRepaired,
           "unfinished bullet folds to NotRepaired");
    expect_eq(s->state_key(), key, "session state untouched after failed repairs");
    expect_eq(s->depth(), depth, "session depth untouched after failed repairs");
  }
}

void criterion_backtracking() {
  auto s = mock_backend().start_session("Lemma sqr_le: forall a: Z, a <= a * a.", nullptr);
  backtrack::ExecutionTrace trace;
  const std::vector<std::string> prefix = {"Proof.", "intros.", "destruct a.", "-",
                                           "reflexivity.", "-", "induction p.", "+", "simpl."};
  for (const std::string& raw : prefix) {
    const auto before = s->state();
    const auto r = s->execute(sent(raw));
    expect(r.ok(), "prefix executes: " + raw);
    trace.record(sent(raw), before.goals.size(), r.state->goals.size(), before.depth);
  }
  expect(!s->execute(sent("ring.")).ok(), "ring fails");

  std::vector<backtrack::Event> events;
  const auto proof =
      backtrack::run(*s, trace, {}, [&](const backtrack::Event& e) { events.push_back(e); });
  expect(proof.has_value(), "backtracking found a hammer proof");
  expect_eq(proof->at(0).raw,
            std::string("chfcrush use: Zlt_le_succ, Pos2Z.is_pos, Z.le_mul_diag_r."),
            "hammer proof sentence");

  using K = backtrack::Event::Kind;
  const std::vector<K> kinds = {K::Hammer, K::Undo, K::Hammer, K::BulletHit, K::Discard,
                                K::Hammer};
  expect_eq(events.size(), kinds.size(), "walkthrough event count");
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    expect(events[i].kind == kinds[i], "walkthrough event " + std::to_string(i));
  }
  expect(!events[0].ok, "hammer fails at the simpl result");
  expect_eq(events[1].detail, std::string("simpl."), "undo of simpl");
  expect(!events[2].ok, "hammer fails after the undo");
  expect_eq(events[3].detail, std::string("+"), "bullet hit");
  expect_eq(events[4].detail, std::string("induction p."), "discarded root");
  expect(events[5].ok, "hammer solves the second destruct subgoal");

  // The complete pipeline lands on the expected correct script.
  orchestrator::TheoremRecord rec;
  rec.name = "sqr_le";
  rec.statement = "Lemma sqr_le: forall a: Z, a <= a * a.";
  const auto result = orchestrator::prove(rec, corpus(), {}, deps());
  expect(result.proved, "pipeline proves the square bound");
  const std::string fig7 =
      "Proof. intros. destruct a. - reflexivity. - "
      "chfcrush use: Zlt_le_succ, Pos2Z.is_pos, Z.le_mul_diag_r. - hfcrush. Qed.";
  expect(text::split_ws(script::render(*result.final_script)) == text::split_ws(fig7),
         "final script token-equals the expected correct proof");
}

void criterion_end_to_end() {
  orchestrator::TheoremRecord add_comm;
  add_comm.name = "add_comm";
  add_comm.statement = "Theorem add_comm : forall n m : nat, n + m = m + n.";
  const auto r1 = orchestrator::prove(add_comm, corpus(), {}, deps());
  expect(r1.proved, "commutativity proved");
  expect_eq(r1.model_queries(), 1, "one model call for the clean proof");
  int repairs = 0;
  for (const auto& e : r1.events) {
    repairs += e.kind == orchestrator::ProofEvent::Kind::Repair ? 1 : 0;
  }
  expect_eq(repairs, 0, "no repair events in the clean proof");
  expect(orchestrator::replay_succeeds(*r1.final_script, mock_backend(), add_comm.statement),
         "replay of the clean proof completes");

  orchestrator::TheoremRecord sqr;
  sqr.name = "sqr_le";
  sqr.statement = "Lemma sqr_le: forall a: Z, a <= a * a.";
  const auto r2 = orchestrator::prove(sqr, corpus(), {}, deps());
  expect(r2.proved, "square bound proved");
  expect_eq(r2.model_queries(), 1, "one model call despite repair and backtracking");
  expect(orchestrator::replay_succeeds(*r2.final_script, mock_backend(), sqr.statement),
         "replay of the repaired proof completes");
}

void criterion_report_format() {
  expect_eq(orchestrator::format_count_rate(4377, 10842), std::string("4377 (40.4%)"),
            "large cell");
  expect_eq(orchestrator::format_count_rate(2, 3), std::string("2 (66.7%)"), "small cell");
  expect_eq(orchestrator::format_count_rate(0, 0), std::string("0 (0.0%)"), "empty cell");
}

void criterion_live_coqtop() {
  prover::CoqtopBackend backend(prover::CoqtopConfig::from_env());
  auto session =
      backend.start_session("Theorem add_comm_live : forall n m : nat, n + m = m + n.", nullptr);
  const std::vector<std::string> proof = {"Proof.",       "intros n m.",     "induction n.",
                                          "-",            "auto.",           "-",
                                          "simpl.",       "rewrite IHn.",    "apply plus_n_Sm."};
  for (const auto& raw : proof) {
    const auto before = session->state();
    auto r = session->execute(sent(raw));
    expect(r.ok(), "live step: " + raw + " (" + r.error + ")");
    const auto undone = session->undo();
    expect(undone.same_goals(before), "undo restores goal texts after " + raw);
    expect(session->execute(sent(raw)).ok(), "re-execution after undo: " + raw);
  }
  expect(session->is_complete(), "live session complete before Qed");
  expect(session->execute(sent("Qed.")).ok(), "live Qed accepted");
}

}  // namespace

int main() {
  Harness h;
  h.run("splitter segments the worked proofs and round-trips under decoration",
        criterion_splitter);
  h.run("classifier reproduces the error-study categories and counts", criterion_classifier);
  h.run("retrieval matches brute-force oracles on 1000 randomized queries",
        criterion_retrieval_oracles);
  h.run("the four repair mechanisms fix their worked examples atomically", criterion_repair);
  h.run("backtracking replays the worked walkthrough event for event", criterion_backtracking);
  h.run("the pipeline proves both bundled theorems end to end", criterion_end_to_end);
  h.run("report cells render count and one-decimal percentage", criterion_report_format);
  if (std::getenv("PALM_COQTOP") != nullptr) {
    h.run("subprocess adapter replays the proof against a live toplevel", criterion_live_coqtop);
  } else {
    h.skip("subprocess adapter replays the proof against a live toplevel",
           "PALM_COQTOP not configured");
  }
  if (h.failed > 0) {
    std::printf("%d criterion(s) failed\n", h.failed);
    return 1;
  }
  std::printf("all acceptance criteria hold\n");
  return 0;
}
