// Command-line front end: prove a single theorem, run a benchmark over a
// dataset, classify an error log, or query the premise retriever.
//
// Exit codes: 0 success, 1 proof failure, 2 configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "palm/coqtop.hpp"
#include "palm/mock_prover.hpp"
#include "palm/orchestrator.hpp"
#include "palm/remote_model.hpp"

namespace {

namespace fs = std::filesystem;
using namespace palm;

std::string default_data_dir() {
  if (const char* v = std::getenv("PALM_DATA_DIR")) return v;
  return PALM_SOURCE_DATA_DIR;
}

struct CommonPaths {
  std::string data_dir = default_data_dir();
  std::string corpus_path;
  std::string rules_path;
  std::string template_path;
  std::string fixtures_dir;
  std::string model_fixture_path;

  void resolve() {
    if (corpus_path.empty()) corpus_path = data_dir + "/premises_core.jsonl";
    if (rules_path.empty()) rules_path = data_dir + "/error_rules.json";
    if (template_path.empty()) template_path = data_dir + "/prompt_template.json";
    if (fixtures_dir.empty()) fixtures_dir = data_dir + "/fixtures";
    if (model_fixture_path.empty()) model_fixture_path = data_dir + "/model_replies.json";
  }
};

struct Stack {
  std::unique_ptr<prover::Backend> backend;
  std::unique_ptr<genai::ModelClient> model;
  genai::PromptTemplate prompt_template;
  errors::RuleTable rules;
  retrieval::Corpus corpus;
};

Stack make_stack(const CommonPaths& paths, const std::string& backend_kind,
                 const std::string& model_kind) {
  Stack s;
  if (backend_kind == "mock") {
    s.backend = std::make_unique<prover::MockBackend>(fs::path(paths.fixtures_dir));
  } else if (backend_kind == "subprocess") {
    s.backend = std::make_unique<prover::CoqtopBackend>(prover::CoqtopConfig::from_env());
  } else {
    throw CLI::ValidationError("--backend must be mock or subprocess");
  }
  if (model_kind == "mock") {
    s.model = std::make_unique<genai::MockModelClient>(paths.model_fixture_path);
  } else if (model_kind == "remote") {
    s.model = std::make_unique<genai::RemoteModelClient>(genai::RemoteConfig::from_env());
  } else {
    throw CLI::ValidationError("--model must be mock or remote");
  }
  s.prompt_template = genai::PromptTemplate::load(paths.template_path);
  s.rules = errors::RuleTable::load(paths.rules_path);
  s.corpus = retrieval::build_index(retrieval::load_premises(paths.corpus_path));
  return s;
}

orchestrator::TheoremRecord find_theorem(const std::string& dataset_path,
                                         const std::string& name) {
  for (const auto& r : orchestrator::load_dataset(dataset_path)) {
    if (r.name == name) return r;
  }
  throw std::runtime_error("theorem '" + name + "' not found in " + dataset_path);
}

int cmd_prove(const CommonPaths& paths, const std::string& backend_kind,
              const std::string& model_kind, const std::string& dataset_path,
              const std::string& theorem, const std::string& statement,
              const orchestrator::ProveConfig& cfg, const std::string& events_path) {
  Stack stack = make_stack(paths, backend_kind, model_kind);
  orchestrator::TheoremRecord rec;
  if (!statement.empty()) {
    rec.name = theorem.empty() ? prover::statement_name(statement).value_or("goal") : theorem;
    rec.statement = statement;
  } else {
    rec = find_theorem(dataset_path, theorem);
  }
  auto result = orchestrator::prove(
      rec, stack.corpus, cfg, {*stack.backend, *stack.model, stack.prompt_template, stack.rules});
  if (!events_path.empty()) {
    std::ofstream out(events_path);
    orchestrator::write_event_log(result, out);
  }
  if (result.proved && result.final_script) {
    std::cout << script::render(*result.final_script) << "\n";
    return 0;
  }
  std::cerr << "failed: " << result.failure_reason << "\n";
  return 1;
}

int cmd_bench(const CommonPaths& paths, const std::string& backend_kind,
              const std::string& model_kind, const std::string& dataset_path, int jobs,
              const orchestrator::ProveConfig& cfg, const std::string& results_path,
              const std::string& report_path) {
  Stack stack = make_stack(paths, backend_kind, model_kind);
  auto dataset = orchestrator::load_dataset(dataset_path);
  orchestrator::BenchmarkOptions options;
  options.parallelism = jobs;
  options.results_path = results_path;
  auto report = orchestrator::run_benchmark(
      dataset, stack.corpus, cfg,
      [&]() -> orchestrator::ProveDeps {
        return {*stack.backend, *stack.model, stack.prompt_template, stack.rules};
      },
      options);
  std::cout << report.to_text();
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << report.to_json().dump(2) << "\n";
  }
  return 0;
}

int cmd_classify(const CommonPaths& paths, const std::string& log_path) {
  errors::RuleTable rules = errors::RuleTable::load(paths.rules_path);
  std::ifstream in(log_path);
  if (!in) throw std::runtime_error("cannot open error log: " + log_path);
  std::vector<errors::ErrorFacts> events;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto sentences = script::split_sentences(j.at("tactic").get<std::string>());
    script::Tactic failing;
    if (!sentences.empty()) failing = script::as_tactic(sentences[0]);
    events.push_back(rules.classify(j.at("error").get<std::string>(), failing));
  }
  std::cout << errors::render_histogram(errors::category_histogram(events));
  return 0;
}

int cmd_retrieve(const CommonPaths& paths, const std::string& statement, int k) {
  auto corpus = retrieval::build_index(retrieval::load_premises(paths.corpus_path));
  auto ranked = retrieval::bm25_rerank(
      retrieval::knn_premises(corpus, statement, static_cast<std::size_t>(k)), statement);
  for (const auto& r : ranked) {
    std::printf("%-28s knn=%.4f bm25=%.4f\n", r.doc.name.c_str(), r.knn_score, r.bm25_score);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"palm: generate-then-repair proof automation"};
  app.require_subcommand(1);

  CommonPaths paths;
  app.add_option("--data-dir", paths.data_dir, "Data directory with bundled fixtures");
  app.add_option("--corpus", paths.corpus_path, "Premise corpus (JSON lines)");
  app.add_option("--rules", paths.rules_path, "Error classification rule table");
  app.add_option("--prompt-template", paths.template_path, "Prompt template JSON");
  app.add_option("--fixtures", paths.fixtures_dir, "Transcript fixture directory");
  app.add_option("--model-fixture", paths.model_fixture_path, "Mock model replies JSON");

  std::string backend_kind = "mock";
  std::string model_kind = "mock";
  orchestrator::ProveConfig cfg;
  int hammer_timeout_s = 10;
  int theorem_budget_s = 600;
  double temperature = -1.0;

  auto add_pipeline_flags = [&](CLI::App* cmd) {
    cmd->add_option("--backend", backend_kind, "Prover backend: mock | subprocess");
    cmd->add_option("--model", model_kind, "Model client: mock | remote");
    cmd->add_option("--k", cfg.retrieval_k, "KNN candidate count");
    cmd->add_option("--prompt-budget", cfg.prompt_budget, "Premises included in the prompt");
    cmd->add_option("--hammer-timeout", hammer_timeout_s, "Hammer timeout, seconds");
    cmd->add_option("--replacement-bound", cfg.replacement_bound,
                    "Reference replacement attempts");
    cmd->add_option("--budget", theorem_budget_s, "Per-theorem time budget, seconds");
    cmd->add_option("--temperature", temperature, "Sampling temperature (provider default if unset)");
    cmd->add_option("--max-tokens", cfg.max_tokens, "Completion token cap");
    cmd->add_flag("--knn-by-proof-usage", cfg.knn_by_proof_usage,
                  "Retrieve premises used by proofs of similar theorems");
    cmd->add_flag("--hammer-hints", cfg.hammer_use_retrieved_hints,
                  "Pass retrieved premises to hammer candidates");
  };

  // prove
  auto* prove = app.add_subcommand("prove", "Prove one theorem");
  std::string dataset_path = default_data_dir() + "/dataset.json";
  std::string theorem, statement, events_path;
  prove->add_option("--dataset", dataset_path, "Dataset with theorem records");
  prove->add_option("--theorem", theorem, "Theorem name in the dataset");
  prove->add_option("--statement", statement, "Theorem statement given directly");
  prove->add_option("--events", events_path, "Write the event log (JSON lines) here");
  add_pipeline_flags(prove);

  // bench
  auto* bench = app.add_subcommand("bench", "Run a dataset benchmark");
  int jobs = 1;
  std::string results_path, report_path;
  bench->add_option("--dataset", dataset_path, "Dataset with theorem records")->required();
  bench->add_option("--jobs", jobs, "Worker count");
  bench->add_option("--results", results_path, "Per-theorem results file (JSONL, resumable)");
  bench->add_option("--report", report_path, "Write the aggregate report JSON here");
  add_pipeline_flags(bench);

  // classify
  auto* classify = app.add_subcommand("classify", "Histogram an error log");
  std::string log_path;
  classify->add_option("--log", log_path, "JSON-lines file of {error, tactic} records")
      ->required();

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "Rank premises for a statement");
  std::string query_statement;
  int k = 10;
  retrieve->add_option("--statement", query_statement, "Theorem statement")->required();
  retrieve->add_option("--k", k, "Results to show");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  cfg.hammer_timeout = std::chrono::seconds(hammer_timeout_s);
  cfg.theorem_budget = std::chrono::seconds(theorem_budget_s);
  if (temperature >= 0.0) cfg.temperature = temperature;
  paths.resolve();

  try {
    if (prove->parsed()) {
      if (theorem.empty() && statement.empty()) {
        std::cerr << "prove: pass --theorem or --statement\n";
        return 2;
      }
      return cmd_prove(paths, backend_kind, model_kind, dataset_path, theorem, statement, cfg,
                       events_path);
    }
    if (bench->parsed()) {
      return cmd_bench(paths, backend_kind, model_kind, dataset_path, jobs, cfg, results_path,
                       report_path);
    }
    if (classify->parsed()) return cmd_classify(paths, log_path);
    if (retrieve->parsed()) return cmd_retrieve(paths, query_statement, k);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
