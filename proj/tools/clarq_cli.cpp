// Command-line front end. Talks to the library only through clarq.h.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "clarq/clarq.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitInternal = 3;

struct Failure {
  int code;
  std::string message;
};

int exit_code(clarq_status s) {
  switch (s) {
    case CLARQ_OK: return 0;
    case CLARQ_ERR_INPUT:
    case CLARQ_ERR_USAGE: return kExitInput;
    case CLARQ_ERR_NUMERIC: return kExitNumeric;
    default: return kExitInternal;
  }
}

void check(clarq_status s, const std::string& what) {
  if (s != CLARQ_OK) throw Failure{exit_code(s), what + ": " + clarq_last_error()};
}

// Owns a string returned by the library.
struct Owned {
  char* p = nullptr;
  ~Owned() { clarq_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitInput, "cannot open " + path};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{kExitInput, "cannot write " + path.string()};
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kExitInput, "cannot create " + dir + ": " + ec.message()};
  return fs::path(dir);
}

// Flags that override keys of the JSON config.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<int> k;
  std::optional<std::size_t> pool_size;
  std::optional<unsigned> threads;
  std::vector<int> rotations;
  std::optional<std::string> init_model;
  std::optional<std::string> mmr_model;
  bool ideal_from_pool = false;

  void add_common(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config; flags override its keys")
        ->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Master seed");
  }
  void add_simulation(CLI::App* app) {
    app->add_option("--policy", policy, "ql|mmr|singleneg|neural_init|mmr_neural|oracle");
    app->add_option("--k", k, "Turn budget");
    app->add_option("--pool-size", pool_size, "Candidate pool size n");
    app->add_option("--threads", threads, "Simulation worker threads");
    app->add_option("--rotations", rotations, "Fold rotations to run (default 0..4)");
    app->add_option("--init-model", init_model, "Pretrained initial scorer, skips training")
        ->check(CLI::ExistingFile);
    app->add_option("--mmr-model", mmr_model, "Pretrained marginal-relevance scorer")
        ->check(CLI::ExistingFile);
  }

  json config() const {
    json c = json::object();
    if (!config_path.empty()) {
      try {
        c = json::parse(read_file(config_path));
      } catch (const json::exception& e) {
        throw Failure{kExitInput, "config " + config_path + " is not valid JSON: " + e.what()};
      }
    }
    if (seed) c["seed"] = *seed;
    if (policy) c["policy"] = *policy;
    if (k) c["k"] = *k;
    if (pool_size) c["pool_size"] = *pool_size;
    if (threads) c["threads"] = *threads;
    if (!rotations.empty()) c["rotations"] = rotations;
    if (init_model) c["init_model"] = *init_model;
    if (mmr_model) c["mmr_model"] = *mmr_model;
    if (ideal_from_pool) c["ndcg_ideal_from_pool"] = true;
    return c;
  }
};

// Validates the config and writes the effective version next to the outputs.
std::string effective_config(const Overrides& o, const fs::path& dir, const std::string& name) {
  const std::string text = o.config().dump();
  Owned eff;
  check(clarq_config_effective(text.c_str(), &eff.p), "config");
  write_file(dir / (name + "_config.json"), eff.str());
  return text;
}

struct CorpusHandle {
  clarq_corpus* p = nullptr;
  ~CorpusHandle() { clarq_corpus_free(p); }
};

struct ModelHandle {
  clarq_model* p = nullptr;
  ~ModelHandle() { clarq_model_free(p); }
};

void open_corpus(const std::string& path, CorpusHandle& h) {
  check(clarq_corpus_open(path.c_str(), &h.p), "corpus");
}

void print_means(const json& report) {
  for (const auto& [metric, value] : report.at("means").items())
    std::printf("%-18s %.4f\n", metric.c_str(), value.get<double>());
  std::printf("%-18s %zu\n", "queries", report.at("count").get<std::size_t>());
}

// "name=path" pairs, kept in first-seen name order.
void collect_named(const std::vector<std::string>& specs, const char* key,
                   std::vector<std::string>& order, std::map<std::string, json>& entries) {
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
      throw Failure{kExitInput, std::string("expected name=path, got '") + s + "'"};
    const std::string name = s.substr(0, eq);
    if (!entries.count(name)) {
      order.push_back(name);
      entries[name] = {{"name", name}};
    }
    try {
      entries[name][key] = json::parse(read_file(s.substr(eq + 1)));
    } catch (const json::exception& e) {
      throw Failure{kExitInput, s.substr(eq + 1) + " is not valid JSON: " + e.what()};
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clarifying-question selection: simulation and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(clarq_version()));

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate JSONL inputs and write a corpus file");
  std::string topics, facets, questions, answers, ingest_out;
  ingest->add_option("--topics", topics, "Topics JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--facets", facets, "Facets JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--questions", questions, "Questions JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--answers", answers, "Answers JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "Output directory (corpus.json, summary.json)")
      ->required();

  // train
  auto* train = app.add_subcommand("train", "Train a scorer on the training folds of a rotation");
  Overrides train_o;
  std::string train_corpus, train_kind, train_out, train_init;
  int train_rotation = 0;
  train->add_option("--corpus", train_corpus, "Corpus file from ingest")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--model", train_kind, "init|minit|mmrbert")
      ->required()
      ->check(CLI::IsMember({"init", "minit", "mmrbert"}));
  train->add_option("--fold-rotation", train_rotation, "Rotation 0..4")->check(CLI::Range(0, 4));
  train->add_option("--init-model", train_init, "Initial model whose encoder mmrbert reuses")
      ->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Output directory")->required();
  train_o.add_common(train);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Cross-validated conversation simulation");
  Overrides sim_o;
  std::string sim_corpus, sim_out;
  sim->add_option("--corpus", sim_corpus, "Corpus file from ingest")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim_o.add_common(sim);
  sim_o.add_simulation(sim);

  // eval-cq
  auto* ecq = app.add_subcommand("eval-cq", "Conversation-task metrics of a question run file");
  Overrides ecq_o;
  std::string ecq_corpus, ecq_run, ecq_out;
  ecq->add_option("--corpus", ecq_corpus, "Corpus file from ingest")
      ->required()
      ->check(CLI::ExistingFile);
  ecq->add_option("--run", ecq_run, "TREC run file")->required()->check(CLI::ExistingFile);
  ecq->add_option("--out", ecq_out, "Output directory (eval_cq.json)")->required();
  ecq->add_flag("--ideal-from-pool", ecq_o.ideal_from_pool,
                "NDCG ideal from the candidate pool instead of the asked list");
  ecq_o.add_common(ecq);

  // eval-doc
  auto* edoc = app.add_subcommand("eval-doc", "Document retrieval after each conversation");
  Overrides edoc_o;
  std::string edoc_corpus, edoc_tr, edoc_docs, edoc_qrels, edoc_out;
  edoc->add_option("--corpus", edoc_corpus, "Corpus file from ingest")
      ->required()
      ->check(CLI::ExistingFile);
  edoc->add_option("--transcripts", edoc_tr, "Transcripts JSONL from simulate")
      ->required()
      ->check(CLI::ExistingFile);
  edoc->add_option("--documents", edoc_docs, "Documents JSONL {id, text}")
      ->required()
      ->check(CLI::ExistingFile);
  edoc->add_option("--qrels", edoc_qrels, "TREC qrels, grades 0..4")
      ->required()
      ->check(CLI::ExistingFile);
  edoc->add_option("--out", edoc_out, "Output directory (eval_doc.json)")->required();
  edoc_o.add_common(edoc);
  edoc->add_option("--rotations", edoc_o.rotations, "Fold rotations to evaluate");

  // significance
  auto* sig = app.add_subcommand("significance", "Paired randomization test of two reports");
  Overrides sig_o;
  std::string sig_a, sig_b, sig_metric = "mrr", sig_out;
  sig->add_option("--a", sig_a, "First evaluation report")->required()->check(CLI::ExistingFile);
  sig->add_option("--b", sig_b, "Second evaluation report")->required()->check(CLI::ExistingFile);
  sig->add_option("--metric", sig_metric, "Metric name in the reports");
  sig->add_option("--out", sig_out, "Optional output JSON file");
  sig_o.add_common(sig);

  // report
  auto* rep = app.add_subcommand("report", "Merge evaluation reports into summary tables");
  Overrides rep_o;
  std::vector<std::string> rep_cq, rep_doc;
  std::string rep_out;
  rep->add_option("--cq", rep_cq, "name=eval_cq.json; the first name is the baseline");
  rep->add_option("--doc", rep_doc, "name=eval_doc.json");
  rep->add_option("--out", rep_out, "Output directory (report.json, report.tsv)")->required();
  rep_o.add_common(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*ingest) {
      const auto dir = prepare_dir(ingest_out);
      CorpusHandle c;
      check(clarq_corpus_load(topics.c_str(), facets.c_str(), questions.c_str(), answers.c_str(),
                              &c.p),
            "ingest");
      check(clarq_corpus_save(c.p, (dir / "corpus.json").string().c_str()), "ingest");
      Owned summary;
      check(clarq_corpus_summary(c.p, nullptr, &summary.p), "ingest");
      write_file(dir / "summary.json", summary.str());
      std::cout << summary.str() << '\n';
    } else if (*train) {
      const auto dir = prepare_dir(train_out);
      const std::string config = effective_config(train_o, dir, "train");
      CorpusHandle c;
      open_corpus(train_corpus, c);
      ModelHandle init;
      if (!train_init.empty()) check(clarq_model_load(train_init.c_str(), &init.p), "init model");
      const std::string stem = train_kind + "_r" + std::to_string(train_rotation);
      ModelHandle model;
      Owned trace;
      const clarq_status s = clarq_train(c.p, train_kind.c_str(), train_rotation, config.c_str(),
                                         init.p, &model.p, &trace.p);
      const fs::path trace_path = dir / ("trace_" + stem + ".json");
      if (trace.p) write_file(trace_path, trace.str());
      if (s == CLARQ_ERR_NUMERIC)
        throw Failure{kExitNumeric, std::string("training diverged: ") + clarq_last_error() +
                                        " (trace: " + trace_path.string() + ")"};
      check(s, "train");
      const fs::path model_path = dir / ("model_" + stem + ".json");
      check(clarq_model_save(model.p, model_path.string().c_str()), "train");
      const auto t = json::parse(trace.str());
      std::printf("model  %s\ntrace  %s\ninitial loss %.6f\nfinal loss   %.6f\n",
                  model_path.string().c_str(), trace_path.string().c_str(),
                  t.at("initial_loss").get<double>(), t.at("final_loss").get<double>());
    } else if (*sim) {
      const auto dir = prepare_dir(sim_out);
      const std::string config = effective_config(sim_o, dir, "simulate");
      CorpusHandle c;
      open_corpus(sim_corpus, c);
      Owned summary;
      check(clarq_simulate(c.p, config.c_str(), (dir / "transcripts.jsonl").string().c_str(),
                           (dir / "run.txt").string().c_str(), &summary.p),
            "simulate");
      write_file(dir / "selection.json", summary.str());
      const auto s = json::parse(summary.str());
      std::printf("conversations %zu\nconfirmed     %zu\nerrors        %zu\n",
                  s.at("conversations").get<std::size_t>(), s.at("confirmed").get<std::size_t>(),
                  s.at("errors").get<std::size_t>());
    } else if (*ecq) {
      const auto dir = prepare_dir(ecq_out);
      const std::string config = effective_config(ecq_o, dir, "eval_cq");
      CorpusHandle c;
      open_corpus(ecq_corpus, c);
      Owned out;
      check(clarq_eval_cq(c.p, ecq_run.c_str(), config.c_str(), &out.p), "eval-cq");
      write_file(dir / "eval_cq.json", out.str());
      print_means(json::parse(out.str()));
    } else if (*edoc) {
      const auto dir = prepare_dir(edoc_out);
      const std::string config = effective_config(edoc_o, dir, "eval_doc");
      CorpusHandle c;
      open_corpus(edoc_corpus, c);
      Owned out;
      check(clarq_eval_doc(c.p, edoc_tr.c_str(), edoc_docs.c_str(), edoc_qrels.c_str(),
                           config.c_str(), &out.p),
            "eval-doc");
      write_file(dir / "eval_doc.json", out.str());
      const auto r = json::parse(out.str());
      print_means(r);
      std::printf("%-18s %zu\n", "skipped", r.at("skipped_without_qrels").get<std::size_t>());
    } else if (*sig) {
      const std::string config = sig_o.config().dump();
      Owned out;
      check(clarq_significance(read_file(sig_a).c_str(), read_file(sig_b).c_str(),
                               sig_metric.c_str(), config.c_str(), &out.p),
            "significance");
      if (!sig_out.empty()) write_file(sig_out, out.str());
      std::cout << out.str() << '\n';
    } else if (*rep) {
      if (rep_cq.empty() && rep_doc.empty())
        throw Failure{kExitInput, "report needs at least one --cq or --doc input"};
      const auto dir = prepare_dir(rep_out);
      const std::string config = effective_config(rep_o, dir, "report");
      std::vector<std::string> order;
      std::map<std::string, json> entries;
      collect_named(rep_cq, "cq", order, entries);
      collect_named(rep_doc, "doc", order, entries);
      json inputs = json::array();
      for (const auto& n : order) inputs.push_back(entries[n]);
      Owned out, table;
      check(clarq_report(inputs.dump().c_str(), config.c_str(), &out.p, &table.p), "report");
      write_file(dir / "report.json", out.str());
      write_file(dir / "report.tsv", table.str());
      std::cout << table.str();
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
