#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clarq/corpus.hpp"
#include "clarq/metrics.hpp"
#include "clarq/model.hpp"
#include "clarq/retrieval.hpp"
#include "clarq/simulator.hpp"

namespace clarq {

// Everything an experiment needs besides the data files. Missing JSON keys
// keep the defaults below; unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t pool_size = RetrievalDefaults::pool_size;
  double question_mu = RetrievalDefaults::question_mu;
  double document_mu = RetrievalDefaults::document_mu;
  int k = 5;
  bool preset_counts_toward_budget = true;
  unsigned threads = 1;
  Grade unanswered_same_topic = 1;

  PolicyKind policy = PolicyKind::ql;
  std::vector<double> lambda_grid{0.8, 0.85, 0.9, 0.95, 0.99};
  std::vector<double> alpha_grid{0.8, 0.85, 0.9, 0.95, 0.99};
  std::vector<std::size_t> feedback_terms_grid{10, 20, 30};
  NegativeModelOptions em;
  // "init": sigmoid of the trained initial scorer; "lexical": cosine.
  std::string mmr_similarity = "init";

  // Initial scorer used by neural_init, the first mmr_neural turn and MMR.
  ModelKind init_kind = ModelKind::init;
  std::vector<ArchitectureConfig> architecture_grid;
  // Encoder spec; {"kind": "lexical"} fits on the corpus texts.
  nlohmann::json encoder = {{"kind", "lexical"}};
  TrainConfig train;
  TrainingDataConfig data;
  // Pretrained models replace per-rotation training.
  std::optional<std::filesystem::path> init_model;
  std::optional<std::filesystem::path> mmr_model;

  std::vector<int> rotations{0, 1, 2, 3, 4};
  bool ndcg_ideal_from_pool = false;
  std::vector<double> w_grid;
  std::size_t doc_depth = 100;
  std::vector<int> success_turns{3, 4, 5};
  double significance_level = 0.05;
  FisherOptions fisher;

  ExperimentConfig();
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

// {1-layer head} plus 2-layer heads with hidden width 4, 8, 16 and 32.
std::vector<ArchitectureConfig> default_architecture_grid();
// 0.0, 0.05, ..., 1.0
std::vector<double> default_w_grid();

// Encoder for a corpus from an encoder spec, or nullptr for a lexical spec
// without fitted statistics (fitted later per model).
std::shared_ptr<const PairEncoder> encoder_for(const nlohmann::json& spec);

struct RotationReport {
  int rotation = 0;
  FoldRoles roles;
  nlohmann::json selected;
  double validation_mrr = 0.0;
  std::size_t validation_count = 0;
  std::size_t test_count = 0;
  // Every candidate's validation MRR, in grid order.
  std::vector<std::pair<nlohmann::json, double>> candidates;
};

struct CrossvalResult {
  std::vector<RotationReport> rotations;
  // Test-fold transcripts of every rotation, in seed order.
  std::vector<Transcript> transcripts;

  nlohmann::json summary() const;
};

// Question task: per rotation, select hyperparameters on the validation fold
// by MRR and simulate the test fold.
CrossvalResult crossval_run(const Corpus& corpus, const ExperimentConfig& config);

// Grades of a run's ranked lists, keyed by run qid "topic-facet[-question]".
struct CqQuery {
  std::string qid;
  TopicId topic_id = 0;
  FacetId facet_id = 0;
  std::optional<QuestionId> seed_question;
  int fold = 0;
  std::vector<int> grades;
  double mrr = 0.0;
  double ndcg3_label2 = 0.0;
  double ndcg5_label2 = 0.0;
  double ndcg3_multi = 0.0;
  double ndcg5_multi = 0.0;
  int confirmed_turn = 0;
  std::string topic_type;
  std::string facet_type;
};

struct ParsedQid {
  TopicId topic_id = 0;
  FacetId facet_id = 0;
  std::optional<QuestionId> seed_question;
};
ParsedQid parse_qid(const std::string& qid);

// Conversation-task evaluation of a question run file.
nlohmann::json evaluate_cq_run(const Corpus& corpus, const std::vector<RunLine>& run,
                               const ExperimentConfig& config);

// Document task: revised-QL retrieval for each transcript, w selected on the
// validation fold by document MRR, reported on the test fold.
nlohmann::json evaluate_doc_task(const Corpus& corpus, const std::vector<Transcript>& transcripts,
                                 const DocumentIndex& documents, const Qrels& qrels,
                                 const ExperimentConfig& config);

// Paired test on one metric between two evaluation reports.
nlohmann::json compare_reports(const nlohmann::json& a, const nlohmann::json& b,
                               const std::string& metric, const ExperimentConfig& config);

// Merges named evaluation reports into overall, by-turn, by-topic-type and
// by-facet-type summaries. The first entry is the significance baseline.
struct NamedReport {
  std::string name;
  nlohmann::json cq;
  nlohmann::json doc;
};
nlohmann::json build_report(const std::vector<NamedReport>& inputs,
                            const ExperimentConfig& config);
std::string report_table(const nlohmann::json& report);

}  // namespace clarq
