#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "clarq/corpus.hpp"
#include "clarq/neural.hpp"
#include "clarq/retrieval.hpp"

namespace clarq {

// init: pairwise-trained initial scorer; minit: listwise (triplet) initial
// scorer; mmrbert: marginal-relevance scorer.
enum class ModelKind { init, minit, mmrbert };
const char* to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

struct ArchitectureConfig {
  HeadShape head;    // MLP0, or MLP2 for mmrbert
  MatchShape match;  // MLP1
  std::size_t hash_width = 0;

  nlohmann::json to_json() const;
  static ArchitectureConfig from_json(const nlohmann::json& j);
};

struct TrainingDataConfig {
  TrainingSetOptions sampling;
  // Longest history prefix used in the marginal-relevance loss.
  std::size_t max_history = 4;
};

// A trained scorer plus everything needed to reproduce it.
struct ModelFile {
  ModelKind kind = ModelKind::init;
  std::optional<InitScorer> init;
  std::optional<MmrScorer> mmr;
  ArchitectureConfig architecture;
  TrainConfig train;
  TrainTrace trace;
  int rotation = -1;

  nlohmann::json to_json() const;
  static ModelFile from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ModelFile load(const std::filesystem::path& path);
};

// Fits a lexical encoder on every question and topic text of the corpus.
std::shared_ptr<const PairEncoder> fit_lexical_encoder(const Corpus& corpus,
                                                       std::size_t hash_width);

struct EncodedListSet {
  FeatureBank bank;
  std::vector<ListExample> examples;
};

struct EncodedMmrSet {
  FeatureBank bank;
  std::vector<MmrExample> examples;
};

EncodedListSet encode_pairs(const Corpus& corpus, const std::vector<Pair>& pairs,
                            const PairEncoder& encoder);
EncodedListSet encode_triplets(const Corpus& corpus, const std::vector<Triplet>& triplets,
                               const PairEncoder& encoder);

// History prefixes for a triplet: the facet's grade-1 pool questions other than
// the triplet's own grade-1 member, in pool order, truncated to max_history.
// H(E) is every prefix from empty to full length.
std::vector<QuestionId> training_history(const LabelTable& labels,
                                         const std::vector<QuestionId>& pool,
                                         const Triplet& triplet, std::size_t max_history);

EncodedMmrSet encode_mmr_examples(const Corpus& corpus, const LabelTable& labels,
                                  const PoolMembers& pools,
                                  const std::vector<Triplet>& triplets,
                                  const PairEncoder& encoder, std::size_t max_history);

struct TrainRequest {
  ModelKind kind = ModelKind::init;
  ArchitectureConfig architecture;
  TrainConfig train;
  TrainingDataConfig data;
  // Topics whose facets contribute training entries.
  std::vector<TopicId> topics;
  // For mmrbert, the encoder is taken from this model when present.
  const ModelFile* init_model = nullptr;
  // Used instead of a freshly fitted lexical encoder when set.
  std::shared_ptr<const PairEncoder> encoder;
  int rotation = -1;
};

// Builds the training set from pools, trains, and returns the model.
ModelFile train_model(const Corpus& corpus, const LabelTable& labels,
                      const std::map<TopicId, CandidatePool>& pools, const TrainRequest& request);

}  // namespace clarq
