#pragma once

#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clarq/encoder.hpp"
#include "clarq/errors.hpp"
#include "clarq/mlp.hpp"

namespace clarq {

// Max-subtracted softmax.
Vector softmax_probabilities(std::span<const double> scores);

// -sum_i grades[i] * log softmax(scores)_i. With grades (1, 0) this is the
// pairwise loss -log P(q+).
double loss_listwise(std::span<const double> scores, std::span<const double> grades);
double loss_pairwise(double positive_score, double negative_score);

// d loss_listwise / d scores.
Vector listwise_score_gradient(std::span<const double> scores, std::span<const double> grades);

// Shape of a network ending in a single output: 1 layer (linear) or 2 layers
// with `hidden` ReLU units.
struct HeadShape {
  int layers = 1;
  std::size_t hidden = 8;
};

struct MatchShape {
  std::size_t dim = 8;     // d, the width of o(x, q)
  int layers = 1;          // 1: D -> d, 2: D -> hidden -> d
  std::size_t hidden = 16;
  bool relu_output = true;
};

// s(q, t) = MLP0(enc(q, t)).
class InitScorer {
 public:
  InitScorer(std::shared_ptr<const PairEncoder> encoder, Mlp mlp0);
  static InitScorer create(std::shared_ptr<const PairEncoder> encoder, HeadShape shape,
                           std::mt19937_64& rng, double init_range = 0.05);

  double score(const std::string& question, const std::string& topic) const;
  double score_features(std::span<const double> features) const;

  const PairEncoder& encoder() const { return *encoder_; }
  std::shared_ptr<const PairEncoder> encoder_ptr() const { return encoder_; }
  const Mlp& mlp0() const { return mlp0_; }
  Mlp& mlp0() { return mlp0_; }

 private:
  std::shared_ptr<const PairEncoder> encoder_;
  Mlp mlp0_;
};

// MLP2([o(t, q); maxpool_i o(q_i, q)]) with o(x, q) = MLP1(enc(x, q)); the
// pooled half is the zero vector when the history is empty.
class MmrScorer {
 public:
  MmrScorer(std::shared_ptr<const PairEncoder> encoder, Mlp mlp1, Mlp mlp2);
  static MmrScorer create(std::shared_ptr<const PairEncoder> encoder, MatchShape match,
                          HeadShape head, std::mt19937_64& rng, double init_range = 0.05);

  double score(const std::string& question, const std::string& topic,
               const std::vector<std::string>& history) const;
  double score_features(std::span<const double> topic_features,
                        const std::vector<Vector>& history_features) const;

  const PairEncoder& encoder() const { return *encoder_; }
  std::shared_ptr<const PairEncoder> encoder_ptr() const { return encoder_; }
  const Mlp& mlp1() const { return mlp1_; }
  const Mlp& mlp2() const { return mlp2_; }
  Mlp& mlp1() { return mlp1_; }
  Mlp& mlp2() { return mlp2_; }

 private:
  std::shared_ptr<const PairEncoder> encoder_;
  Mlp mlp1_;
  Mlp mlp2_;
};

// Deduplicated encoder outputs referenced by training examples.
class FeatureBank {
 public:
  std::size_t add(Vector v);
  // Encodes (a, b) once; later calls return the cached row.
  std::size_t encode(const PairEncoder& encoder, const std::string& a, const std::string& b);
  const Vector& row(std::size_t i) const { return rows_[i]; }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<Vector> rows_;
  std::map<std::pair<std::string, std::string>, std::size_t> cache_;
};

// One pair or triplet for the initial scorer: feature rows of enc(q, t) and
// their loss weights, (1, 0) for pairs, (2, 1, 0) for triplets.
struct ListExample {
  std::vector<std::size_t> rows;
  std::vector<double> labels;
};

// One (triplet, history) term of the marginal-relevance loss. For candidate
// c: topic_rows[c] = enc(t, q_c), history_rows[c][i] = enc(q_i, q_c).
struct MmrExample {
  std::vector<std::size_t> topic_rows;
  std::vector<std::vector<std::size_t>> history_rows;
  std::vector<double> labels;
};

// Loss of one example; when `grad` is given, adds the exact gradient into it.
double init_loss_and_gradient(const Mlp& mlp0, const FeatureBank& bank,
                              const ListExample& example, Mlp* grad);

// Max-pool routes each coordinate's gradient to its argmax history entry; ties
// go to the lowest history index.
double mmr_loss_and_gradient(const Mlp& mlp1, const Mlp& mlp2, const FeatureBank& bank,
                             const MmrExample& example, Mlp* grad1, Mlp* grad2);

enum class LossKind { pairwise, listwise, mmr_history };
const char* to_string(LossKind k);
LossKind parse_loss_kind(const std::string& s);

struct TrainConfig {
  LossKind loss = LossKind::listwise;
  double learning_rate = 0.0005;
  int epochs = 10;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double init_range = 0.05;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainTrace {
  double initial_loss = 0.0;          // mean loss at the initial parameters
  std::vector<double> epoch_losses;   // mean loss seen during each epoch
  double final_loss = 0.0;            // mean loss at the trained parameters
  std::size_t steps = 0;

  nlohmann::json to_json() const;
};

class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, TrainTrace trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

// Adam, one update per example, examples visited in a seeded shuffled order.
TrainTrace train_init(Mlp& mlp0, const FeatureBank& bank,
                      const std::vector<ListExample>& examples, const TrainConfig& config);
TrainTrace train_mmr(Mlp& mlp1, Mlp& mlp2, const FeatureBank& bank,
                     const std::vector<MmrExample>& examples, const TrainConfig& config);

}  // namespace clarq
