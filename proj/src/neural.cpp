#include "clarq/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rng.hpp"

namespace clarq {

using nlohmann::json;

Vector softmax_probabilities(std::span<const double> scores) {
  if (scores.empty()) throw UsageError("softmax of an empty list");
  const double mx = *std::max_element(scores.begin(), scores.end());
  Vector p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += (p[i] = std::exp(scores[i] - mx));
  for (auto& x : p) x /= z;
  return p;
}

namespace {

double log_sum_exp(std::span<const double> s) {
  const double mx = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double x : s) z += std::exp(x - mx);
  return mx + std::log(z);
}

}  // namespace

double loss_listwise(std::span<const double> scores, std::span<const double> grades) {
  if (scores.size() != grades.size() || scores.empty())
    throw UsageError("scores and grades must be nonempty and of equal length");
  const double lse = log_sum_exp(scores);
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (grades[i] != 0.0) loss -= grades[i] * (scores[i] - lse);
  return loss;
}

double loss_pairwise(double positive_score, double negative_score) {
  const double s[2] = {positive_score, negative_score};
  const double y[2] = {1.0, 0.0};
  return loss_listwise(s, y);
}

Vector listwise_score_gradient(std::span<const double> scores, std::span<const double> grades) {
  const Vector p = softmax_probabilities(scores);
  const double total = std::accumulate(grades.begin(), grades.end(), 0.0);
  Vector g(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) g[i] = total * p[i] - grades[i];
  return g;
}

InitScorer::InitScorer(std::shared_ptr<const PairEncoder> encoder, Mlp mlp0)
    : encoder_(std::move(encoder)), mlp0_(std::move(mlp0)) {
  if (!encoder_) throw UsageError("scorer needs an encoder");
  if (mlp0_.input_dim() != encoder_->dim() || mlp0_.output_dim() != 1)
    throw InputError("shape mismatch: MLP0 must map the encoder width " +
                     std::to_string(encoder_->dim()) + " to 1");
}

InitScorer InitScorer::create(std::shared_ptr<const PairEncoder> encoder, HeadShape shape,
                              std::mt19937_64& rng, double init_range) {
  std::vector<std::size_t> widths{encoder->dim()};
  if (shape.layers == 2) widths.push_back(shape.hidden);
  else if (shape.layers != 1) throw UsageError("MLP0 must have 1 or 2 layers");
  widths.push_back(1);
  Mlp mlp = Mlp::create("MLP0", widths, false, rng, init_range);
  return InitScorer(std::move(encoder), std::move(mlp));
}

double InitScorer::score(const std::string& question, const std::string& topic) const {
  return score_features(encoder_->encode(question, topic));
}

double InitScorer::score_features(std::span<const double> features) const {
  return mlp0_.forward(features)[0];
}

MmrScorer::MmrScorer(std::shared_ptr<const PairEncoder> encoder, Mlp mlp1, Mlp mlp2)
    : encoder_(std::move(encoder)), mlp1_(std::move(mlp1)), mlp2_(std::move(mlp2)) {
  if (!encoder_) throw UsageError("scorer needs an encoder");
  if (mlp1_.input_dim() != encoder_->dim())
    throw InputError("shape mismatch: MLP1 input must equal the encoder width " +
                     std::to_string(encoder_->dim()));
  if (mlp2_.input_dim() != 2 * mlp1_.output_dim() || mlp2_.output_dim() != 1)
    throw InputError("shape mismatch: MLP2 must map 2d = " +
                     std::to_string(2 * mlp1_.output_dim()) + " to 1");
}

MmrScorer MmrScorer::create(std::shared_ptr<const PairEncoder> encoder, MatchShape match,
                            HeadShape head, std::mt19937_64& rng, double init_range) {
  std::vector<std::size_t> w1{encoder->dim()};
  if (match.layers == 2) w1.push_back(match.hidden);
  else if (match.layers != 1) throw UsageError("MLP1 must have 1 or 2 layers");
  w1.push_back(match.dim);
  std::vector<std::size_t> w2{2 * match.dim};
  if (head.layers == 2) w2.push_back(head.hidden);
  else if (head.layers != 1) throw UsageError("MLP2 must have 1 or 2 layers");
  w2.push_back(1);
  Mlp mlp1 = Mlp::create("MLP1", w1, match.relu_output, rng, init_range);
  Mlp mlp2 = Mlp::create("MLP2", w2, false, rng, init_range);
  return MmrScorer(std::move(encoder), std::move(mlp1), std::move(mlp2));
}

double MmrScorer::score(const std::string& question, const std::string& topic,
                        const std::vector<std::string>& history) const {
  std::vector<Vector> hist;
  hist.reserve(history.size());
  for (const auto& h : history) hist.push_back(encoder_->encode(h, question));
  return score_features(encoder_->encode(topic, question), hist);
}

double MmrScorer::score_features(std::span<const double> topic_features,
                                 const std::vector<Vector>& history_features) const {
  const Vector ot = mlp1_.forward(topic_features);
  Vector z(ot.begin(), ot.end());
  Vector pooled(ot.size(), 0.0);
  for (std::size_t i = 0; i < history_features.size(); ++i) {
    const Vector oi = mlp1_.forward(history_features[i]);
    for (std::size_t j = 0; j < oi.size(); ++j)
      pooled[j] = i == 0 ? oi[j] : std::max(pooled[j], oi[j]);
  }
  z.insert(z.end(), pooled.begin(), pooled.end());
  return mlp2_.forward(z)[0];
}

std::size_t FeatureBank::add(Vector v) {
  rows_.push_back(std::move(v));
  return rows_.size() - 1;
}

std::size_t FeatureBank::encode(const PairEncoder& encoder, const std::string& a,
                                const std::string& b) {
  auto key = std::make_pair(a, b);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const std::size_t row = add(encoder.encode(a, b));
  cache_.emplace(std::move(key), row);
  return row;
}

double init_loss_and_gradient(const Mlp& mlp0, const FeatureBank& bank,
                              const ListExample& example, Mlp* grad) {
  const std::size_t n = example.rows.size();
  std::vector<Mlp::Trace> traces(n);
  Vector scores(n);
  for (std::size_t c = 0; c < n; ++c)
    scores[c] = mlp0.forward(bank.row(example.rows[c]), grad ? &traces[c] : nullptr)[0];
  const double loss = loss_listwise(scores, example.labels);
  if (!std::isfinite(loss)) throw NumericError("non-finite loss at the MLP0 output");
  if (grad) {
    const Vector ds = listwise_score_gradient(scores, example.labels);
    for (std::size_t c = 0; c < n; ++c) {
      const double d[1] = {ds[c]};
      mlp0.backward(traces[c], d, *grad);
    }
  }
  return loss;
}

double mmr_loss_and_gradient(const Mlp& mlp1, const Mlp& mlp2, const FeatureBank& bank,
                             const MmrExample& example, Mlp* grad1, Mlp* grad2) {
  const std::size_t n = example.topic_rows.size();
  if (example.history_rows.size() != n || example.labels.size() != n)
    throw UsageError("malformed marginal-relevance example");
  const bool want_grad = grad1 && grad2;
  const std::size_t d = mlp1.output_dim();

  struct Candidate {
    Mlp::Trace topic;
    std::vector<Mlp::Trace> history;
    std::vector<std::size_t> argmax;  // per pooled coordinate
    Mlp::Trace head;
  };
  std::vector<Candidate> cand(n);
  Vector scores(n);
  for (std::size_t c = 0; c < n; ++c) {
    auto& k = cand[c];
    const auto& hist = example.history_rows[c];
    const Vector ot = mlp1.forward(bank.row(example.topic_rows[c]), &k.topic);
    Vector z(ot.begin(), ot.end());
    Vector pooled(d, 0.0);
    k.history.resize(hist.size());
    k.argmax.assign(d, 0);
    for (std::size_t i = 0; i < hist.size(); ++i) {
      const Vector oi = mlp1.forward(bank.row(hist[i]), &k.history[i]);
      for (std::size_t j = 0; j < d; ++j) {
        if (i == 0 || oi[j] > pooled[j]) {
          pooled[j] = oi[j];
          k.argmax[j] = i;
        }
      }
    }
    z.insert(z.end(), pooled.begin(), pooled.end());
    scores[c] = mlp2.forward(z, &k.head)[0];
  }
  const double loss = loss_listwise(scores, example.labels);
  if (!std::isfinite(loss)) throw NumericError("non-finite loss at the MLP2 output");
  if (!want_grad) return loss;

  const Vector ds = listwise_score_gradient(scores, example.labels);
  for (std::size_t c = 0; c < n; ++c) {
    if (ds[c] == 0.0) continue;
    auto& k = cand[c];
    const double dsc[1] = {ds[c]};
    const Vector dz = mlp2.backward(k.head, dsc, *grad2);
    mlp1.backward(k.topic, std::span<const double>(dz.data(), d), *grad1);
    if (k.history.empty()) continue;
    std::vector<Vector> dh(k.history.size(), Vector(d, 0.0));
    for (std::size_t j = 0; j < d; ++j) dh[k.argmax[j]][j] += dz[d + j];
    for (std::size_t i = 0; i < k.history.size(); ++i) {
      if (std::all_of(dh[i].begin(), dh[i].end(), [](double x) { return x == 0.0; })) continue;
      mlp1.backward(k.history[i], dh[i], *grad1);
    }
  }
  return loss;
}

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::pairwise: return "pairwise";
    case LossKind::listwise: return "listwise";
    case LossKind::mmr_history: return "mmr_history";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "pairwise") return LossKind::pairwise;
  if (s == "listwise") return LossKind::listwise;
  if (s == "mmr_history") return LossKind::mmr_history;
  throw InputError("unknown loss kind '" + s + "'");
}

json TrainConfig::to_json() const {
  return {{"loss", to_string(loss)},     {"learning_rate", learning_rate},
          {"epochs", epochs},            {"seed", seed},
          {"beta1", beta1},              {"beta2", beta2},
          {"epsilon", epsilon},          {"init_range", init_range}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  if (j.contains("loss")) c.loss = parse_loss_kind(j.at("loss").get<std::string>());
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.init_range = j.value("init_range", c.init_range);
  if (!(c.learning_rate > 0.0) || c.epochs < 0)
    throw InputError("learning rate must be positive and epochs non-negative");
  return c;
}

json TrainTrace::to_json() const {
  return {{"initial_loss", initial_loss},
          {"epoch_losses", epoch_losses},
          {"final_loss", final_loss},
          {"steps", steps}};
}

namespace {

class Adam {
 public:
  Adam(std::vector<std::span<double>> params, const TrainConfig& c) : params_(params), c_(c) {
    for (const auto& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  void step(const std::vector<std::span<const double>>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(c_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(c_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto p = params_[k];
      auto g = grads[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = c_.beta1 * m[i] + (1.0 - c_.beta1) * g[i];
        v[i] = c_.beta2 * v[i] + (1.0 - c_.beta2) * g[i] * g[i];
        p[i] -= c_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c_.epsilon);
      }
    }
  }

 private:
  std::vector<std::span<double>> params_;
  std::vector<Vector> m_, v_;
  TrainConfig c_;
  std::uint64_t t_ = 0;
};

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

template <typename T>
std::vector<T> concat(std::vector<T> a, const std::vector<T>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Shared epoch loop; `run(i, with_grad)` returns the loss of example i and
// fills the gradient buffers when asked.
template <typename Run, typename Zero>
TrainTrace run_training(std::size_t n, const TrainConfig& config, Adam& adam,
                        const std::vector<std::span<const double>>& grads, Run run, Zero zero) {
  TrainTrace trace;
  auto full_loss = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += run(i, false);
    return n ? total / static_cast<double>(n) : 0.0;
  };
  trace.initial_loss = full_loss();
  if (!std::isfinite(trace.initial_loss))
    throw TrainingDiverged("initial loss is not finite", trace);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double sum = 0.0;
    for (std::size_t i : epoch_order(n, config.seed, epoch)) {
      zero();
      double loss = 0.0;
      try {
        loss = run(i, true);
      } catch (const NumericError& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), trace);
      }
      sum += loss;
      adam.step(grads);
      ++trace.steps;
    }
    const double mean = n ? sum / static_cast<double>(n) : 0.0;
    trace.epoch_losses.push_back(mean);
    if (!std::isfinite(mean))
      throw TrainingDiverged("training loss became non-finite in epoch " +
                                 std::to_string(epoch + 1),
                             trace);
  }
  trace.final_loss = full_loss();
  if (!std::isfinite(trace.final_loss)) throw TrainingDiverged("final loss is not finite", trace);
  return trace;
}

}  // namespace

TrainTrace train_init(Mlp& mlp0, const FeatureBank& bank,
                      const std::vector<ListExample>& examples, const TrainConfig& config) {
  Mlp grad = mlp0.zeros_like();
  Adam adam(mlp0.tensors(), config);
  const auto& cgrad = grad;
  return run_training(
      examples.size(), config, adam, cgrad.tensors(),
      [&](std::size_t i, bool with_grad) {
        return init_loss_and_gradient(mlp0, bank, examples[i], with_grad ? &grad : nullptr);
      },
      [&] { grad.set_zero(); });
}

TrainTrace train_mmr(Mlp& mlp1, Mlp& mlp2, const FeatureBank& bank,
                     const std::vector<MmrExample>& examples, const TrainConfig& config) {
  Mlp g1 = mlp1.zeros_like();
  Mlp g2 = mlp2.zeros_like();
  Adam adam(concat(mlp1.tensors(), mlp2.tensors()), config);
  const auto& cg1 = g1;
  const auto& cg2 = g2;
  return run_training(
      examples.size(), config, adam, concat(cg1.tensors(), cg2.tensors()),
      [&](std::size_t i, bool with_grad) {
        return with_grad ? mmr_loss_and_gradient(mlp1, mlp2, bank, examples[i], &g1, &g2)
                         : mmr_loss_and_gradient(mlp1, mlp2, bank, examples[i], nullptr, nullptr);
      },
      [&] {
        g1.set_zero();
        g2.set_zero();
      });
}

}  // namespace clarq
