#include "clarq/model.hpp"

#include <fstream>

namespace clarq {

using nlohmann::json;

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::init: return "init";
    case ModelKind::minit: return "minit";
    case ModelKind::mmrbert: return "mmrbert";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "init") return ModelKind::init;
  if (s == "minit") return ModelKind::minit;
  if (s == "mmrbert") return ModelKind::mmrbert;
  throw InputError("unknown model kind '" + s + "'");
}

json ArchitectureConfig::to_json() const {
  return {{"head_layers", head.layers},   {"head_hidden", head.hidden},
          {"match_dim", match.dim},       {"match_layers", match.layers},
          {"match_hidden", match.hidden}, {"match_relu_output", match.relu_output},
          {"hash_width", hash_width}};
}

ArchitectureConfig ArchitectureConfig::from_json(const json& j) {
  ArchitectureConfig a;
  a.head.layers = j.value("head_layers", a.head.layers);
  a.head.hidden = j.value("head_hidden", a.head.hidden);
  a.match.dim = j.value("match_dim", a.match.dim);
  a.match.layers = j.value("match_layers", a.match.layers);
  a.match.hidden = j.value("match_hidden", a.match.hidden);
  a.match.relu_output = j.value("match_relu_output", a.match.relu_output);
  a.hash_width = j.value("hash_width", a.hash_width);
  if (a.head.layers < 1 || a.head.layers > 2 || a.match.layers < 1 || a.match.layers > 2)
    throw InputError("MLP layer counts must be 1 or 2");
  if (a.match.dim == 0 || a.head.hidden == 0 || a.match.hidden == 0)
    throw InputError("MLP widths must be positive");
  return a;
}

json ModelFile::to_json() const {
  json j;
  j["schema"] = "clarq.model";
  j["version"] = 1;
  j["kind"] = to_string(kind);
  j["rotation"] = rotation;
  j["architecture"] = architecture.to_json();
  j["train_config"] = train.to_json();
  j["seed"] = train.seed;
  j["trace"] = trace.to_json();
  if (init) {
    j["encoder"] = init->encoder().to_json();
    j["networks"] = {{"mlp0", init->mlp0().to_json()}};
  } else if (mmr) {
    j["encoder"] = mmr->encoder().to_json();
    j["networks"] = {{"mlp1", mmr->mlp1().to_json()}, {"mlp2", mmr->mlp2().to_json()}};
  }
  return j;
}

ModelFile ModelFile::from_json(const json& j) {
  try {
    if (j.value("schema", "") != "clarq.model") throw InputError("not a model file");
    if (j.value("version", 0) != 1) throw InputError("unsupported model file version");
    ModelFile m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.rotation = j.value("rotation", -1);
    m.architecture = ArchitectureConfig::from_json(j.at("architecture"));
    m.train = TrainConfig::from_json(j.at("train_config"));
    const auto& t = j.at("trace");
    m.trace.initial_loss = t.at("initial_loss").get<double>();
    m.trace.epoch_losses = t.at("epoch_losses").get<std::vector<double>>();
    m.trace.steps = t.at("steps").get<std::size_t>();
    m.trace.final_loss = t.value("final_loss", m.trace.initial_loss);
    auto enc = encoder_from_json(j.at("encoder"));
    const auto& nets = j.at("networks");
    if (m.kind == ModelKind::mmrbert) {
      m.mmr.emplace(enc, Mlp::from_json("MLP1", nets.at("mlp1")),
                    Mlp::from_json("MLP2", nets.at("mlp2")));
    } else {
      m.init.emplace(enc, Mlp::from_json("MLP0", nets.at("mlp0")));
    }
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model file: ") + e.what());
  }
}

void ModelFile::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

ModelFile ModelFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed model file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::shared_ptr<const PairEncoder> fit_lexical_encoder(const Corpus& corpus,
                                                       std::size_t hash_width) {
  std::vector<std::string> texts;
  for (const auto& q : corpus.questions()) texts.push_back(q.text);
  for (const auto& t : corpus.topics()) texts.push_back(t.text);
  return std::make_shared<LexicalEncoder>(LexicalEncoder::fit(texts, hash_width));
}

EncodedListSet encode_pairs(const Corpus& corpus, const std::vector<Pair>& pairs,
                            const PairEncoder& encoder) {
  EncodedListSet out;
  for (const auto& p : pairs) {
    const auto& topic = corpus.topic(p.topic_id).text;
    ListExample ex;
    ex.rows = {out.bank.encode(encoder, corpus.question(p.positive).text, topic),
               out.bank.encode(encoder, corpus.question(p.negative).text, topic)};
    ex.labels = {1.0, 0.0};
    out.examples.push_back(std::move(ex));
  }
  return out;
}

EncodedListSet encode_triplets(const Corpus& corpus, const std::vector<Triplet>& triplets,
                               const PairEncoder& encoder) {
  EncodedListSet out;
  for (const auto& t : triplets) {
    const auto& topic = corpus.topic(t.topic_id).text;
    ListExample ex;
    for (QuestionId q : {t.target, t.related, t.negative})
      ex.rows.push_back(out.bank.encode(encoder, corpus.question(q).text, topic));
    ex.labels = {2.0, 1.0, 0.0};
    out.examples.push_back(std::move(ex));
  }
  return out;
}

std::vector<QuestionId> training_history(const LabelTable& labels,
                                         const std::vector<QuestionId>& pool,
                                         const Triplet& triplet, std::size_t max_history) {
  std::vector<QuestionId> out;
  for (QuestionId q : pool) {
    if (out.size() >= max_history) break;
    if (q == triplet.related) continue;
    if (labels.grade(triplet.facet_id, q) == 1) out.push_back(q);
  }
  return out;
}

EncodedMmrSet encode_mmr_examples(const Corpus& corpus, const LabelTable& labels,
                                  const PoolMembers& pools,
                                  const std::vector<Triplet>& triplets,
                                  const PairEncoder& encoder, std::size_t max_history) {
  EncodedMmrSet out;
  for (const auto& t : triplets) {
    auto pit = pools.find(t.topic_id);
    if (pit == pools.end()) continue;
    const auto history = training_history(labels, pit->second, t, max_history);
    const auto& topic = corpus.topic(t.topic_id).text;
    const QuestionId members[3] = {t.target, t.related, t.negative};
    for (std::size_t len = 0; len <= history.size(); ++len) {
      MmrExample ex;
      ex.labels = {2.0, 1.0, 0.0};
      for (QuestionId q : members) {
        const auto& qtext = corpus.question(q).text;
        ex.topic_rows.push_back(out.bank.encode(encoder, topic, qtext));
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < len; ++i)
          rows.push_back(out.bank.encode(encoder, corpus.question(history[i]).text, qtext));
        ex.history_rows.push_back(std::move(rows));
      }
      out.examples.push_back(std::move(ex));
    }
  }
  return out;
}

ModelFile train_model(const Corpus& corpus, const LabelTable& labels,
                      const std::map<TopicId, CandidatePool>& pools, const TrainRequest& request) {
  ModelFile model;
  model.kind = request.kind;
  model.architecture = request.architecture;
  model.train = request.train;
  model.rotation = request.rotation;
  const PoolMembers members = pool_members(pools);
  std::mt19937_64 rng(request.train.seed);

  if (request.kind == ModelKind::mmrbert) {
    model.train.loss = LossKind::mmr_history;
    std::shared_ptr<const PairEncoder> encoder;
    if (request.init_model && request.init_model->init)
      encoder = request.init_model->init->encoder_ptr();
    else if (request.encoder)
      encoder = request.encoder;
    else
      encoder = fit_lexical_encoder(corpus, request.architecture.hash_width);
    auto sets = build_triplets(corpus, labels, members, request.topics, request.data.sampling);
    auto data = encode_mmr_examples(corpus, labels, members, sets.triplets, *encoder,
                                    request.data.max_history);
    MmrScorer scorer = MmrScorer::create(encoder, request.architecture.match,
                                         request.architecture.head, rng,
                                         request.train.init_range);
    model.trace = train_mmr(scorer.mlp1(), scorer.mlp2(), data.bank, data.examples, model.train);
    model.mmr.emplace(std::move(scorer));
    return model;
  }

  auto encoder = request.encoder ? request.encoder
                                 : fit_lexical_encoder(corpus, request.architecture.hash_width);
  EncodedListSet data;
  if (request.kind == ModelKind::init) {
    model.train.loss = LossKind::pairwise;
    auto sets = build_pairs(corpus, labels, members, request.topics, request.data.sampling);
    data = encode_pairs(corpus, sets.pairs, *encoder);
  } else {
    model.train.loss = LossKind::listwise;
    auto sets = build_triplets(corpus, labels, members, request.topics, request.data.sampling);
    data = encode_triplets(corpus, sets.triplets, *encoder);
  }
  InitScorer scorer =
      InitScorer::create(encoder, request.architecture.head, rng, request.train.init_range);
  model.trace = train_init(scorer.mlp0(), data.bank, data.examples, model.train);
  model.init.emplace(std::move(scorer));
  return model;
}

}  // namespace clarq
