#include "clarq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rng.hpp"

namespace clarq {

using nlohmann::json;

std::vector<ArchitectureConfig> default_architecture_grid() {
  std::vector<ArchitectureConfig> grid(1);
  for (std::size_t h : {4, 8, 16, 32}) {
    ArchitectureConfig a;
    a.head.layers = 2;
    a.head.hidden = h;
    grid.push_back(a);
  }
  return grid;
}

std::vector<double> default_w_grid() {
  std::vector<double> w;
  for (int i = 0; i <= 20; ++i) w.push_back(i / 20.0);
  return w;
}

ExperimentConfig::ExperimentConfig()
    : architecture_grid(default_architecture_grid()), w_grid(default_w_grid()) {}

json ExperimentConfig::to_json() const {
  json arch = json::array();
  for (const auto& a : architecture_grid) arch.push_back(a.to_json());
  json j = {{"seed", seed},
            {"pool_size", pool_size},
            {"question_mu", question_mu},
            {"document_mu", document_mu},
            {"k", k},
            {"preset_counts_toward_budget", preset_counts_toward_budget},
            {"threads", threads},
            {"unanswered_same_topic", unanswered_same_topic},
            {"policy", clarq::to_string(policy)},
            {"lambda_grid", lambda_grid},
            {"alpha_grid", alpha_grid},
            {"feedback_terms_grid", feedback_terms_grid},
            {"em", {{"background_weight", em.background_weight},
                    {"max_iters", em.max_iters},
                    {"tol", em.tol}}},
            {"mmr_similarity", mmr_similarity},
            {"init_kind", clarq::to_string(init_kind)},
            {"architecture_grid", std::move(arch)},
            {"encoder", encoder},
            {"train", train.to_json()},
            {"training_data", {{"cap", data.sampling.cap}, {"max_history", data.max_history}}},
            {"rotations", rotations},
            {"ndcg_ideal_from_pool", ndcg_ideal_from_pool},
            {"w_grid", w_grid},
            {"doc_depth", doc_depth},
            {"success_turns", success_turns},
            {"significance_level", significance_level},
            {"fisher", {{"iterations", fisher.iterations},
                        {"exhaustive_limit", fisher.exhaustive_limit}}}};
  j["init_model"] = init_model ? json(init_model->string()) : json(nullptr);
  j["mmr_model"] = mmr_model ? json(mmr_model->string()) : json(nullptr);
  return j;
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seed", "pool_size", "question_mu", "document_mu", "k", "preset_counts_toward_budget",
      "threads", "unanswered_same_topic", "policy", "lambda_grid", "alpha_grid",
      "feedback_terms_grid", "em", "mmr_similarity", "init_kind", "architecture_grid",
      "encoder", "train", "training_data", "init_model", "mmr_model", "rotations",
      "ndcg_ideal_from_pool", "w_grid", "doc_depth", "success_turns", "significance_level",
      "fisher"};
  return keys;
}

template <typename T>
void require_nonempty(const std::vector<T>& v, const char* name) {
  if (v.empty()) throw InputError(std::string(name) + " must not be empty");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known_keys().count(key)) throw InputError("unknown config key '" + key + "'");
  try {
    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    c.pool_size = j.value("pool_size", c.pool_size);
    c.question_mu = j.value("question_mu", c.question_mu);
    c.document_mu = j.value("document_mu", c.document_mu);
    c.k = j.value("k", c.k);
    c.preset_counts_toward_budget =
        j.value("preset_counts_toward_budget", c.preset_counts_toward_budget);
    c.threads = j.value("threads", c.threads);
    c.unanswered_same_topic = j.value("unanswered_same_topic", c.unanswered_same_topic);
    if (j.contains("policy")) c.policy = parse_policy_kind(j.at("policy").get<std::string>());
    c.lambda_grid = j.value("lambda_grid", c.lambda_grid);
    c.alpha_grid = j.value("alpha_grid", c.alpha_grid);
    c.feedback_terms_grid = j.value("feedback_terms_grid", c.feedback_terms_grid);
    if (j.contains("em")) {
      const auto& e = j.at("em");
      c.em.background_weight = e.value("background_weight", c.em.background_weight);
      c.em.max_iters = e.value("max_iters", c.em.max_iters);
      c.em.tol = e.value("tol", c.em.tol);
    }
    c.mmr_similarity = j.value("mmr_similarity", c.mmr_similarity);
    if (c.mmr_similarity != "init" && c.mmr_similarity != "lexical")
      throw InputError("mmr_similarity must be \"init\" or \"lexical\"");
    if (j.contains("init_kind")) {
      c.init_kind = parse_model_kind(j.at("init_kind").get<std::string>());
      if (c.init_kind == ModelKind::mmrbert) throw InputError("init_kind must be init or minit");
    }
    if (j.contains("architecture_grid")) {
      c.architecture_grid.clear();
      for (const auto& a : j.at("architecture_grid"))
        c.architecture_grid.push_back(ArchitectureConfig::from_json(a));
    }
    if (j.contains("encoder")) c.encoder = j.at("encoder");
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("training_data")) {
      const auto& d = j.at("training_data");
      c.data.sampling.cap = d.value("cap", c.data.sampling.cap);
      c.data.max_history = d.value("max_history", c.data.max_history);
    }
    if (j.contains("init_model") && !j.at("init_model").is_null())
      c.init_model = j.at("init_model").get<std::string>();
    if (j.contains("mmr_model") && !j.at("mmr_model").is_null())
      c.mmr_model = j.at("mmr_model").get<std::string>();
    c.rotations = j.value("rotations", c.rotations);
    c.ndcg_ideal_from_pool = j.value("ndcg_ideal_from_pool", c.ndcg_ideal_from_pool);
    c.w_grid = j.value("w_grid", c.w_grid);
    c.doc_depth = j.value("doc_depth", c.doc_depth);
    c.success_turns = j.value("success_turns", c.success_turns);
    c.significance_level = j.value("significance_level", c.significance_level);
    if (j.contains("fisher")) {
      const auto& f = j.at("fisher");
      c.fisher.iterations = f.value("iterations", c.fisher.iterations);
      c.fisher.exhaustive_limit = f.value("exhaustive_limit", c.fisher.exhaustive_limit);
    }
    c.fisher.seed = c.seed;

    if (c.k < 1) throw InputError("k must be >= 1");
    if (c.pool_size == 0) throw InputError("pool_size must be >= 1");
    if (!(c.question_mu > 0.0) || !(c.document_mu > 0.0))
      throw InputError("Dirichlet mu must be positive");
    require_nonempty(c.lambda_grid, "lambda_grid");
    require_nonempty(c.alpha_grid, "alpha_grid");
    require_nonempty(c.feedback_terms_grid, "feedback_terms_grid");
    require_nonempty(c.architecture_grid, "architecture_grid");
    require_nonempty(c.rotations, "rotations");
    require_nonempty(c.w_grid, "w_grid");
    for (double l : c.lambda_grid)
      if (!(l >= 0.0 && l <= 1.0)) throw InputError("lambda_grid values must be in [0, 1]");
    for (double a : c.alpha_grid)
      if (!(a > 0.0 && a <= 1.0)) throw InputError("alpha_grid values must be in (0, 1]");
    for (double w : c.w_grid)
      if (!(w >= 0.0 && w <= 1.0)) throw InputError("w_grid values must be in [0, 1]");
    for (int r : c.rotations)
      if (r < 0 || r >= kFoldCount) throw InputError("rotations must be in 0..4");
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
}

std::shared_ptr<const PairEncoder> encoder_for(const json& spec) {
  if (spec.value("kind", "") == "lexical" && !spec.contains("df")) return nullptr;
  return encoder_from_json(spec);
}

json CrossvalResult::summary() const {
  json rot = json::array();
  for (const auto& r : rotations) {
    json cands = json::array();
    for (const auto& [desc, score] : r.candidates)
      cands.push_back({{"params", desc}, {"validation_mrr", score}});
    rot.push_back({{"rotation", r.rotation},
                   {"test_fold", r.roles.test},
                   {"validation_fold", r.roles.validation},
                   {"train_folds", r.roles.train},
                   {"selected", r.selected},
                   {"validation_mrr", r.validation_mrr},
                   {"validation_count", r.validation_count},
                   {"test_count", r.test_count},
                   {"candidates", std::move(cands)}});
  }
  std::size_t errors = 0, confirmed = 0;
  for (const auto& t : transcripts) {
    if (!t.error.empty()) ++errors;
    if (t.outcome == Outcome::confirmed) ++confirmed;
  }
  return {{"rotations", std::move(rot)},
          {"conversations", transcripts.size()},
          {"confirmed", confirmed},
          {"errors", errors}};
}

namespace {

double transcript_mrr(const LabelTable& labels, const Transcript& t) {
  std::vector<int> grades;
  for (const auto& turn : t.turns) grades.push_back(labels.grade(t.seed.facet_id, turn.question));
  return mrr(grades);
}

struct Candidate {
  json params;
  std::shared_ptr<const Policy> policy;
};

// Trains and caches scorers for one rotation.
class RotationModels {
 public:
  RotationModels(const Corpus& corpus, const LabelTable& labels,
                 const std::map<TopicId, CandidatePool>& pools, const ExperimentConfig& config,
                 std::shared_ptr<const PairEncoder> encoder, int rotation,
                 std::vector<TopicId> train_topics)
      : corpus_(corpus),
        labels_(labels),
        pools_(pools),
        config_(config),
        encoder_(std::move(encoder)),
        rotation_(rotation),
        train_topics_(std::move(train_topics)) {}

  std::shared_ptr<const ModelFile> train(ModelKind kind, const ArchitectureConfig& arch,
                                         const ModelFile* init) {
    TrainRequest req;
    req.kind = kind;
    req.architecture = arch;
    req.train = config_.train;
    req.train.seed = mix_seed(config_.seed, 0x100 + static_cast<std::uint64_t>(rotation_));
    req.data = config_.data;
    req.data.sampling.seed = config_.seed;
    req.topics = train_topics_;
    req.init_model = init;
    req.encoder = encoder_ ? encoder_ : lexical(arch.hash_width);
    req.rotation = rotation_;
    return std::make_shared<const ModelFile>(train_model(corpus_, labels_, pools_, req));
  }

 private:
  std::shared_ptr<const PairEncoder> lexical(std::size_t hash_width) {
    auto it = lexical_.find(hash_width);
    if (it == lexical_.end())
      it = lexical_.emplace(hash_width, fit_lexical_encoder(corpus_, hash_width)).first;
    return it->second;
  }

  const Corpus& corpus_;
  const LabelTable& labels_;
  const std::map<TopicId, CandidatePool>& pools_;
  const ExperimentConfig& config_;
  std::shared_ptr<const PairEncoder> encoder_;
  int rotation_;
  std::vector<TopicId> train_topics_;
  std::map<std::size_t, std::shared_ptr<const PairEncoder>> lexical_;
};

std::shared_ptr<const InitScorer> init_scorer(const std::shared_ptr<const ModelFile>& m) {
  if (!m->init) throw InputError("model file does not hold an initial scorer");
  return std::shared_ptr<const InitScorer>(m, &*m->init);
}

std::shared_ptr<const MmrScorer> mmr_scorer(const std::shared_ptr<const ModelFile>& m) {
  if (!m->mmr) throw InputError("model file does not hold a marginal-relevance scorer");
  return std::shared_ptr<const MmrScorer>(m, &*m->mmr);
}

}  // namespace

CrossvalResult crossval_run(const Corpus& corpus, const ExperimentConfig& config) {
  auto labels = std::make_shared<const LabelTable>(
      corpus, LabelOptions{config.unanswered_same_topic});
  auto index = std::make_shared<const QuestionIndex>(build_question_index(corpus));
  const auto pools =
      build_candidate_pools(corpus, *index, Dirichlet{config.question_mu}, config.pool_size);
  const auto seeds = expand_conversations(corpus, *labels);
  const FoldAssignment folds(corpus);
  const auto encoder = encoder_for(config.encoder);

  std::shared_ptr<const ModelFile> fixed_init, fixed_mmr;
  if (config.init_model)
    fixed_init = std::make_shared<const ModelFile>(ModelFile::load(*config.init_model));
  if (config.mmr_model)
    fixed_mmr = std::make_shared<const ModelFile>(ModelFile::load(*config.mmr_model));

  SimulationOptions sim;
  sim.k = config.k;
  sim.preset_counts_toward_budget = config.preset_counts_toward_budget;
  sim.threads = config.threads;

  auto validation_score = [&](const Policy& policy, const std::vector<ConversationSeed>& vs) {
    const auto ts = run_experiment(corpus, *labels, vs, policy, pools, sim);
    double s = 0.0;
    for (const auto& t : ts) s += transcript_mrr(*labels, t);
    return ts.empty() ? 0.0 : s / static_cast<double>(ts.size());
  };

  CrossvalResult result;
  std::map<std::size_t, Transcript> pooled;
  for (int r : config.rotations) {
    RotationReport rep;
    rep.rotation = r;
    rep.roles = FoldAssignment::roles(r);
    std::vector<ConversationSeed> val, test;
    std::vector<std::size_t> test_pos;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const int f = FoldAssignment::fold_of(seeds[i].topic_id);
      if (f == rep.roles.validation) val.push_back(seeds[i]);
      if (f == rep.roles.test) {
        test.push_back(seeds[i]);
        test_pos.push_back(i);
      }
    }
    if (test.empty())
      throw InputError("rotation " + std::to_string(r) + ": test fold " +
                       std::to_string(rep.roles.test) + " has no conversations");
    RotationModels models(corpus, *labels, pools, config, encoder, r,
                          folds.topics_in(rep.roles.train));

    auto init_models = [&] {
      std::vector<std::pair<json, std::shared_ptr<const ModelFile>>> out;
      if (fixed_init) {
        out.emplace_back(json{{"init_model", config.init_model->string()}}, fixed_init);
      } else {
        for (const auto& arch : config.architecture_grid)
          out.emplace_back(json{{"architecture", arch.to_json()}},
                           models.train(config.init_kind, arch, nullptr));
      }
      return out;
    };

    std::vector<Candidate> cands;
    switch (config.policy) {
      case PolicyKind::ql:
        cands.push_back({json::object(), make_ql_policy()});
        break;
      case PolicyKind::oracle:
        cands.push_back({json::object(), make_oracle_policy(labels)});
        break;
      case PolicyKind::singleneg:
        for (double a : config.alpha_grid) {
          for (std::size_t m : config.feedback_terms_grid) {
            SingleNegConfig sc;
            sc.alpha = a;
            sc.feedback_terms = m;
            sc.em = config.em;
            sc.smoothing = Dirichlet{config.question_mu};
            cands.push_back({{{"alpha", a}, {"feedback_terms", m}},
                             make_singleneg_policy(index, sc)});
          }
        }
        break;
      case PolicyKind::mmr:
        if (config.mmr_similarity == "lexical") {
          for (double l : config.lambda_grid)
            cands.push_back({{{"lambda", l}, {"similarity", "lexical"}},
                             make_mmr_policy(l, lexical_cosine)});
        } else {
          for (const auto& [desc, model] : init_models()) {
            auto f = sigmoid_similarity(init_scorer(model));
            for (double l : config.lambda_grid) {
              json p = desc;
              p["lambda"] = l;
              cands.push_back({p, make_mmr_policy(l, f)});
            }
          }
        }
        break;
      case PolicyKind::neural_init:
        for (const auto& [desc, model] : init_models())
          cands.push_back({desc, make_neural_init_policy(init_scorer(model))});
        break;
      case PolicyKind::mmr_neural: {
        // First-turn scorer chosen on validation the same way neural_init is.
        json first_desc;
        std::shared_ptr<const ModelFile> first;
        double first_best = -1.0;
        for (const auto& [desc, model] : init_models()) {
          const double s =
              val.empty() ? 0.0
                          : validation_score(*make_neural_init_policy(init_scorer(model)), val);
          if (!first || s > first_best) {
            first_best = s;
            first = model;
            first_desc = desc;
          }
        }
        if (fixed_mmr) {
          cands.push_back({{{"mmr_model", config.mmr_model->string()}, {"first_turn", first_desc}},
                           make_mmr_neural_policy(mmr_scorer(fixed_mmr), init_scorer(first))});
        } else {
          for (const auto& arch : config.architecture_grid) {
            auto model = models.train(ModelKind::mmrbert, arch, first.get());
            cands.push_back({{{"architecture", arch.to_json()}, {"first_turn", first_desc}},
                             make_mmr_neural_policy(mmr_scorer(model), init_scorer(first))});
          }
        }
        break;
      }
    }

    std::size_t best = 0;
    if (cands.size() > 1 && val.empty())
      throw InputError("rotation " + std::to_string(r) + ": validation fold " +
                       std::to_string(rep.roles.validation) + " has no conversations");
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const double s = (cands.size() == 1 && val.empty()) ? 0.0
                                                           : validation_score(*cands[c].policy, val);
      rep.candidates.emplace_back(cands[c].params, s);
      if (s > rep.candidates[best].second) best = c;
    }
    rep.selected = cands[best].params;
    rep.validation_mrr = rep.candidates[best].second;
    rep.validation_count = val.size();

    auto ts = run_experiment(corpus, *labels, test, *cands[best].policy, pools, sim);
    rep.test_count = ts.size();
    for (std::size_t i = 0; i < ts.size(); ++i) {
      ts[i].fold = rep.roles.test;
      pooled[test_pos[i]] = std::move(ts[i]);
    }
    result.rotations.push_back(std::move(rep));
  }
  for (auto& [pos, t] : pooled) result.transcripts.push_back(std::move(t));
  return result;
}

ParsedQid parse_qid(const std::string& qid) {
  ParsedQid p;
  std::vector<std::int64_t> parts;
  std::size_t start = 0;
  while (true) {
    const auto dash = qid.find('-', start);
    const auto piece = qid.substr(start, dash == std::string::npos ? std::string::npos : dash - start);
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (piece.empty() || used != piece.size())
      throw InputError("malformed query id '" + qid + "' (expected topic-facet[-question])");
    parts.push_back(v);
    if (dash == std::string::npos) break;
    start = dash + 1;
  }
  if (parts.size() < 2 || parts.size() > 3)
    throw InputError("malformed query id '" + qid + "' (expected topic-facet[-question])");
  p.topic_id = parts[0];
  p.facet_id = parts[1];
  if (parts.size() == 3) p.seed_question = parts[2];
  return p;
}

namespace {

const std::vector<std::string> kCqMetrics{"mrr", "ndcg3_label2", "ndcg5_label2",
                                          "ndcg3_multigrade", "ndcg5_multigrade"};
const std::vector<std::string> kDocMetrics{"mrr", "p1", "ndcg1", "ndcg5", "ndcg20"};

// Means, type breakdowns and per-fold counts over per_query records.
void summarize(json& report, const std::vector<std::string>& metrics) {
  const auto& pq = report.at("per_query");
  json means = json::object(), by_topic = json::object(), by_facet = json::object();
  std::vector<std::string> topic_keys, facet_keys;
  std::map<int, std::size_t> by_fold;
  for (const auto& q : pq) {
    topic_keys.push_back(q.at("topic_type").get<std::string>());
    facet_keys.push_back(q.at("facet_type").get<std::string>());
    ++by_fold[q.at("fold").get<int>()];
  }
  for (const auto& m : metrics) {
    std::vector<double> v;
    for (const auto& q : pq) v.push_back(q.at("metrics").at(m).get<double>());
    means[m] = mean(v);
    for (const auto& [g, gm] : group_means(v, topic_keys))
      by_topic[g][m] = gm.mean, by_topic[g]["count"] = gm.count;
    for (const auto& [g, gm] : group_means(v, facet_keys))
      by_facet[g][m] = gm.mean, by_facet[g]["count"] = gm.count;
  }
  json folds = json::object();
  for (const auto& [f, n] : by_fold) folds[std::to_string(f)] = n;
  report["count"] = pq.size();
  report["means"] = std::move(means);
  report["by_topic_type"] = std::move(by_topic);
  report["by_facet_type"] = std::move(by_facet);
  report["by_fold"] = std::move(folds);
}

}  // namespace

json evaluate_cq_run(const Corpus& corpus, const std::vector<RunLine>& run,
                     const ExperimentConfig& config) {
  const LabelTable labels(corpus, LabelOptions{config.unanswered_same_topic});
  std::map<TopicId, CandidatePool> pools;
  if (config.ndcg_ideal_from_pool) {
    const auto index = build_question_index(corpus);
    pools = build_candidate_pools(corpus, index, Dirichlet{config.question_mu}, config.pool_size);
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunLine*>> lists;
  for (const auto& line : run) {
    auto [it, fresh] = lists.try_emplace(line.qid);
    if (fresh) order.push_back(line.qid);
    it->second.push_back(&line);
  }
  json per_query = json::array();
  std::vector<int> confirmed;
  for (const auto& qid : order) {
    auto& lines = lists[qid];
    std::stable_sort(lines.begin(), lines.end(),
                     [](const RunLine* a, const RunLine* b) { return a->rank < b->rank; });
    const auto p = parse_qid(qid);
    if (!corpus.has_facet(p.facet_id) || corpus.facet(p.facet_id).topic_id != p.topic_id)
      throw InputError("run query '" + qid + "' does not name a facet of its topic");
    std::vector<int> grades;
    for (const RunLine* l : lines) {
      std::size_t used = 0;
      QuestionId q = 0;
      try {
        q = std::stoll(l->item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != l->item.size())
        throw InputError("run item '" + l->item + "' for query '" + qid + "' is not a question id");
      grades.push_back(labels.grade(p.facet_id, q));
    }
    std::vector<int> ideal = grades;
    if (config.ndcg_ideal_from_pool) {
      ideal.clear();
      auto it = pools.find(p.topic_id);
      if (it != pools.end())
        for (const auto& e : it->second.entries) ideal.push_back(labels.grade(p.facet_id, e.id));
    }
    int turn = 0;
    for (std::size_t i = 0; i < grades.size(); ++i)
      if (grades[i] == 2) {
        turn = static_cast<int>(i + 1);
        break;
      }
    confirmed.push_back(turn);
    json rec = {{"qid", qid},
                {"topic", p.topic_id},
                {"facet", p.facet_id},
                {"fold", FoldAssignment::fold_of(p.topic_id)},
                {"grades", grades},
                {"confirmed_turn", turn},
                {"topic_type", to_string(corpus.topic(p.topic_id).type)},
                {"facet_type", to_string(corpus.facet(p.facet_id).type)},
                {"metrics",
                 {{"mrr", mrr(grades)},
                  {"ndcg3_label2", ndcg_at(grades, ideal, 3, GainScheme::label2_only)},
                  {"ndcg5_label2", ndcg_at(grades, ideal, 5, GainScheme::label2_only)},
                  {"ndcg3_multigrade", ndcg_at(grades, ideal, 3, GainScheme::multigrade)},
                  {"ndcg5_multigrade", ndcg_at(grades, ideal, 5, GainScheme::multigrade)}}}};
    rec["seed_question"] = p.seed_question ? json(*p.seed_question) : json(nullptr);
    per_query.push_back(std::move(rec));
  }
  json report = {{"schema", "clarq.eval"}, {"version", 1}, {"task", "cq"},
                 {"per_query", std::move(per_query)}};
  summarize(report, kCqMetrics);
  json cs = json::array();
  for (const auto& c : cumulative_success(confirmed, config.success_turns))
    cs.push_back({{"turn", c.turn}, {"count", c.count}, {"fraction", c.fraction}});
  report["cumulative_success"] = std::move(cs);
  report["ndcg_ideal"] = config.ndcg_ideal_from_pool ? "pool" : "asked_list";
  return report;
}

json evaluate_doc_task(const Corpus& corpus, const std::vector<Transcript>& transcripts,
                       const DocumentIndex& documents, const Qrels& qrels,
                       const ExperimentConfig& config) {
  if (documents.size() == 0) throw InputError("document collection is empty");
  const Dirichlet smoothing{config.document_mu};

  struct Conv {
    const Transcript* t;
    const std::map<std::string, int>* judgments;
    int fold;
  };
  std::vector<Conv> convs;
  std::size_t skipped = 0;
  for (const auto& t : transcripts) {
    const std::string key2 = std::to_string(t.seed.topic_id) + "-" + std::to_string(t.seed.facet_id);
    const std::map<std::string, int>* j = nullptr;
    for (const auto& key : {t.qid(), key2, std::to_string(t.seed.topic_id)}) {
      auto it = qrels.find(key);
      if (it != qrels.end()) {
        j = &it->second;
        break;
      }
    }
    if (!corpus.has_topic(t.seed.topic_id) || !corpus.has_facet(t.seed.facet_id))
      throw InputError("transcript '" + t.qid() + "' names an unknown topic or facet");
    if (!j) {
      ++skipped;
      continue;
    }
    convs.push_back({&t, j, FoldAssignment::fold_of(t.seed.topic_id)});
  }

  auto run_one = [&](const Conv& c, double w) {
    std::vector<HistoryTurn> hist;
    for (const auto& turn : c.t->turns)
      hist.push_back({corpus.question(turn.question).text, turn.answer});
    const auto model = conversation_query_model(corpus.topic(c.t->seed.topic_id).text, hist, w);
    std::vector<std::string> ranked;
    if (!model.probs.empty())
      for (const auto& d : retrieve_documents(model, documents, smoothing, config.doc_depth))
        ranked.push_back(d.id);
    return doc_metrics(ranked, *c.judgments);
  };

  json per_query = json::array();
  json rotations = json::array();
  std::map<std::size_t, json> pooled;
  for (int r : config.rotations) {
    const auto roles = FoldAssignment::roles(r);
    std::vector<std::size_t> val, test;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (convs[i].fold == roles.validation) val.push_back(i);
      if (convs[i].fold == roles.test) test.push_back(i);
    }
    std::size_t best = 0;
    std::vector<double> scores;
    for (std::size_t g = 0; g < config.w_grid.size(); ++g) {
      double s = 0.0;
      for (std::size_t i : val) s += run_one(convs[i], config.w_grid[g]).mrr;
      scores.push_back(val.empty() ? 0.0 : s / static_cast<double>(val.size()));
      if (scores[g] > scores[best]) best = g;
    }
    const double w = config.w_grid[best];
    rotations.push_back({{"rotation", r},
                         {"test_fold", roles.test},
                         {"validation_fold", roles.validation},
                         {"w", w},
                         {"validation_mrr", scores[best]},
                         {"validation_count", val.size()},
                         {"test_count", test.size()},
                         {"w_scores", scores}});
    for (std::size_t i : test) {
      const auto& c = convs[i];
      const auto m = run_one(c, w);
      pooled[i] = {{"qid", c.t->qid()},
                   {"topic", c.t->seed.topic_id},
                   {"facet", c.t->seed.facet_id},
                   {"fold", c.fold},
                   {"w", w},
                   {"topic_type", to_string(corpus.topic(c.t->seed.topic_id).type)},
                   {"facet_type", to_string(corpus.facet(c.t->seed.facet_id).type)},
                   {"metrics",
                    {{"mrr", m.mrr},
                     {"p1", m.p1},
                     {"ndcg1", m.ndcg1},
                     {"ndcg5", m.ndcg5},
                     {"ndcg20", m.ndcg20}}}};
    }
  }
  for (auto& [i, rec] : pooled) per_query.push_back(std::move(rec));
  json report = {{"schema", "clarq.eval"},
                 {"version", 1},
                 {"task", "doc"},
                 {"per_query", std::move(per_query)},
                 {"rotations", std::move(rotations)},
                 {"skipped_without_qrels", skipped}};
  summarize(report, kDocMetrics);
  return report;
}

namespace {

void check_report(const json& r, const char* which) {
  if (!r.is_object() || r.value("schema", "") != "clarq.eval" || !r.contains("per_query"))
    throw InputError(std::string(which) + " is not an evaluation report");
}

}  // namespace

json compare_reports(const json& a, const json& b, const std::string& metric,
                     const ExperimentConfig& config) {
  check_report(a, "first input");
  check_report(b, "second input");
  if (a.at("task") != b.at("task")) throw InputError("reports are from different tasks");
  auto values = [&](const json& r) {
    std::map<std::string, double> out;
    for (const auto& q : r.at("per_query")) {
      const auto& m = q.at("metrics");
      if (!m.contains(metric)) throw InputError("report has no metric '" + metric + "'");
      out[q.at("qid").get<std::string>()] = m.at(metric).get<double>();
    }
    return out;
  };
  const auto va = values(a), vb = values(b);
  if (va.size() != vb.size() ||
      !std::equal(va.begin(), va.end(), vb.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; }))
    throw InputError("reports cover different query sets");
  std::vector<double> xa, xb;
  for (const auto& [q, v] : va) xa.push_back(v);
  for (const auto& [q, v] : vb) xb.push_back(v);
  const auto r = fisher_randomization(xa, xb, config.fisher);
  return {{"metric", metric},
          {"n", xa.size()},
          {"mean_a", mean(xa)},
          {"mean_b", mean(xb)},
          {"p_value", r.p_value},
          {"exhaustive", r.exhaustive},
          {"permutations", r.permutations},
          {"level", config.significance_level},
          {"significant", r.p_value < config.significance_level}};
}

json build_report(const std::vector<NamedReport>& inputs, const ExperimentConfig& config) {
  if (inputs.empty()) throw InputError("report needs at least one input");
  json methods = json::array();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& in = inputs[i];
    json m = {{"name", in.name}};
    for (const auto& [task, rep, names] :
         {std::tuple{"cq", &in.cq, &kCqMetrics}, std::tuple{"doc", &in.doc, &kDocMetrics}}) {
      if (rep->is_null()) continue;
      check_report(*rep, in.name.c_str());
      if (rep->at("task") != task)
        throw InputError(in.name + ": expected a " + task + " report");
      json section = {{"count", rep->at("count")},
                      {"means", rep->at("means")},
                      {"by_fold", rep->at("by_fold")},
                      {"by_topic_type", rep->at("by_topic_type")},
                      {"by_facet_type", rep->at("by_facet_type")}};
      std::size_t total = 0;
      for (const auto& [f, n] : rep->at("by_fold").items()) total += n.get<std::size_t>();
      section["fold_total"] = total;
      if (rep->contains("cumulative_success"))
        section["cumulative_success"] = rep->at("cumulative_success");
      const json& base = std::string(task) == "cq" ? inputs[0].cq : inputs[0].doc;
      if (i > 0 && !base.is_null()) {
        json sig = json::object();
        for (const auto& metric : *names) {
          const auto c = compare_reports(*rep, base, metric, config);
          sig[metric] = {{"p_value", c.at("p_value")}, {"significant", c.at("significant")}};
        }
        section["significance_vs_baseline"] = std::move(sig);
      }
      m[task] = std::move(section);
    }
    methods.push_back(std::move(m));
  }
  return {{"schema", "clarq.report"},
          {"version", 1},
          {"baseline", inputs[0].name},
          {"level", config.significance_level},
          {"methods", std::move(methods)}};
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string report_table(const json& report) {
  std::ostringstream out;
  out << "method";
  for (const auto& m : kCqMetrics) out << "\tcq_" << m;
  for (const auto& m : kDocMetrics) out << "\tdoc_" << m;
  out << '\n';
  for (const auto& m : report.at("methods")) {
    out << m.at("name").get<std::string>();
    for (const auto& [task, names] :
         {std::pair{"cq", &kCqMetrics}, std::pair{"doc", &kDocMetrics}}) {
      for (const auto& metric : *names) {
        out << '\t';
        if (!m.contains(task)) {
          out << '-';
          continue;
        }
        const auto& s = m.at(task);
        out << fmt(s.at("means").at(metric).get<double>());
        if (s.contains("significance_vs_baseline") &&
            s.at("significance_vs_baseline").at(metric).at("significant").get<bool>())
          out << '*';
      }
    }
    out << '\n';
  }
  out << "\nmethod\tturn\tsuccess_count\tsuccess_fraction\n";
  for (const auto& m : report.at("methods")) {
    if (!m.contains("cq") || !m.at("cq").contains("cumulative_success")) continue;
    for (const auto& c : m.at("cq").at("cumulative_success"))
      out << m.at("name").get<std::string>() << '\t' << c.at("turn").get<int>() << '\t'
          << c.at("count").get<std::size_t>() << '\t' << fmt(c.at("fraction").get<double>())
          << '\n';
  }
  for (const char* key : {"by_topic_type", "by_facet_type"}) {
    out << "\nmethod\t" << key << "\tcount\tcq_mrr\n";
    for (const auto& m : report.at("methods")) {
      if (!m.contains("cq")) continue;
      for (const auto& [g, v] : m.at("cq").at(key).items())
        out << m.at("name").get<std::string>() << '\t' << g << '\t'
            << v.at("count").get<std::size_t>() << '\t' << fmt(v.at("mrr").get<double>())
            << '\n';
    }
  }
  return out.str();
}

}  // namespace clarq
