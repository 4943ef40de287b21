#include "clarq/clarq.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include "clarq/experiment.hpp"
#include "rng.hpp"

struct clarq_corpus {
  clarq::Corpus corpus;
};

struct clarq_model {
  clarq::ModelFile model;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
clarq_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return CLARQ_OK;
  } catch (const clarq::InputError& e) {
    g_last_error = e.what();
    return CLARQ_ERR_INPUT;
  } catch (const clarq::NumericError& e) {
    g_last_error = e.what();
    return CLARQ_ERR_NUMERIC;
  } catch (const clarq::UsageError& e) {
    g_last_error = e.what();
    return CLARQ_ERR_USAGE;
  } catch (const json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return CLARQ_ERR_INPUT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CLARQ_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return CLARQ_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) throw clarq::UsageError(std::string(name) + " must not be NULL");
}

json parse_json(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw clarq::InputError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

clarq::ExperimentConfig config_of(const char* config_json) {
  if (!config_json || !*config_json) return clarq::ExperimentConfig{};
  return clarq::ExperimentConfig::from_json(parse_json(config_json, "config"));
}

json with_config(json j, const clarq::ExperimentConfig& c) {
  j["config"] = c.to_json();
  return j;
}

}  // namespace

extern "C" {

const char* clarq_last_error(void) { return g_last_error.c_str(); }

const char* clarq_version(void) { return "1.0.0"; }

void clarq_string_free(char* s) { std::free(s); }

clarq_status clarq_corpus_load(const char* topics_path, const char* facets_path,
                               const char* questions_path, const char* answers_path,
                               clarq_corpus** out) {
  return guard([&] {
    require(topics_path, "topics_path");
    require(facets_path, "facets_path");
    require(questions_path, "questions_path");
    require(answers_path, "answers_path");
    require(out, "out");
    *out = nullptr;
    auto c = clarq::Corpus::load({topics_path, facets_path, questions_path, answers_path});
    *out = new clarq_corpus{std::move(c)};
  });
}

clarq_status clarq_corpus_open(const char* path, clarq_corpus** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    std::ifstream in(path);
    if (!in) throw clarq::InputError(std::string("cannot open ") + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw clarq::InputError(std::string("malformed corpus file ") + path + ": " + e.what());
    }
    *out = new clarq_corpus{clarq::Corpus::from_json(j)};
  });
}

clarq_status clarq_corpus_save(const clarq_corpus* corpus, const char* path) {
  return guard([&] {
    require(corpus, "corpus");
    require(path, "path");
    std::ofstream out(path);
    if (!out) throw clarq::InputError(std::string("cannot write ") + path);
    out << corpus->corpus.to_json().dump() << '\n';
  });
}

clarq_status clarq_corpus_summary(const clarq_corpus* corpus, const char* config_json,
                                  char** out_json) {
  return guard([&] {
    require(corpus, "corpus");
    require(out_json, "out_json");
    const auto cfg = config_of(config_json);
    const auto& c = corpus->corpus;
    const clarq::LabelTable labels(c, clarq::LabelOptions{cfg.unanswered_same_topic});
    const auto seeds = clarq::expand_conversations(c, labels);
    std::size_t faceted = 0, informational = 0, positives = 0;
    for (const auto& t : c.topics())
      if (t.type == clarq::TopicType::faceted) ++faceted;
    for (const auto& f : c.facets())
      if (f.type == clarq::FacetType::informational) ++informational;
    for (const auto& a : c.answers())
      if (a.polarity == clarq::Polarity::positive) ++positives;
    std::size_t one_turn = 0;
    for (const auto& s : seeds)
      if (s.preset) ++one_turn;
    json j = {{"topics", c.topics().size()},
              {"topics_faceted", faceted},
              {"topics_ambiguous", c.topics().size() - faceted},
              {"facets", c.facets().size()},
              {"facets_informational", informational},
              {"facets_navigational", c.facets().size() - informational},
              {"questions", c.questions().size()},
              {"answer_records", c.answers().size()},
              {"positive_answers", positives},
              {"grade2_pairs", labels.count_grade2()},
              {"answered_grade1_pairs", labels.count_answered_grade1()},
              {"facets_without_target", labels.facets_without_target()},
              {"conversations", seeds.size()},
              {"conversations_zero_turn", seeds.size() - one_turn},
              {"conversations_one_turn", one_turn}};
    *out_json = dup_string(j.dump(1));
  });
}

void clarq_corpus_free(clarq_corpus* corpus) { delete corpus; }

clarq_status clarq_config_effective(const char* config_json, char** out_json) {
  return guard([&] {
    require(out_json, "out_json");
    *out_json = dup_string(config_of(config_json).to_json().dump(1));
  });
}

clarq_status clarq_train(const clarq_corpus* corpus, const char* kind, int rotation,
                         const char* config_json, const clarq_model* init_model,
                         clarq_model** out, char** trace_json) {
  if (trace_json) *trace_json = nullptr;
  return guard([&] {
    require(corpus, "corpus");
    require(kind, "kind");
    require(out, "out");
    *out = nullptr;
    if (rotation < 0 || rotation >= clarq::kFoldCount)
      throw clarq::UsageError("fold rotation must be in 0..4");
    const auto cfg = config_of(config_json);
    const auto& c = corpus->corpus;
    const clarq::LabelTable labels(c, clarq::LabelOptions{cfg.unanswered_same_topic});
    const auto index = clarq::build_question_index(c);
    const auto pools = clarq::build_candidate_pools(c, index, clarq::Dirichlet{cfg.question_mu},
                                                    cfg.pool_size);
    clarq::TrainRequest req;
    req.kind = clarq::parse_model_kind(kind);
    req.architecture = cfg.architecture_grid.front();
    req.train = cfg.train;
    req.train.seed = clarq::mix_seed(cfg.seed, 0x100 + static_cast<std::uint64_t>(rotation));
    req.data = cfg.data;
    req.data.sampling.seed = cfg.seed;
    const clarq::FoldAssignment folds(c);
    req.topics = folds.topics_in(clarq::FoldAssignment::roles(rotation).train);
    req.encoder = clarq::encoder_for(cfg.encoder);
    req.rotation = rotation;
    if (init_model) {
      if (!init_model->model.init)
        throw clarq::InputError("the supplied initial model holds no initial scorer");
      req.init_model = &init_model->model;
    }
    try {
      auto model = clarq::train_model(c, labels, pools, req);
      if (trace_json) *trace_json = dup_string(model.trace.to_json().dump(1));
      *out = new clarq_model{std::move(model)};
    } catch (const clarq::TrainingDiverged& e) {
      if (trace_json) *trace_json = dup_string(e.trace().to_json().dump(1));
      throw;
    }
  });
}

clarq_status clarq_model_load(const char* path, clarq_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new clarq_model{clarq::ModelFile::load(path)};
  });
}

clarq_status clarq_model_save(const clarq_model* model, const char* path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    model->model.save(path);
  });
}

clarq_status clarq_model_info(const clarq_model* model, char** out_json) {
  return guard([&] {
    require(model, "model");
    require(out_json, "out_json");
    const auto& m = model->model;
    json j = {{"kind", clarq::to_string(m.kind)},
              {"rotation", m.rotation},
              {"architecture", m.architecture.to_json()},
              {"train_config", m.train.to_json()},
              {"trace", m.trace.to_json()}};
    *out_json = dup_string(j.dump(1));
  });
}

void clarq_model_free(clarq_model* model) { delete model; }

clarq_status clarq_simulate(const clarq_corpus* corpus, const char* config_json,
                            const char* transcripts_path, const char* run_path,
                            char** out_json) {
  return guard([&] {
    require(corpus, "corpus");
    require(transcripts_path, "transcripts_path");
    require(run_path, "run_path");
    require(out_json, "out_json");
    const auto cfg = config_of(config_json);
    const auto result = clarq::crossval_run(corpus->corpus, cfg);
    {
      std::ofstream out(transcripts_path);
      if (!out) throw clarq::InputError(std::string("cannot write ") + transcripts_path);
      clarq::write_transcripts(out, result.transcripts);
    }
    {
      std::ofstream out(run_path);
      if (!out) throw clarq::InputError(std::string("cannot write ") + run_path);
      clarq::write_run(out, clarq::question_run(result.transcripts), clarq::to_string(cfg.policy));
    }
    *out_json = dup_string(with_config(result.summary(), cfg).dump(1));
  });
}

clarq_status clarq_eval_cq(const clarq_corpus* corpus, const char* run_path,
                           const char* config_json, char** out_json) {
  return guard([&] {
    require(corpus, "corpus");
    require(run_path, "run_path");
    require(out_json, "out_json");
    const auto cfg = config_of(config_json);
    std::ifstream in(run_path);
    if (!in) throw clarq::InputError(std::string("cannot open ") + run_path);
    const auto run = clarq::read_run(in);
    *out_json = dup_string(with_config(clarq::evaluate_cq_run(corpus->corpus, run, cfg), cfg).dump(1));
  });
}

clarq_status clarq_eval_doc(const clarq_corpus* corpus, const char* transcripts_path,
                            const char* documents_path, const char* qrels_path,
                            const char* config_json, char** out_json) {
  return guard([&] {
    require(corpus, "corpus");
    require(transcripts_path, "transcripts_path");
    require(documents_path, "documents_path");
    require(qrels_path, "qrels_path");
    require(out_json, "out_json");
    const auto cfg = config_of(config_json);
    std::ifstream in(transcripts_path);
    if (!in) throw clarq::InputError(std::string("cannot open ") + transcripts_path);
    const auto transcripts = clarq::read_transcripts(in);
    const auto docs = clarq::load_documents(documents_path);
    const auto qrels = clarq::load_qrels(qrels_path);
    *out_json = dup_string(
        with_config(clarq::evaluate_doc_task(corpus->corpus, transcripts, docs, qrels, cfg), cfg)
            .dump(1));
  });
}

clarq_status clarq_fisher_test(const double* a, const double* b, size_t n, uint64_t iterations,
                               uint64_t seed, double* p_value) {
  return guard([&] {
    require(p_value, "p_value");
    if (n > 0) {
      require(a, "a");
      require(b, "b");
    }
    clarq::FisherOptions opt;
    opt.iterations = iterations;
    opt.seed = seed;
    *p_value = clarq::fisher_randomization({a, n}, {b, n}, opt).p_value;
  });
}

clarq_status clarq_significance(const char* report_a_json, const char* report_b_json,
                                const char* metric, const char* config_json, char** out_json) {
  return guard([&] {
    require(report_a_json, "report_a_json");
    require(report_b_json, "report_b_json");
    require(metric, "metric");
    require(out_json, "out_json");
    const auto cfg = config_of(config_json);
    const auto r = clarq::compare_reports(parse_json(report_a_json, "first report"),
                                          parse_json(report_b_json, "second report"), metric, cfg);
    *out_json = dup_string(r.dump(1));
  });
}

clarq_status clarq_report(const char* inputs_json, const char* config_json, char** out_json,
                          char** out_table) {
  if (out_table) *out_table = nullptr;
  return guard([&] {
    require(inputs_json, "inputs_json");
    require(out_json, "out_json");
    const auto cfg = config_of(config_json);
    const auto in = parse_json(inputs_json, "report inputs");
    if (!in.is_array()) throw clarq::InputError("report inputs must be a JSON array");
    std::vector<clarq::NamedReport> inputs;
    for (const auto& e : in) {
      clarq::NamedReport r;
      r.name = e.at("name").get<std::string>();
      r.cq = e.value("cq", json());
      r.doc = e.value("doc", json());
      inputs.push_back(std::move(r));
    }
    const auto report = clarq::build_report(inputs, cfg);
    const std::string table = clarq::report_table(report);
    *out_json = dup_string(with_config(report, cfg).dump(1));
    if (out_table) *out_table = dup_string(table);
  });
}

}  // extern "C"
