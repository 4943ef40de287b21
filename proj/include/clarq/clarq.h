/* C interface to the clarifying-question selection library.
 *
 * Every function returns a clarq_status. On failure the message is available
 * from clarq_last_error() on the calling thread until the next call. Strings
 * returned through char** are owned by the caller and released with
 * clarq_string_free. Configs are JSON documents; NULL means "all defaults". */
#ifndef CLARQ_H
#define CLARQ_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CLARQ_API __declspec(dllexport)
#else
#define CLARQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum clarq_status {
  CLARQ_OK = 0,
  CLARQ_ERR_INPUT = 1,   /* malformed or inconsistent input */
  CLARQ_ERR_NUMERIC = 2, /* divergence or non-finite values */
  CLARQ_ERR_USAGE = 3,   /* invalid argument to the API */
  CLARQ_ERR_INTERNAL = 4
} clarq_status;

typedef struct clarq_corpus clarq_corpus;
typedef struct clarq_model clarq_model;

CLARQ_API const char* clarq_last_error(void);
CLARQ_API const char* clarq_version(void);
CLARQ_API void clarq_string_free(char* s);

/* Corpus from the four JSONL files. */
CLARQ_API clarq_status clarq_corpus_load(const char* topics_path, const char* facets_path,
                                         const char* questions_path, const char* answers_path,
                                         clarq_corpus** out);
/* Corpus from a serialized corpus file written by clarq_corpus_save. */
CLARQ_API clarq_status clarq_corpus_open(const char* path, clarq_corpus** out);
CLARQ_API clarq_status clarq_corpus_save(const clarq_corpus* corpus, const char* path);
/* Counts, label statistics and conversation expansion as JSON. */
CLARQ_API clarq_status clarq_corpus_summary(const clarq_corpus* corpus, const char* config_json,
                                            char** out_json);
CLARQ_API void clarq_corpus_free(clarq_corpus* corpus);

/* Normalized config with every default filled in. */
CLARQ_API clarq_status clarq_config_effective(const char* config_json, char** out_json);

/* kind: "init", "minit" or "mmrbert". rotation in 0..4 selects the training
 * folds. init_model may be NULL; for mmrbert it supplies the encoder. The
 * config's first architecture_grid entry is used. trace_json (optional)
 * receives the loss trace, also when training diverges. */
CLARQ_API clarq_status clarq_train(const clarq_corpus* corpus, const char* kind, int rotation,
                                   const char* config_json, const clarq_model* init_model,
                                   clarq_model** out, char** trace_json);
CLARQ_API clarq_status clarq_model_load(const char* path, clarq_model** out);
CLARQ_API clarq_status clarq_model_save(const clarq_model* model, const char* path);
/* Kind, architecture, training config and loss trace as JSON. */
CLARQ_API clarq_status clarq_model_info(const clarq_model* model, char** out_json);
CLARQ_API void clarq_model_free(clarq_model* model);

/* Cross-validated simulation. Writes transcripts (JSONL) and a TREC run file;
 * returns the per-rotation selection summary. */
CLARQ_API clarq_status clarq_simulate(const clarq_corpus* corpus, const char* config_json,
                                      const char* transcripts_path, const char* run_path,
                                      char** out_json);

/* Conversation-task metrics of a question run file. */
CLARQ_API clarq_status clarq_eval_cq(const clarq_corpus* corpus, const char* run_path,
                                     const char* config_json, char** out_json);
/* Document-task metrics of revised-QL retrieval after each transcript. */
CLARQ_API clarq_status clarq_eval_doc(const clarq_corpus* corpus, const char* transcripts_path,
                                      const char* documents_path, const char* qrels_path,
                                      const char* config_json, char** out_json);

/* Paired randomization test on raw per-query values. */
CLARQ_API clarq_status clarq_fisher_test(const double* a, const double* b, size_t n,
                                         uint64_t iterations, uint64_t seed, double* p_value);
/* Paired randomization test between two evaluation reports (JSON text). */
CLARQ_API clarq_status clarq_significance(const char* report_a_json, const char* report_b_json,
                                          const char* metric, const char* config_json,
                                          char** out_json);
/* inputs_json: [{"name": str, "cq": report|null, "doc": report|null}, ...].
 * out_table (optional) receives a tab-separated summary. */
CLARQ_API clarq_status clarq_report(const char* inputs_json, const char* config_json,
                                    char** out_json, char** out_table);

#ifdef __cplusplus
}
#endif

#endif /* CLARQ_H */
