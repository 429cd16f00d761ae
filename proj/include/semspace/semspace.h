/*
 * semspace C API.
 *
 * Every object is an opaque handle created by a *_load / *_train / *_open
 * style function and released with the matching *_free. Functions that can
 * fail return ss_status; on failure ss_last_error() holds a message for the
 * calling thread until its next failing call. Strings returned through
 * `char**` are owned by the caller and released with ss_string_free; strings
 * returned as `const char*` live as long as the handle they came from.
 *
 * Handles are immutable after construction and may be shared across threads.
 */
#ifndef SEMSPACE_SEMSPACE_H_
#define SEMSPACE_SEMSPACE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(SEMSPACE_BUILDING)
#define SS_API __declspec(dllexport)
#else
#define SS_API __declspec(dllimport)
#endif
#else
#define SS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum ss_status {
  SS_OK = 0,
  SS_ERR_INTERNAL = 1,
  SS_ERR_USAGE = 2,
  SS_ERR_IO = 3,
  SS_ERR_PARSE = 4,
  SS_ERR_VALIDATION = 5,
  SS_ERR_CONFIG = 6,
  SS_ERR_SHAPE = 7,
  SS_ERR_FORMAT = 8,
  SS_ERR_DEGENERATE_QUERY = 9,
  SS_ERR_UNEMBEDDABLE = 10,
  SS_ERR_NUMERIC = 11,
  SS_ERR_NOT_FOUND = 12,
  SS_ERR_UNDEFINED = 13
} ss_status;

SS_API const char* ss_version(void);
SS_API const char* ss_last_error(void);
/* Stable machine-readable name, e.g. "degenerate_query". */
SS_API const char* ss_status_name(ss_status status);
SS_API void ss_string_free(char* s);

/* ---- corpus ------------------------------------------------------------ */

typedef struct ss_corpus ss_corpus;

typedef enum ss_split { SS_SPLIT_TRAIN = 0, SS_SPLIT_VAL = 1, SS_SPLIT_TEST = 2 } ss_split;

typedef struct ss_synthetic_params {
  int64_t n_concepts;
  int64_t words_per_concept;
  int64_t n_docs;
  int64_t feature_dim;
  double noise_sigma;
  uint64_t seed;
  int64_t min_concepts_per_doc;
  int64_t max_concepts_per_doc;
  int64_t caption_words_per_concept;
  double train_fraction;
  double val_fraction;
} ss_synthetic_params;

SS_API void ss_synthetic_params_default(ss_synthetic_params* params);
SS_API ss_status ss_corpus_generate_synthetic(const ss_synthetic_params* params,
                                              ss_corpus** out);
SS_API ss_status ss_corpus_load(const char* path, ss_corpus** out);
SS_API ss_status ss_corpus_save(const ss_corpus* corpus, const char* path);
SS_API ss_status ss_corpus_filter_tags(const ss_corpus* corpus,
                                       int64_t min_tag_count, ss_corpus** out);
SS_API size_t ss_corpus_size(const ss_corpus* corpus);
SS_API size_t ss_corpus_split_size(const ss_corpus* corpus, ss_split split);
SS_API size_t ss_corpus_feature_dim(const ss_corpus* corpus);
SS_API void ss_corpus_free(ss_corpus* corpus);

/* ---- text embeddings --------------------------------------------------- */

typedef struct ss_text_embedder ss_text_embedder;

typedef enum ss_method {
  SS_METHOD_LDA = 0,
  SS_METHOD_WORD2VEC = 1,
  SS_METHOD_FASTTEXT = 2,
  SS_METHOD_DOC2VEC = 3,
  SS_METHOD_GLOVE = 4
} ss_method;

typedef enum ss_aggregation { SS_AGG_MEAN = 0, SS_AGG_TFIDF = 1 } ss_aggregation;

typedef struct ss_text_config {
  ss_method method;
  int32_t dim;
  int32_t epochs;
  int32_t window;
  int32_t negatives;
  int64_t min_count;
  int32_t min_n;
  int32_t max_n;
  double alpha; /* lda; <= 0 selects 50 / dim */
  double beta;
  int32_t sweeps;
  int32_t infer_sweeps;
  int32_t infer_steps;
  double x_max;
  double power;
  double learning_rate;
  uint64_t seed;
  int32_t workers; /* > 1 trades reproducibility for throughput */
} ss_text_config;

SS_API ss_status ss_method_parse(const char* name, ss_method* out);
SS_API const char* ss_method_name(ss_method method);
SS_API ss_status ss_aggregation_parse(const char* name, ss_aggregation* out);

SS_API ss_status ss_text_config_default(ss_method method, ss_text_config* out);
SS_API ss_status ss_text_train(const ss_corpus* corpus,
                               const ss_text_config* config,
                               ss_text_embedder** out);
SS_API ss_status ss_text_load(const char* path, ss_text_embedder** out);
SS_API ss_status ss_text_save(const ss_text_embedder* embedder, const char* path);
SS_API ss_status ss_text_export_vectors(const ss_text_embedder* embedder,
                                        const char* path);
SS_API ss_method ss_text_method(const ss_text_embedder* embedder);
SS_API int32_t ss_text_dim(const ss_text_embedder* embedder);
SS_API size_t ss_text_vocab_size(const ss_text_embedder* embedder);
SS_API size_t ss_text_epoch_count(const ss_text_embedder* embedder);
SS_API double ss_text_epoch_objective(const ss_text_embedder* embedder, size_t i);
SS_API size_t ss_text_warning_count(const ss_text_embedder* embedder);
SS_API const char* ss_text_warning(const ss_text_embedder* embedder, size_t i);
/* Embeds raw text (tokenized internally) into out[0..dim). */
SS_API ss_status ss_text_embed(const ss_text_embedder* embedder, const char* text,
                               ss_aggregation aggregation, double* out,
                               size_t out_len);
SS_API void ss_text_free(ss_text_embedder* embedder);

/* ---- visual embedding -------------------------------------------------- */

typedef struct ss_visual_embedder ss_visual_embedder;

#define SS_MAX_HIDDEN_LAYERS 8

typedef struct ss_train_config {
  double learning_rate;
  double decay_factor;
  int64_t decay_interval;
  double momentum;
  int32_t batch_size;
  int64_t max_iterations;
  uint64_t seed;
  int32_t hidden[SS_MAX_HIDDEN_LAYERS];
  int32_t hidden_count;
  int64_t log_interval;
} ss_train_config;

SS_API void ss_train_config_default(ss_train_config* out);
SS_API ss_status ss_visual_train(const ss_corpus* corpus,
                                 const ss_text_embedder* text,
                                 ss_aggregation aggregation,
                                 const ss_train_config* config,
                                 ss_visual_embedder** out);
SS_API ss_status ss_visual_load(const char* path, ss_visual_embedder** out);
SS_API ss_status ss_visual_save(const ss_visual_embedder* visual, const char* path);
/* Loss curve of the training run that produced `visual` (empty when loaded). */
SS_API ss_status ss_visual_write_loss_curve(const ss_visual_embedder* visual,
                                            const char* path);
SS_API double ss_visual_initial_loss(const ss_visual_embedder* visual);
SS_API double ss_visual_final_loss(const ss_visual_embedder* visual);
SS_API int32_t ss_visual_input_dim(const ss_visual_embedder* visual);
SS_API int32_t ss_visual_output_dim(const ss_visual_embedder* visual);
SS_API ss_status ss_visual_forward(const ss_visual_embedder* visual,
                                   const double* features, size_t n_features,
                                   double* out, size_t out_len);
SS_API void ss_visual_free(ss_visual_embedder* visual);

/* ---- retrieval index --------------------------------------------------- */

typedef struct ss_index ss_index;

/* Embeds every test-split document through the regressor. */
SS_API ss_status ss_index_build_test(const ss_corpus* corpus,
                                     const ss_visual_embedder* visual,
                                     ss_index** out);
SS_API ss_status ss_index_load(const char* path, ss_index** out);
SS_API ss_status ss_index_save(const ss_index* index, const char* path);
SS_API size_t ss_index_size(const ss_index* index);
SS_API int32_t ss_index_dim(const ss_index* index);
SS_API const char* ss_index_id(const ss_index* index, size_t i);
/* 1 when ids and stored rows are bit-identical. */
SS_API int ss_index_equal(const ss_index* a, const ss_index* b);
SS_API void ss_index_free(ss_index* index);

/* ---- engine: loaded artifacts for querying and evaluation ---------------- */

typedef struct ss_engine ss_engine;
typedef struct ss_ranking ss_ranking;
typedef struct ss_report ss_report;

typedef struct ss_engine_paths {
  const char* corpus;       /* optional, NULL to skip */
  const char* text_model;   /* required */
  const char* visual_model; /* optional */
  const char* index;        /* optional */
  ss_aggregation aggregation;
} ss_engine_paths;

typedef enum ss_term_kind { SS_TERM_TEXT = 0, SS_TERM_IMAGE = 1 } ss_term_kind;

typedef struct ss_query_term {
  ss_term_kind kind;
  const char* value; /* text, or an indexed image id */
  double weight;     /* negative weights remove a concept */
} ss_query_term;

SS_API ss_status ss_engine_open(const ss_engine_paths* paths, ss_engine** out);
SS_API void ss_engine_free(ss_engine* engine);

SS_API ss_status ss_engine_query(const ss_engine* engine,
                                 const ss_query_term* terms, size_t n_terms,
                                 size_t k, ss_ranking** out);
/* "snow -leopard mountain:0.5 @doc12" mini-syntax. */
SS_API ss_status ss_engine_query_string(const ss_engine* engine,
                                        const char* query, size_t k,
                                        ss_ranking** out);
SS_API size_t ss_ranking_size(const ss_ranking* ranking);
SS_API const char* ss_ranking_id(const ss_ranking* ranking, size_t i);
SS_API double ss_ranking_score(const ss_ranking* ranking, size_t i);
SS_API size_t ss_ranking_dropped_count(const ss_ranking* ranking);
SS_API const char* ss_ranking_dropped(const ss_ranking* ranking, size_t i);
SS_API void ss_ranking_free(ss_ranking* ranking);

SS_API ss_status ss_engine_item_json(const ss_engine* engine, const char* id,
                                     char** out);
/* JSON array of in-vocabulary tokens starting with `prefix`. */
SS_API ss_status ss_engine_vocab_json(const ss_engine* engine,
                                      const char* prefix, size_t limit,
                                      char** out);

/* ---- evaluation ---------------------------------------------------------- */

typedef enum ss_protocol {
  SS_EVAL_P5 = 0,
  SS_EVAL_TAGMAP = 1,
  SS_EVAL_CONCEPTAP = 2,
  SS_EVAL_CORR = 3
} ss_protocol;

#define SS_POOL_TRAIN 1u
#define SS_POOL_VAL 2u
#define SS_POOL_TEST 4u

typedef struct ss_eval_options {
  /* p5: query fixture; NULL derives concept queries from test labels. */
  const char* queries_path;
  /* tagmap */
  double query_fraction;
  size_t max_queries;
  /* conceptap; empty list means every label in the pool */
  const char* const* concepts;
  size_t concept_count;
  /* corr */
  size_t n_pairs;
  uint64_t seed;
  /* SS_POOL_* bits; 0 selects the protocol default (test; all for corr) */
  uint32_t pool;
} ss_eval_options;

SS_API void ss_eval_options_default(ss_eval_options* out);
SS_API ss_status ss_protocol_parse(const char* name, ss_protocol* out);
SS_API ss_status ss_engine_eval(const ss_engine* engine, ss_protocol protocol,
                                const ss_eval_options* options,
                                ss_report** out);
SS_API const char* ss_report_json(const ss_report* report);
SS_API const char* ss_report_csv(const ss_report* report);
SS_API ss_status ss_report_aggregate(const ss_report* report, const char* name,
                                     double* out);
SS_API size_t ss_report_pair_count(const ss_report* report);
/* Any path may be NULL; pairs_csv only applies to the corr protocol. */
SS_API ss_status ss_report_write(const ss_report* report, const char* json_path,
                                 const char* csv_path, const char* pairs_csv_path);
SS_API void ss_report_free(ss_report* report);

#ifdef __cplusplus
}
#endif

#endif /* SEMSPACE_SEMSPACE_H_ */
