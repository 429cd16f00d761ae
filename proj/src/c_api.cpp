#include "semspace/semspace.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "corpus.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "retrieval.hpp"
#include "synthetic.hpp"
#include "text_embedder.hpp"
#include "visual.hpp"

using namespace semspace;

struct ss_corpus {
  Corpus value;
};

struct ss_text_embedder {
  TextEmbedder value;
};

struct ss_visual_embedder {
  VisualEmbedder value;
  std::vector<std::pair<std::int64_t, double>> loss_curve;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

struct ss_index {
  RetrievalIndex value;
};

struct ss_engine {
  Engine value;
};

struct ss_ranking {
  QueryAnswer value;
};

struct ss_report {
  EvalReport value;
  std::string json;
  std::string csv;
  std::optional<CorrelationStudy> study;
};

namespace {

thread_local std::string g_last_error;

ss_status record(ss_status status, const char* message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
ss_status guard(Fn&& fn) {
  try {
    fn();
    return SS_OK;
  } catch (const Error& e) {
    return record(static_cast<ss_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return record(SS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(SS_ERR_INTERNAL, e.what());
  } catch (...) {
    return record(SS_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* ptr, const char* what) {
  if (!ptr) fail(ErrorCode::kUsage, std::string(what) + " must not be NULL");
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

Aggregation to_aggregation(ss_aggregation a) {
  if (a != SS_AGG_MEAN && a != SS_AGG_TFIDF) {
    fail(ErrorCode::kConfig, "invalid aggregation value");
  }
  return a == SS_AGG_MEAN ? Aggregation::kMean : Aggregation::kTfIdf;
}

EmbeddingConfig to_config(const ss_text_config& c) {
  if (c.method < SS_METHOD_LDA || c.method > SS_METHOD_GLOVE) {
    fail(ErrorCode::kConfig, "invalid method value");
  }
  EmbeddingConfig out;
  out.method = static_cast<EmbeddingMethod>(c.method);
  out.dim = c.dim;
  out.epochs = c.epochs;
  out.window = c.window;
  out.negatives = c.negatives;
  out.min_count = c.min_count;
  out.min_n = c.min_n;
  out.max_n = c.max_n;
  out.alpha = c.alpha;
  out.beta = c.beta;
  out.sweeps = c.sweeps;
  out.infer_sweeps = c.infer_sweeps;
  out.infer_steps = c.infer_steps;
  out.x_max = c.x_max;
  out.power = c.power;
  out.learning_rate = c.learning_rate;
  out.seed = c.seed;
  out.workers = c.workers;
  return out;
}

std::vector<Split> to_pool(std::uint32_t mask) {
  std::vector<Split> pool;
  if (mask & SS_POOL_TRAIN) pool.push_back(Split::kTrain);
  if (mask & SS_POOL_VAL) pool.push_back(Split::kVal);
  if (mask & SS_POOL_TEST) pool.push_back(Split::kTest);
  return pool;
}

}  // namespace

extern "C" {

const char* ss_version(void) { return "1.0.0"; }

const char* ss_last_error(void) { return g_last_error.c_str(); }

const char* ss_status_name(ss_status status) {
  switch (status) {
    case SS_OK:
      return "ok";
    case SS_ERR_INTERNAL:
      return "internal";
    case SS_ERR_USAGE:
      return "usage";
    case SS_ERR_IO:
      return "io";
    case SS_ERR_PARSE:
      return "parse";
    case SS_ERR_VALIDATION:
      return "validation";
    case SS_ERR_CONFIG:
      return "config";
    case SS_ERR_SHAPE:
      return "shape";
    case SS_ERR_FORMAT:
      return "format";
    case SS_ERR_DEGENERATE_QUERY:
      return "degenerate_query";
    case SS_ERR_UNEMBEDDABLE:
      return "unembeddable_query";
    case SS_ERR_NUMERIC:
      return "numeric";
    case SS_ERR_NOT_FOUND:
      return "not_found";
    case SS_ERR_UNDEFINED:
      return "undefined";
  }
  return "unknown";
}

void ss_string_free(char* s) { std::free(s); }

/* ---- corpus ---- */

void ss_synthetic_params_default(ss_synthetic_params* params) {
  if (!params) return;
  SyntheticParams p;
  *params = {p.n_concepts, p.words_per_concept, p.n_docs,
             p.feature_dim, p.noise_sigma, p.seed,
             p.min_concepts_per_doc, p.max_concepts_per_doc,
             p.caption_words_per_concept, p.train_fraction, p.val_fraction};
}

ss_status ss_corpus_generate_synthetic(const ss_synthetic_params* params,
                                       ss_corpus** out) {
  return guard([&] {
    require(params, "params");
    require(out, "out");
    SyntheticParams p;
    p.n_concepts = params->n_concepts;
    p.words_per_concept = params->words_per_concept;
    p.n_docs = params->n_docs;
    p.feature_dim = params->feature_dim;
    p.noise_sigma = params->noise_sigma;
    p.seed = params->seed;
    p.min_concepts_per_doc = params->min_concepts_per_doc;
    p.max_concepts_per_doc = params->max_concepts_per_doc;
    p.caption_words_per_concept = params->caption_words_per_concept;
    p.train_fraction = params->train_fraction;
    p.val_fraction = params->val_fraction;
    *out = new ss_corpus{generate_synthetic_corpus(p)};
  });
}

ss_status ss_corpus_load(const char* path, ss_corpus** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new ss_corpus{load_corpus(path)};
  });
}

ss_status ss_corpus_save(const ss_corpus* corpus, const char* path) {
  return guard([&] {
    require(corpus, "corpus");
    require(path, "path");
    save_corpus(corpus->value, path);
  });
}

ss_status ss_corpus_filter_tags(const ss_corpus* corpus, int64_t min_tag_count,
                                ss_corpus** out) {
  return guard([&] {
    require(corpus, "corpus");
    require(out, "out");
    *out = new ss_corpus{filter_low_frequency_tags(corpus->value, min_tag_count)};
  });
}

size_t ss_corpus_size(const ss_corpus* corpus) {
  return corpus ? corpus->value.size() : 0;
}

size_t ss_corpus_split_size(const ss_corpus* corpus, ss_split split) {
  if (!corpus || split < SS_SPLIT_TRAIN || split > SS_SPLIT_TEST) return 0;
  return corpus->value.split(static_cast<Split>(split)).size();
}

size_t ss_corpus_feature_dim(const ss_corpus* corpus) {
  return corpus ? corpus->value.feature_dim() : 0;
}

void ss_corpus_free(ss_corpus* corpus) { delete corpus; }

/* ---- text ---- */

ss_status ss_method_parse(const char* name, ss_method* out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    *out = static_cast<ss_method>(parse_method(name));
  });
}

const char* ss_method_name(ss_method method) {
  if (method < SS_METHOD_LDA || method > SS_METHOD_GLOVE) return "unknown";
  return method_name(static_cast<EmbeddingMethod>(method)).data();
}

ss_status ss_aggregation_parse(const char* name, ss_aggregation* out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    *out = parse_aggregation(name) == Aggregation::kMean ? SS_AGG_MEAN
                                                         : SS_AGG_TFIDF;
  });
}

ss_status ss_text_config_default(ss_method method, ss_text_config* out) {
  return guard([&] {
    require(out, "out");
    if (method < SS_METHOD_LDA || method > SS_METHOD_GLOVE) {
      fail(ErrorCode::kConfig, "invalid method value");
    }
    const auto c = EmbeddingConfig::defaults(static_cast<EmbeddingMethod>(method));
    *out = {method,        c.dim,          c.epochs,       c.window,
            c.negatives,   c.min_count,    c.min_n,        c.max_n,
            c.alpha,       c.beta,         c.sweeps,       c.infer_sweeps,
            c.infer_steps, c.x_max,        c.power,        c.learning_rate,
            c.seed,        c.workers};
  });
}

ss_status ss_text_train(const ss_corpus* corpus, const ss_text_config* config,
                        ss_text_embedder** out) {
  return guard([&] {
    require(corpus, "corpus");
    require(config, "config");
    require(out, "out");
    *out = new ss_text_embedder{
        train_text_embedder(corpus->value, to_config(*config))};
  });
}

ss_status ss_text_load(const char* path, ss_text_embedder** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new ss_text_embedder{load_embedder(path)};
  });
}

ss_status ss_text_save(const ss_text_embedder* embedder, const char* path) {
  return guard([&] {
    require(embedder, "embedder");
    require(path, "path");
    save_embedder(embedder->value, path);
  });
}

ss_status ss_text_export_vectors(const ss_text_embedder* embedder,
                                 const char* path) {
  return guard([&] {
    require(embedder, "embedder");
    require(path, "path");
    export_word_vectors(embedder->value, path);
  });
}

ss_method ss_text_method(const ss_text_embedder* embedder) {
  return embedder ? static_cast<ss_method>(embedder->value.method())
                  : SS_METHOD_WORD2VEC;
}

int32_t ss_text_dim(const ss_text_embedder* embedder) {
  return embedder ? embedder->value.dim() : 0;
}

size_t ss_text_vocab_size(const ss_text_embedder* embedder) {
  return embedder ? embedder->value.vocabulary().size() : 0;
}

size_t ss_text_epoch_count(const ss_text_embedder* embedder) {
  return embedder ? embedder->value.log().epoch_objective.size() : 0;
}

double ss_text_epoch_objective(const ss_text_embedder* embedder, size_t i) {
  if (!embedder || i >= embedder->value.log().epoch_objective.size()) return 0.0;
  return embedder->value.log().epoch_objective[i];
}

size_t ss_text_warning_count(const ss_text_embedder* embedder) {
  return embedder ? embedder->value.log().warnings.size() : 0;
}

const char* ss_text_warning(const ss_text_embedder* embedder, size_t i) {
  if (!embedder || i >= embedder->value.log().warnings.size()) return "";
  return embedder->value.log().warnings[i].c_str();
}

ss_status ss_text_embed(const ss_text_embedder* embedder, const char* text,
                        ss_aggregation aggregation, double* out,
                        size_t out_len) {
  return guard([&] {
    require(embedder, "embedder");
    require(text, "text");
    require(out, "out");
    if (out_len < static_cast<size_t>(embedder->value.dim())) {
      fail(ErrorCode::kShape, "output buffer shorter than the embedding");
    }
    const auto tokens = tokenize(text);
    const auto v = embedder->value.embed(tokens, to_aggregation(aggregation));
    std::copy(v.vector.begin(), v.vector.end(), out);
  });
}

void ss_text_free(ss_text_embedder* embedder) { delete embedder; }

/* ---- visual ---- */

void ss_train_config_default(ss_train_config* out) {
  if (!out) return;
  TrainConfig c;
  *out = {};
  out->learning_rate = c.learning_rate;
  out->decay_factor = c.decay_factor;
  out->decay_interval = c.decay_interval;
  out->momentum = c.momentum;
  out->batch_size = c.batch_size;
  out->max_iterations = c.max_iterations;
  out->seed = c.seed;
  out->hidden_count = static_cast<int32_t>(c.hidden.size());
  for (size_t i = 0; i < c.hidden.size(); ++i) out->hidden[i] = c.hidden[i];
  out->log_interval = c.log_interval;
}

ss_status ss_visual_train(const ss_corpus* corpus, const ss_text_embedder* text,
                          ss_aggregation aggregation,
                          const ss_train_config* config,
                          ss_visual_embedder** out) {
  return guard([&] {
    require(corpus, "corpus");
    require(text, "text");
    require(config, "config");
    require(out, "out");
    if (config->hidden_count < 0 || config->hidden_count > SS_MAX_HIDDEN_LAYERS) {
      fail(ErrorCode::kConfig, "hidden_count out of range");
    }
    TrainConfig c;
    c.learning_rate = config->learning_rate;
    c.decay_factor = config->decay_factor;
    c.decay_interval = config->decay_interval;
    c.momentum = config->momentum;
    c.batch_size = config->batch_size;
    c.max_iterations = config->max_iterations;
    c.seed = config->seed;
    c.hidden.assign(config->hidden, config->hidden + config->hidden_count);
    c.log_interval = config->log_interval;
    auto result = train_visual(corpus->value, text->value,
                               to_aggregation(aggregation), c);
    *out = new ss_visual_embedder{std::move(result.model),
                                  std::move(result.loss_curve),
                                  result.initial_loss, result.final_loss};
  });
}

ss_status ss_visual_load(const char* path, ss_visual_embedder** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new ss_visual_embedder{load_visual(path), {}, 0.0, 0.0};
  });
}

ss_status ss_visual_save(const ss_visual_embedder* visual, const char* path) {
  return guard([&] {
    require(visual, "visual");
    require(path, "path");
    save_visual(visual->value, path);
  });
}

ss_status ss_visual_write_loss_curve(const ss_visual_embedder* visual,
                                     const char* path) {
  return guard([&] {
    require(visual, "visual");
    require(path, "path");
    write_loss_curve_csv(visual->loss_curve, path);
  });
}

double ss_visual_initial_loss(const ss_visual_embedder* visual) {
  return visual ? visual->initial_loss : 0.0;
}

double ss_visual_final_loss(const ss_visual_embedder* visual) {
  return visual ? visual->final_loss : 0.0;
}

int32_t ss_visual_input_dim(const ss_visual_embedder* visual) {
  return visual ? visual->value.input_dim() : 0;
}

int32_t ss_visual_output_dim(const ss_visual_embedder* visual) {
  return visual ? visual->value.output_dim() : 0;
}

ss_status ss_visual_forward(const ss_visual_embedder* visual,
                            const double* features, size_t n_features,
                            double* out, size_t out_len) {
  return guard([&] {
    require(visual, "visual");
    require(features, "features");
    require(out, "out");
    if (out_len < static_cast<size_t>(visual->value.output_dim())) {
      fail(ErrorCode::kShape, "output buffer shorter than the embedding");
    }
    const auto y = visual->value.forward({features, n_features});
    std::copy(y.begin(), y.end(), out);
  });
}

void ss_visual_free(ss_visual_embedder* visual) { delete visual; }

/* ---- index ---- */

ss_status ss_index_build_test(const ss_corpus* corpus,
                              const ss_visual_embedder* visual, ss_index** out) {
  return guard([&] {
    require(corpus, "corpus");
    require(visual, "visual");
    require(out, "out");
    *out = new ss_index{build_test_index(corpus->value, visual->value)};
  });
}

ss_status ss_index_load(const char* path, ss_index** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new ss_index{load_index(path)};
  });
}

ss_status ss_index_save(const ss_index* index, const char* path) {
  return guard([&] {
    require(index, "index");
    require(path, "path");
    save_index(index->value, path);
  });
}

size_t ss_index_size(const ss_index* index) {
  return index ? index->value.size() : 0;
}

int32_t ss_index_dim(const ss_index* index) {
  return index ? index->value.dim() : 0;
}

const char* ss_index_id(const ss_index* index, size_t i) {
  if (!index || i >= index->value.size()) return nullptr;
  return index->value.ids()[i].c_str();
}

int ss_index_equal(const ss_index* a, const ss_index* b) {
  return a && b && a->value == b->value ? 1 : 0;
}

void ss_index_free(ss_index* index) { delete index; }

/* ---- engine ---- */

ss_status ss_engine_open(const ss_engine_paths* paths, ss_engine** out) {
  return guard([&] {
    require(paths, "paths");
    require(out, "out");
    require(paths->text_model, "text_model");
    EnginePaths p;
    p.text_model = paths->text_model;
    if (paths->corpus) p.corpus = paths->corpus;
    if (paths->visual_model) p.visual_model = paths->visual_model;
    if (paths->index) p.index = paths->index;
    *out = new ss_engine{Engine::open(p, to_aggregation(paths->aggregation))};
  });
}

void ss_engine_free(ss_engine* engine) { delete engine; }

ss_status ss_engine_query(const ss_engine* engine, const ss_query_term* terms,
                          size_t n_terms, size_t k, ss_ranking** out) {
  return guard([&] {
    require(engine, "engine");
    require(out, "out");
    if (n_terms > 0) require(terms, "terms");
    std::vector<QueryTerm> q;
    for (size_t i = 0; i < n_terms; ++i) {
      require(terms[i].value, "term value");
      if (terms[i].kind != SS_TERM_TEXT && terms[i].kind != SS_TERM_IMAGE) {
        fail(ErrorCode::kUsage, "invalid term kind");
      }
      q.push_back({terms[i].kind == SS_TERM_TEXT ? TermKind::kText
                                                 : TermKind::kImage,
                   terms[i].value, terms[i].weight});
    }
    *out = new ss_ranking{engine->value.query(q, k)};
  });
}

ss_status ss_engine_query_string(const ss_engine* engine, const char* query,
                                 size_t k, ss_ranking** out) {
  return guard([&] {
    require(engine, "engine");
    require(query, "query");
    require(out, "out");
    *out = new ss_ranking{engine->value.query(parse_query_string(query), k)};
  });
}

size_t ss_ranking_size(const ss_ranking* ranking) {
  return ranking ? ranking->value.results.size() : 0;
}

const char* ss_ranking_id(const ss_ranking* ranking, size_t i) {
  if (!ranking || i >= ranking->value.results.size()) return nullptr;
  return ranking->value.results[i].id.c_str();
}

double ss_ranking_score(const ss_ranking* ranking, size_t i) {
  if (!ranking || i >= ranking->value.results.size()) return 0.0;
  return ranking->value.results[i].score;
}

size_t ss_ranking_dropped_count(const ss_ranking* ranking) {
  return ranking ? ranking->value.dropped_tokens.size() : 0;
}

const char* ss_ranking_dropped(const ss_ranking* ranking, size_t i) {
  if (!ranking || i >= ranking->value.dropped_tokens.size()) return nullptr;
  return ranking->value.dropped_tokens[i].c_str();
}

void ss_ranking_free(ss_ranking* ranking) { delete ranking; }

ss_status ss_engine_item_json(const ss_engine* engine, const char* id,
                              char** out) {
  return guard([&] {
    require(engine, "engine");
    require(id, "id");
    require(out, "out");
    *out = duplicate(engine->value.item_json(id));
  });
}

ss_status ss_engine_vocab_json(const ss_engine* engine, const char* prefix,
                               size_t limit, char** out) {
  return guard([&] {
    require(engine, "engine");
    require(out, "out");
    const nlohmann::json tokens =
        engine->value.vocab_prefix(prefix ? prefix : "", limit);
    *out = duplicate(tokens.dump());
  });
}

/* ---- evaluation ---- */

void ss_eval_options_default(ss_eval_options* out) {
  if (!out) return;
  *out = {};
  out->query_fraction = 0.05;
  out->n_pairs = 20000;
  out->seed = 1;
}

ss_status ss_protocol_parse(const char* name, ss_protocol* out) {
  return guard([&] {
    require(name, "name");
    require(out, "out");
    const std::string n = name;
    if (n == "p5") {
      *out = SS_EVAL_P5;
    } else if (n == "tagmap") {
      *out = SS_EVAL_TAGMAP;
    } else if (n == "conceptap") {
      *out = SS_EVAL_CONCEPTAP;
    } else if (n == "corr") {
      *out = SS_EVAL_CORR;
    } else {
      fail(ErrorCode::kUsage, "unknown protocol '" + n +
                                  "' (expected p5, tagmap, conceptap, corr)");
    }
  });
}

ss_status ss_engine_eval(const ss_engine* engine, ss_protocol protocol,
                         const ss_eval_options* options, ss_report** out) {
  return guard([&] {
    require(engine, "engine");
    require(out, "out");
    ss_eval_options opts;
    ss_eval_options_default(&opts);
    if (options) opts = *options;
    const auto& e = engine->value;
    auto report = std::make_unique<ss_report>();

    switch (protocol) {
      case SS_EVAL_P5: {
        std::vector<QuerySpec> queries;
        if (opts.queries_path) {
          queries = load_query_fixture(opts.queries_path);
        } else {
          std::set<std::string> labels;
          for (const auto* doc : e.corpus().split(Split::kTest)) {
            if (doc->labels) labels.insert(doc->labels->begin(), doc->labels->end());
          }
          if (labels.empty()) {
            fail(ErrorCode::kValidation,
                 "p5 without a query fixture needs labelled test documents");
          }
          std::vector<std::string> concepts(labels.begin(), labels.end());
          queries = concept_queries(concepts);
        }
        report->value = eval_p5_suite(e.index(), e.text(), e.aggregation(),
                                      queries, e.corpus());
        break;
      }
      case SS_EVAL_TAGMAP:
      case SS_EVAL_CONCEPTAP: {
        EvalSplit split;
        if (opts.pool) split.pool = to_pool(opts.pool);
        split.query_fraction = opts.query_fraction;
        split.seed = opts.seed;
        split.max_queries = opts.max_queries;
        if (protocol == SS_EVAL_TAGMAP) {
          report->value = eval_tag_query_map(e.corpus(), e.visual(), e.text(),
                                             e.aggregation(), split);
        } else {
          std::vector<std::string> concepts;
          for (size_t i = 0; i < opts.concept_count; ++i) {
            require(opts.concepts[i], "concept");
            concepts.emplace_back(opts.concepts[i]);
          }
          report->value = eval_concept_ap(e.corpus(), e.visual(), e.text(),
                                          e.aggregation(), concepts, split);
        }
        break;
      }
      case SS_EVAL_CORR: {
        const auto pool = to_pool(opts.pool);
        report->study = distance_correlation_study(
            e.corpus(), e.text(), e.visual(), e.aggregation(), opts.n_pairs,
            opts.seed, pool);
        report->value = correlation_report(*report->study);
        break;
      }
      default:
        fail(ErrorCode::kUsage, "invalid protocol value");
    }
    report->json = report_json(report->value);
    report->csv = report_csv(report->value);
    *out = report.release();
  });
}

const char* ss_report_json(const ss_report* report) {
  return report ? report->json.c_str() : "";
}

const char* ss_report_csv(const ss_report* report) {
  return report ? report->csv.c_str() : "";
}

ss_status ss_report_aggregate(const ss_report* report, const char* name,
                              double* out) {
  return guard([&] {
    require(report, "report");
    require(name, "name");
    require(out, "out");
    auto it = report->value.aggregates.find(name);
    if (it == report->value.aggregates.end()) {
      fail(ErrorCode::kNotFound, std::string("no aggregate '") + name + "'");
    }
    *out = it->second;
  });
}

size_t ss_report_pair_count(const ss_report* report) {
  return report && report->study ? report->study->pairs.size() : 0;
}

ss_status ss_report_write(const ss_report* report, const char* json_path,
                          const char* csv_path, const char* pairs_csv_path) {
  return guard([&] {
    require(report, "report");
    auto write = [](const char* path, const std::string& text) {
      std::ofstream out(path, std::ios::trunc);
      if (!out) fail(ErrorCode::kIo, std::string("cannot write '") + path + "'");
      out << text;
      if (!out) fail(ErrorCode::kIo, std::string("error writing '") + path + "'");
    };
    if (json_path) write(json_path, report->json + "\n");
    if (csv_path) write(csv_path, report->csv);
    if (pairs_csv_path) {
      if (!report->study) {
        fail(ErrorCode::kUsage, "pair samples exist only for the corr protocol");
      }
      write_pairs_csv(*report->study, pairs_csv_path);
    }
  });
}

void ss_report_free(ss_report* report) { delete report; }

}  // extern "C"
