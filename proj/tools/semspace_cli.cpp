// semspace command line: train, index, query, evaluate and serve.
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "http_server.hpp"
#include "semspace/semspace.h"

namespace {

using nlohmann::json;
using semspace_tools::StatusError;

void check(ss_status status) {
  if (status != SS_OK) throw StatusError(status, ss_last_error());
}

template <typename T, void (*Free)(T*)>
struct Owned {
  T* ptr = nullptr;
  Owned() = default;
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
  ~Owned() {
    if (ptr) Free(ptr);
  }
  T** out() { return &ptr; }
  T* get() const { return ptr; }
};

using Corpus = Owned<ss_corpus, ss_corpus_free>;
using Text = Owned<ss_text_embedder, ss_text_free>;
using Visual = Owned<ss_visual_embedder, ss_visual_free>;
using Index = Owned<ss_index, ss_index_free>;
using Engine = Owned<ss_engine, ss_engine_free>;
using Ranking = Owned<ss_ranking, ss_ranking_free>;
using Report = Owned<ss_report, ss_report_free>;

// Values from the config file, overridden by flags.
struct Settings {
  std::string corpus;
  std::string text_model;
  std::string visual_model;
  std::string index;
  std::string aggregation = "mean";
  std::optional<std::uint64_t> seed;
  json text = json::object();
  json visual = json::object();
  json server = json::object();
  json eval = json::object();
};

Settings load_settings(const std::string& path) {
  Settings s;
  if (path.empty()) return s;
  std::ifstream in(path);
  if (!in) throw StatusError(SS_ERR_IO, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw StatusError(SS_ERR_PARSE, "config '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw StatusError(SS_ERR_CONFIG, "config must be a JSON object");
  static const std::vector<std::string> known = {
      "corpus", "text_model", "visual_model", "index", "aggregation",
      "seed",   "text",       "visual",       "server", "eval"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw StatusError(SS_ERR_CONFIG, "unknown config key '" + key + "'");
    }
  }
  try {
    s.corpus = j.value("corpus", "");
    s.text_model = j.value("text_model", "");
    s.visual_model = j.value("visual_model", "");
    s.index = j.value("index", "");
    s.aggregation = j.value("aggregation", "mean");
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    s.text = j.value("text", json::object());
    s.visual = j.value("visual", json::object());
    s.server = j.value("server", json::object());
    s.eval = j.value("eval", json::object());
  } catch (const json::exception& e) {
    throw StatusError(SS_ERR_CONFIG, "config '" + path + "': " + e.what());
  }
  return s;
}

// Pre-scan so that config values become flag defaults.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

template <typename T>
void take(const json& section, const char* key, T& field) {
  if (!section.contains(key)) return;
  try {
    field = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw StatusError(SS_ERR_CONFIG, std::string("config field '") + key +
                                         "': " + e.what());
  }
}

ss_aggregation parse_aggregation(const std::string& name) {
  ss_aggregation a;
  check(ss_aggregation_parse(name.c_str(), &a));
  return a;
}

void require_path(const std::string& value, const char* what) {
  if (value.empty()) {
    throw StatusError(SS_ERR_USAGE, std::string("missing ") + what +
                                        " (flag or config)");
  }
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

struct TextFlags {
  std::string method = "word2vec";
  std::optional<int> dim, epochs, window, negatives, min_n, max_n, sweeps,
      infer_sweeps, infer_steps, workers;
  std::optional<long long> min_count;
  std::optional<double> alpha, beta, x_max, power, learning_rate;
  std::string export_vectors;
};

ss_text_config text_config(const Settings& s, const TextFlags& f) {
  std::string method = f.method;
  ss_method m;
  check(ss_method_parse(method.c_str(), &m));
  ss_text_config c;
  check(ss_text_config_default(m, &c));
  const auto& t = s.text;
  take(t, "dim", c.dim);
  take(t, "epochs", c.epochs);
  take(t, "window", c.window);
  take(t, "negatives", c.negatives);
  take(t, "min_count", c.min_count);
  take(t, "min_n", c.min_n);
  take(t, "max_n", c.max_n);
  take(t, "alpha", c.alpha);
  take(t, "beta", c.beta);
  take(t, "sweeps", c.sweeps);
  take(t, "infer_sweeps", c.infer_sweeps);
  take(t, "infer_steps", c.infer_steps);
  take(t, "x_max", c.x_max);
  take(t, "power", c.power);
  take(t, "learning_rate", c.learning_rate);
  take(t, "workers", c.workers);
  if (s.seed) c.seed = *s.seed;
  if (f.dim) c.dim = *f.dim;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.window) c.window = *f.window;
  if (f.negatives) c.negatives = *f.negatives;
  if (f.min_count) c.min_count = *f.min_count;
  if (f.min_n) c.min_n = *f.min_n;
  if (f.max_n) c.max_n = *f.max_n;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.beta) c.beta = *f.beta;
  if (f.sweeps) c.sweeps = *f.sweeps;
  if (f.infer_sweeps) c.infer_sweeps = *f.infer_sweeps;
  if (f.infer_steps) c.infer_steps = *f.infer_steps;
  if (f.x_max) c.x_max = *f.x_max;
  if (f.power) c.power = *f.power;
  if (f.learning_rate) c.learning_rate = *f.learning_rate;
  if (f.workers) c.workers = *f.workers;
  return c;
}

struct VisualFlags {
  std::optional<double> learning_rate, decay_factor, momentum;
  std::optional<long long> decay_interval, iterations, log_interval;
  std::optional<int> batch_size;
  std::optional<std::vector<int>> hidden;
  std::string loss_csv;
};

ss_train_config visual_config(const Settings& s, const VisualFlags& f) {
  ss_train_config c;
  ss_train_config_default(&c);
  const auto& v = s.visual;
  take(v, "learning_rate", c.learning_rate);
  take(v, "decay_factor", c.decay_factor);
  take(v, "decay_interval", c.decay_interval);
  take(v, "momentum", c.momentum);
  take(v, "batch_size", c.batch_size);
  take(v, "max_iterations", c.max_iterations);
  take(v, "log_interval", c.log_interval);
  std::optional<std::vector<int>> hidden;
  if (v.contains("hidden")) {
    std::vector<int> h;
    take(v, "hidden", h);
    hidden = h;
  }
  if (f.hidden) hidden = f.hidden;
  if (hidden) {
    if (hidden->size() > SS_MAX_HIDDEN_LAYERS) {
      throw StatusError(SS_ERR_CONFIG, "too many hidden layers");
    }
    c.hidden_count = static_cast<int32_t>(hidden->size());
    for (std::size_t i = 0; i < hidden->size(); ++i) c.hidden[i] = (*hidden)[i];
  }
  if (s.seed) c.seed = *s.seed;
  if (f.learning_rate) c.learning_rate = *f.learning_rate;
  if (f.decay_factor) c.decay_factor = *f.decay_factor;
  if (f.decay_interval) c.decay_interval = *f.decay_interval;
  if (f.momentum) c.momentum = *f.momentum;
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.iterations) c.max_iterations = *f.iterations;
  if (f.log_interval) c.log_interval = *f.log_interval;
  return c;
}

ss_engine* open_engine(const Settings& s, Engine& engine) {
  require_path(s.text_model, "--text-model");
  ss_engine_paths paths{opt(s.corpus), s.text_model.c_str(), opt(s.visual_model),
                        opt(s.index), parse_aggregation(s.aggregation)};
  check(ss_engine_open(&paths, engine.out()));
  return engine.get();
}

uint32_t pool_bits(const std::vector<std::string>& names) {
  uint32_t bits = 0;
  for (const auto& n : names) {
    if (n == "train") {
      bits |= SS_POOL_TRAIN;
    } else if (n == "val") {
      bits |= SS_POOL_VAL;
    } else if (n == "test") {
      bits |= SS_POOL_TEST;
    } else {
      throw StatusError(SS_ERR_USAGE, "unknown split '" + n + "'");
    }
  }
  return bits;
}

int run(int argc, char** argv) {
  Settings s = load_settings(find_config_path(argc, argv));

  CLI::App app{"Joint text and image embedding engine"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Seed for every random component");

  auto add_paths = [&](CLI::App* cmd, bool corpus, bool text, bool visual,
                       bool index) {
    if (corpus) cmd->add_option("--corpus", s.corpus, "Corpus (JSON lines)");
    if (text) cmd->add_option("--text-model", s.text_model, "Text model file");
    if (visual) cmd->add_option("--visual-model", s.visual_model, "Visual model file");
    if (index) cmd->add_option("--index", s.index, "Index file");
  };
  auto add_aggregation = [&](CLI::App* cmd) {
    cmd->add_option("--aggregation", s.aggregation, "mean or tfidf");
  };

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic corpus");
  ss_synthetic_params syn;
  ss_synthetic_params_default(&syn);
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output corpus path")->required();
  gen->add_option("--concepts", syn.n_concepts, "Concept count");
  gen->add_option("--words", syn.words_per_concept, "Words per concept");
  gen->add_option("--docs", syn.n_docs, "Document count");
  gen->add_option("--features", syn.feature_dim, "Feature dimension");
  gen->add_option("--sigma", syn.noise_sigma, "Feature noise deviation");

  // filter-tags
  auto* filt = app.add_subcommand("filter-tags", "Drop rare tags and emptied documents");
  std::string filt_out;
  long long min_tag_count = 20;
  add_paths(filt, true, false, false, false);
  filt->add_option("--out", filt_out, "Output corpus path")->required();
  filt->add_option("--min-count", min_tag_count, "Minimum documents per tag");

  // train-text
  auto* tt = app.add_subcommand("train-text", "Train a text embedding model");
  TextFlags tf;
  std::string tt_out;
  add_paths(tt, true, false, false, false);
  if (s.text.contains("method")) take(s.text, "method", tf.method);
  tt->add_option("--method", tf.method, "lda, word2vec, fasttext, doc2vec, glove");
  tt->add_option("--out", tt_out, "Output model path")->required();
  tt->add_option("--dim", tf.dim, "Embedding dimension");
  tt->add_option("--epochs", tf.epochs);
  tt->add_option("--window", tf.window);
  tt->add_option("--negatives", tf.negatives);
  tt->add_option("--min-count", tf.min_count);
  tt->add_option("--min-n", tf.min_n);
  tt->add_option("--max-n", tf.max_n);
  tt->add_option("--alpha", tf.alpha);
  tt->add_option("--beta", tf.beta);
  tt->add_option("--sweeps", tf.sweeps);
  tt->add_option("--infer-sweeps", tf.infer_sweeps);
  tt->add_option("--infer-steps", tf.infer_steps);
  tt->add_option("--x-max", tf.x_max);
  tt->add_option("--power", tf.power);
  tt->add_option("--lr", tf.learning_rate);
  tt->add_option("--workers", tf.workers);
  tt->add_option("--export-vectors", tf.export_vectors, "Also write word vectors as text");

  // train-visual
  auto* tv = app.add_subcommand("train-visual", "Train the image-to-text regressor");
  VisualFlags vf;
  std::string tv_out;
  add_paths(tv, true, true, false, false);
  add_aggregation(tv);
  tv->add_option("--out", tv_out, "Output model path")->required();
  tv->add_option("--lr", vf.learning_rate);
  tv->add_option("--decay", vf.decay_factor);
  tv->add_option("--decay-interval", vf.decay_interval);
  tv->add_option("--momentum", vf.momentum);
  tv->add_option("--batch", vf.batch_size);
  tv->add_option("--iterations", vf.iterations);
  tv->add_option("--log-interval", vf.log_interval);
  tv->add_option("--hidden", vf.hidden, "Hidden layer widths");
  tv->add_option("--loss-csv", vf.loss_csv, "Write the loss curve");

  // build-index
  auto* bi = app.add_subcommand("build-index", "Embed the test split into an index");
  std::string bi_out;
  add_paths(bi, true, false, true, false);
  bi->add_option("--out", bi_out, "Output index path")->required();

  // query
  auto* qc = app.add_subcommand("query", "Rank indexed images for a query");
  std::string query_text;
  std::size_t k = 10;
  bool as_json = false;
  add_paths(qc, true, true, true, true);
  add_aggregation(qc);
  qc->add_option("query", query_text, "e.g. \"snow -leopard mountain:0.5 @img12\"")
      ->required();
  qc->add_option("-k", k, "Result count");
  qc->add_flag("--json", as_json, "Print JSON");

  // eval
  auto* ev = app.add_subcommand("eval", "Run an evaluation protocol");
  std::string protocol_name;
  ss_eval_options eo;
  ss_eval_options_default(&eo);
  std::string queries_path, out_json, out_csv, pairs_csv;
  std::vector<std::string> concepts, pool;
  take(s.eval, "queries", queries_path);
  take(s.eval, "query_fraction", eo.query_fraction);
  take(s.eval, "max_queries", eo.max_queries);
  take(s.eval, "n_pairs", eo.n_pairs);
  take(s.eval, "concepts", concepts);
  take(s.eval, "pool", pool);
  add_paths(ev, true, true, true, true);
  add_aggregation(ev);
  ev->add_option("protocol", protocol_name, "p5, tagmap, conceptap, corr")->required();
  ev->add_option("--queries", queries_path, "Query fixture for p5");
  ev->add_option("--query-fraction", eo.query_fraction);
  ev->add_option("--max-queries", eo.max_queries);
  ev->add_option("--concepts", concepts)->delimiter(',');
  ev->add_option("--pairs", eo.n_pairs, "Pair count for corr");
  ev->add_option("--pool", pool, "Splits to draw from")->delimiter(',');
  ev->add_option("--out-json", out_json);
  ev->add_option("--out-csv", out_csv);
  ev->add_option("--pairs-csv", pairs_csv);

  // serve
  auto* sv = app.add_subcommand("serve", "Serve the HTTP query API");
  semspace_tools::ServerOptions so;
  take(s.server, "host", so.host);
  take(s.server, "port", so.port);
  take(s.server, "ui_dir", so.ui_dir);
  add_paths(sv, true, true, true, true);
  add_aggregation(sv);
  sv->add_option("--host", so.host);
  sv->add_option("--port", so.port, "0 picks a free port");
  sv->add_option("--ui-dir", so.ui_dir, "Static files served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : SS_ERR_USAGE;
  }
  if (seed) s.seed = seed;

  if (gen->parsed()) {
    if (s.seed) syn.seed = *s.seed;
    Corpus corpus;
    check(ss_corpus_generate_synthetic(&syn, corpus.out()));
    check(ss_corpus_save(corpus.get(), gen_out.c_str()));
    std::cerr << "wrote " << ss_corpus_size(corpus.get()) << " documents\n";
  } else if (filt->parsed()) {
    require_path(s.corpus, "--corpus");
    Corpus corpus, filtered;
    check(ss_corpus_load(s.corpus.c_str(), corpus.out()));
    check(ss_corpus_filter_tags(corpus.get(), min_tag_count, filtered.out()));
    check(ss_corpus_save(filtered.get(), filt_out.c_str()));
    std::cerr << "kept " << ss_corpus_size(filtered.get()) << " of "
              << ss_corpus_size(corpus.get()) << " documents\n";
  } else if (tt->parsed()) {
    require_path(s.corpus, "--corpus");
    const auto config = text_config(s, tf);
    Corpus corpus;
    Text text;
    check(ss_corpus_load(s.corpus.c_str(), corpus.out()));
    check(ss_text_train(corpus.get(), &config, text.out()));
    for (std::size_t i = 0; i < ss_text_warning_count(text.get()); ++i) {
      std::cerr << "warning: " << ss_text_warning(text.get(), i) << "\n";
    }
    check(ss_text_save(text.get(), tt_out.c_str()));
    if (!tf.export_vectors.empty()) {
      check(ss_text_export_vectors(text.get(), tf.export_vectors.c_str()));
    }
    std::cerr << "vocabulary " << ss_text_vocab_size(text.get()) << ", dim "
              << ss_text_dim(text.get()) << "\n";
  } else if (tv->parsed()) {
    require_path(s.corpus, "--corpus");
    require_path(s.text_model, "--text-model");
    const auto config = visual_config(s, vf);
    Corpus corpus;
    Text text;
    Visual visual;
    check(ss_corpus_load(s.corpus.c_str(), corpus.out()));
    check(ss_text_load(s.text_model.c_str(), text.out()));
    check(ss_visual_train(corpus.get(), text.get(), parse_aggregation(s.aggregation),
                          &config, visual.out()));
    check(ss_visual_save(visual.get(), tv_out.c_str()));
    if (!vf.loss_csv.empty()) {
      check(ss_visual_write_loss_curve(visual.get(), vf.loss_csv.c_str()));
    }
    std::cerr << "loss " << ss_visual_initial_loss(visual.get()) << " -> "
              << ss_visual_final_loss(visual.get()) << "\n";
  } else if (bi->parsed()) {
    require_path(s.corpus, "--corpus");
    require_path(s.visual_model, "--visual-model");
    Corpus corpus;
    Visual visual;
    Index index;
    check(ss_corpus_load(s.corpus.c_str(), corpus.out()));
    check(ss_visual_load(s.visual_model.c_str(), visual.out()));
    check(ss_index_build_test(corpus.get(), visual.get(), index.out()));
    check(ss_index_save(index.get(), bi_out.c_str()));
    std::cerr << "indexed " << ss_index_size(index.get()) << " images\n";
  } else if (qc->parsed()) {
    require_path(s.index, "--index");
    Engine engine;
    Ranking ranking;
    check(ss_engine_query_string(open_engine(s, engine), query_text.c_str(), k,
                                 ranking.out()));
    const auto* r = ranking.get();
    if (as_json) {
      json results = json::array();
      for (std::size_t i = 0; i < ss_ranking_size(r); ++i) {
        results.push_back({{"id", ss_ranking_id(r, i)}, {"score", ss_ranking_score(r, i)}});
      }
      json dropped = json::array();
      for (std::size_t i = 0; i < ss_ranking_dropped_count(r); ++i) {
        dropped.push_back(ss_ranking_dropped(r, i));
      }
      std::cout << json{{"results", results}, {"dropped", dropped}}.dump() << "\n";
    } else {
      for (std::size_t i = 0; i < ss_ranking_size(r); ++i) {
        std::printf("%s\t%.6f\n", ss_ranking_id(r, i), ss_ranking_score(r, i));
      }
      for (std::size_t i = 0; i < ss_ranking_dropped_count(r); ++i) {
        std::fprintf(stderr, "dropped token: %s\n", ss_ranking_dropped(r, i));
      }
    }
  } else if (ev->parsed()) {
    ss_protocol protocol;
    check(ss_protocol_parse(protocol_name.c_str(), &protocol));
    std::vector<const char*> concept_ptrs;
    for (const auto& c : concepts) concept_ptrs.push_back(c.c_str());
    eo.queries_path = opt(queries_path);
    eo.concepts = concept_ptrs.data();
    eo.concept_count = concept_ptrs.size();
    eo.pool = pool_bits(pool);
    if (s.seed) eo.seed = *s.seed;
    Engine engine;
    Report report;
    check(ss_engine_eval(open_engine(s, engine), protocol, &eo, report.out()));
    check(ss_report_write(report.get(), opt(out_json), opt(out_csv), opt(pairs_csv)));
    if (out_json.empty()) std::cout << ss_report_json(report.get()) << "\n";
  } else if (sv->parsed()) {
    require_path(s.text_model, "--text-model");
    semspace_tools::EngineSource source{s.corpus, s.text_model, s.visual_model,
                                        s.index, parse_aggregation(s.aggregation)};
    semspace_tools::QueryServer server(source, so);
    server.bind();
    std::cerr << "listening on http://" << so.host << ":" << server.port() << "\n";
    server.listen();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const StatusError& e) {
    std::cerr << "error (" << ss_status_name(e.status()) << "): " << e.what() << "\n";
    return e.status();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return SS_ERR_INTERNAL;
  }
}
