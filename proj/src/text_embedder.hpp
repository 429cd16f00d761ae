#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "corpus.hpp"
#include "vecmath.hpp"

namespace semspace {

enum class EmbeddingMethod : std::uint32_t {
  kLda = 0,
  kWord2Vec = 1,
  kFastText = 2,
  kDoc2Vec = 3,
  kGlove = 4,
};

std::string_view method_name(EmbeddingMethod method);
EmbeddingMethod parse_method(std::string_view name);

enum class Aggregation { kMean, kTfIdf };

std::string_view aggregation_name(Aggregation aggregation);
Aggregation parse_aggregation(std::string_view name);

// Fields irrelevant to the chosen method are ignored.
struct EmbeddingConfig {
  EmbeddingMethod method = EmbeddingMethod::kWord2Vec;
  std::int32_t dim = 400;
  std::int32_t epochs = 5;
  std::int32_t window = 5;
  std::int32_t negatives = 5;
  std::int64_t min_count = 1;
  // fasttext character n-gram range
  std::int32_t min_n = 3;
  std::int32_t max_n = 6;
  // lda: alpha <= 0 means 50 / dim
  double alpha = 0.0;
  double beta = 0.01;
  std::int32_t sweeps = 200;
  std::int32_t infer_sweeps = 50;
  // doc2vec gradient steps for unseen documents
  std::int32_t infer_steps = 50;
  // glove weighting function
  double x_max = 100.0;
  double power = 0.75;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  // >1 enables lock-free shared updates (word2vec, fasttext, doc2vec only);
  // results are then not reproducible.
  std::int32_t workers = 1;

  /// Standard defaults for `method` (glove uses learning rate 0.05).
  static EmbeddingConfig defaults(EmbeddingMethod method);
  void validate() const;
};

struct TrainingLog {
  std::vector<double> epoch_objective;
  std::vector<std::string> warnings;
};

struct WordTableModel {
  std::vector<float> vectors;  // V x d
};

struct FastTextModel {
  std::int32_t min_n = 3;
  std::int32_t max_n = 6;
  std::vector<std::string> ngrams;
  std::vector<float> ngram_vectors;  // G x d
};

struct LdaModel {
  double alpha = 0.0;
  double beta = 0.01;
  std::int32_t infer_sweeps = 50;
  std::uint64_t seed = 1;
  std::vector<float> word_topic;  // V x K, rows are p(topic | word)
  std::vector<float> topic_word;  // K x V, rows are p(word | topic)
};

struct Doc2VecModel {
  std::int32_t infer_steps = 50;
  std::int32_t negatives = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  std::vector<float> output;  // V x d
  std::vector<std::string> doc_ids;
  std::vector<float> doc_vectors;  // n_docs x d
};

using ModelState =
    std::variant<WordTableModel, FastTextModel, LdaModel, Doc2VecModel>;

struct DocumentEmbedding {
  Vector vector;
  std::vector<std::string> dropped;  // tokens the model could not represent
};

/// Trained text model producing d-dimensional vectors. Immutable after
/// construction; all query methods are safe to call concurrently.
class TextEmbedder {
 public:
  TextEmbedder(EmbeddingMethod method, std::int32_t dim, Vocabulary vocab,
               std::vector<double> idf, ModelState state);

  /// Word-table embedder from explicit vectors (row i belongs to token i).
  static TextEmbedder from_word_table(EmbeddingMethod method,
                                      Vocabulary vocab,
                                      std::vector<double> idf,
                                      std::vector<float> vectors,
                                      std::int32_t dim);

  EmbeddingMethod method() const { return method_; }
  std::int32_t dim() const { return dim_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const std::vector<double>& idf() const { return idf_; }
  const ModelState& state() const { return state_; }
  const TrainingLog& log() const { return log_; }
  TrainingLog& mutable_log() { return log_; }

  /// Idf applied to tokens outside the vocabulary (document frequency 0).
  double unseen_idf() const;
  double idf_of(std::string_view token) const;

  /// Vector for a single word, or nullopt when the model cannot represent it.
  std::optional<Vector> word_vector(std::string_view token) const;

  /// Document vector. Word-level models aggregate word vectors (mean or
  /// tf-idf weighted mean); doc2vec and lda run their own inference and
  /// ignore `aggregation`. Throws kUnembeddable when no token is usable.
  DocumentEmbedding embed(std::span<const std::string> tokens,
                          Aggregation aggregation) const;

  /// Character n-grams of `word` wrapped in boundary markers, by code point.
  static std::vector<std::string> char_ngrams(std::string_view word,
                                              std::int32_t min_n,
                                              std::int32_t max_n);

  /// Row per vocabulary token as written in the binary and text formats.
  std::vector<float> word_rows() const;

 private:
  Vector infer_doc2vec(std::span<const std::int32_t> ids) const;
  Vector infer_lda(std::span<const std::int32_t> ids) const;
  std::optional<Vector> fasttext_vector(std::string_view token) const;

  EmbeddingMethod method_;
  std::int32_t dim_;
  Vocabulary vocab_;
  std::vector<double> idf_;
  ModelState state_;
  TrainingLog log_;
  // Derived lookups, rebuilt on construction.
  std::unordered_map<std::string, std::int32_t> ngram_index_;
  std::vector<double> noise_weights_;
};

Vector embed_document(const TextEmbedder& embedder,
                      std::span<const std::string> tokens,
                      Aggregation aggregation);

// Trainers. Each builds its vocabulary and tf-idf statistics from the train
// split, whose documents contribute caption tokens followed by tag tokens.
TextEmbedder train_word2vec(const Corpus& corpus, const EmbeddingConfig& config);
TextEmbedder train_fasttext(const Corpus& corpus, const EmbeddingConfig& config);
TextEmbedder train_glove(const Corpus& corpus, const EmbeddingConfig& config);
TextEmbedder train_lda(const Corpus& corpus, const EmbeddingConfig& config);
TextEmbedder train_doc2vec(const Corpus& corpus, const EmbeddingConfig& config);
TextEmbedder train_text_embedder(const Corpus& corpus,
                                 const EmbeddingConfig& config);

/// Initial word2vec input vectors: uniform in [-0.5/d, 0.5/d).
std::vector<float> initial_word_vectors(std::size_t count, std::int32_t dim,
                                        std::uint64_t seed);

struct Cooccurrence {
  std::int32_t row;
  std::int32_t col;
  double count;
  bool operator==(const Cooccurrence&) const = default;
};

/// Symmetric windowed counts weighted by 1/distance, sorted by (row, col).
std::vector<Cooccurrence> glove_cooccurrence(
    std::span<const std::vector<std::int32_t>> documents, std::int32_t window);

void save_embedder(const TextEmbedder& embedder, const std::string& path);
TextEmbedder load_embedder(const std::string& path);

/// "count dim" header followed by "token v1 ... vd" lines.
void export_word_vectors(const TextEmbedder& embedder, const std::string& path);

}  // namespace semspace
