#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "evaluation.hpp"
#include "retrieval.hpp"
#include "text_embedder.hpp"
#include "visual.hpp"

namespace semspace {

enum class TermKind { kText, kImage };

struct QueryTerm {
  TermKind kind = TermKind::kText;
  std::string value;  // text, or an indexed image id
  double weight = 1.0;

  bool operator==(const QueryTerm&) const = default;
};

/// Parses the CLI mini-syntax. Whitespace-separated terms; a leading '+' or
/// '-' sets the sign, a trailing ":w" an explicit weight, and a leading '@'
/// marks an indexed image id: "snow -leopard mountain:0.5 @doc12".
std::vector<QueryTerm> parse_query_string(const std::string& query);

struct QueryAnswer {
  RankedResult results;
  std::vector<std::string> dropped_tokens;
};

/// Embeds the test split through the regressor. Throws kValidation when the
/// split is empty.
RetrievalIndex build_test_index(const Corpus& corpus,
                                const VisualEmbedder& visual);

struct EnginePaths {
  std::string corpus;        // optional
  std::string text_model;    // required
  std::string visual_model;  // optional
  std::string index;         // optional
};

/// Loaded artifacts for serving and evaluation. Immutable once built.
class Engine {
 public:
  Engine(TextEmbedder text, Aggregation aggregation);

  static Engine open(const EnginePaths& paths, Aggregation aggregation);

  void set_corpus(Corpus corpus) { corpus_ = std::move(corpus); }
  void set_visual(VisualEmbedder visual) { visual_ = std::move(visual); }
  void set_index(RetrievalIndex index) { index_ = std::move(index); }

  const TextEmbedder& text() const { return text_; }
  Aggregation aggregation() const { return aggregation_; }
  const Corpus& corpus() const;
  const VisualEmbedder& visual() const;
  const RetrievalIndex& index() const;
  bool has_corpus() const { return corpus_.has_value(); }
  bool has_visual() const { return visual_.has_value(); }
  bool has_index() const { return index_.has_value(); }

  /// Text terms are tokenized and embedded; image terms use their stored
  /// index row. The weighted unit vectors are composed, then ranked.
  QueryAnswer query(const std::vector<QueryTerm>& terms, std::size_t k) const;

  /// Document metadata as JSON; kNotFound for unknown ids.
  std::string item_json(const std::string& id) const;

  /// In-vocabulary tokens starting with `prefix`, most frequent first.
  std::vector<std::string> vocab_prefix(const std::string& prefix,
                                        std::size_t limit) const;

 private:
  TextEmbedder text_;
  Aggregation aggregation_;
  std::optional<Corpus> corpus_;
  std::optional<VisualEmbedder> visual_;
  std::optional<RetrievalIndex> index_;
};

}  // namespace semspace
