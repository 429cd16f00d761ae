#pragma once

#include <string>
#include <vector>

#include "corpus.hpp"
#include "text_embedder.hpp"

namespace semspace::detail {

struct TrainingData {
  Vocabulary vocab;
  std::vector<double> idf;
  std::vector<std::string> doc_ids;            // train documents kept
  std::vector<std::vector<std::int32_t>> docs;  // encoded, OOV dropped
  std::size_t total_tokens = 0;
};

/// Validates `config`, builds the vocabulary and idf table over the train
/// split, and encodes every train document that keeps at least one token.
TrainingData prepare_training_data(const Corpus& corpus,
                                   const EmbeddingConfig& config);

}  // namespace semspace::detail
