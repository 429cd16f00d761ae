#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace semspace {

struct SyntheticParams {
  std::int64_t n_concepts = 10;
  std::int64_t words_per_concept = 50;
  std::int64_t n_docs = 5000;
  std::int64_t feature_dim = 64;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;

  std::int64_t min_concepts_per_doc = 1;
  std::int64_t max_concepts_per_doc = 3;
  // Caption words drawn from each chosen concept.
  std::int64_t caption_words_per_concept = 4;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
};

/// Name of concept `index`: familiar query words first, then "conceptN".
std::string synthetic_concept_name(std::int64_t index);

/// Vocabulary word `word` of concept `concept` ("snow7").
std::string synthetic_concept_word(std::int64_t concept_index, std::int64_t word);

/// Each document picks concepts uniformly without replacement. Features are
/// the sum of the chosen concepts' indicator vectors plus N(0, sigma^2) noise.
/// Tags and labels are the concept names. Pure function of `params`.
Corpus generate_synthetic_corpus(const SyntheticParams& params);

}  // namespace semspace
