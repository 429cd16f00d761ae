#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <random>

#include "error.hpp"

namespace semspace {

namespace {

constexpr std::array<const char*, 24> kConceptNames = {
    "car",   "skyline", "bike",   "sunrise", "snow",     "rain",
    "cake",  "pizza",   "woman",  "man",     "kid",      "night",
    "park",  "beach",   "ski",    "umbrella", "chocolate", "wine",
    "bag",   "boat",    "dog",    "yellow",  "leopard",  "mountain"};

}  // namespace

std::string synthetic_concept_name(std::int64_t index) {
  if (index >= 0 && index < static_cast<std::int64_t>(kConceptNames.size())) {
    return kConceptNames[index];
  }
  return "concept" + std::to_string(index);
}

std::string synthetic_concept_word(std::int64_t concept_index,
                                   std::int64_t word) {
  return synthetic_concept_name(concept_index) + std::to_string(word);
}

Corpus generate_synthetic_corpus(const SyntheticParams& p) {
  if (p.n_concepts <= 0 || p.words_per_concept <= 0 || p.n_docs <= 0 ||
      p.feature_dim <= 0 || p.caption_words_per_concept <= 0) {
    fail(ErrorCode::kConfig, "synthetic corpus counts must be positive");
  }
  if (p.feature_dim < p.n_concepts) {
    fail(ErrorCode::kConfig,
         "feature_dim must be >= n_concepts for indicator features");
  }
  if (p.noise_sigma < 0) fail(ErrorCode::kConfig, "noise_sigma must be >= 0");
  if (p.min_concepts_per_doc < 1 ||
      p.max_concepts_per_doc < p.min_concepts_per_doc) {
    fail(ErrorCode::kConfig, "invalid concepts-per-document range");
  }
  if (p.train_fraction < 0 || p.val_fraction < 0 ||
      p.train_fraction + p.val_fraction > 1.0) {
    fail(ErrorCode::kConfig, "invalid split fractions");
  }

  std::mt19937_64 rng(p.seed);
  const auto max_k = std::min(p.max_concepts_per_doc, p.n_concepts);
  const auto min_k = std::min(p.min_concepts_per_doc, max_k);
  std::uniform_int_distribution<std::int64_t> count_dist(min_k, max_k);
  std::uniform_int_distribution<std::int64_t> word_dist(
      0, p.words_per_concept - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<std::int64_t> concepts(p.n_concepts);
  std::vector<Document> docs;
  docs.reserve(p.n_docs);
  for (std::int64_t n = 0; n < p.n_docs; ++n) {
    Document doc;
    doc.id = "doc" + std::to_string(n);

    std::iota(concepts.begin(), concepts.end(), 0);
    const auto k = count_dist(rng);
    // Partial Fisher-Yates: the first k entries are the sample.
    for (std::int64_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::int64_t> pick(i, p.n_concepts - 1);
      std::swap(concepts[i], concepts[pick(rng)]);
    }
    std::vector<std::int64_t> chosen(concepts.begin(), concepts.begin() + k);
    std::sort(chosen.begin(), chosen.end());

    std::vector<std::string> words;
    for (auto c : chosen) {
      for (std::int64_t w = 0; w < p.caption_words_per_concept; ++w) {
        words.push_back(synthetic_concept_word(c, word_dist(rng)));
      }
    }
    std::shuffle(words.begin(), words.end(), rng);
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) doc.caption.push_back(' ');
      doc.caption += words[i];
    }

    std::vector<double> features(p.feature_dim, 0.0);
    for (auto c : chosen) {
      features[c] += 1.0;
      doc.tags.push_back(synthetic_concept_name(c));
    }
    if (p.noise_sigma > 0) {
      for (auto& f : features) f += p.noise_sigma * noise(rng);
    }
    doc.features = std::move(features);
    doc.labels = doc.tags;

    const double u = unit(rng);
    doc.split = u < p.train_fraction                    ? Split::kTrain
                : u < p.train_fraction + p.val_fraction ? Split::kVal
                                                        : Split::kTest;
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

}  // namespace semspace
