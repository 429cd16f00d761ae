// Skip-gram with negative sampling: word2vec (one vector per word) and
// fasttext (word vector = sum of character n-gram vectors).

#include <atomic>
#include <unordered_map>

#include "error.hpp"
#include "sgns.hpp"
#include "text_embedder.hpp"
#include "trainer_common.hpp"

namespace semspace {

namespace {

using detail::Rng;

struct WordInput {
  float* table;
  std::int32_t dim;

  template <bool Shared>
  void gather(std::int32_t word, std::span<float> buf) const {
    float* row = table + static_cast<std::size_t>(word) * dim;
    for (std::int32_t i = 0; i < dim; ++i) buf[i] = detail::load<Shared>(row[i]);
  }

  template <bool Shared>
  void scatter(std::int32_t word, std::span<const float> step) const {
    float* row = table + static_cast<std::size_t>(word) * dim;
    for (std::int32_t i = 0; i < dim; ++i) {
      detail::store<Shared>(row[i], detail::load<Shared>(row[i]) + step[i]);
    }
  }
};

struct NgramInput {
  float* table;
  std::int32_t dim;
  const std::vector<std::vector<std::int32_t>>* subwords;

  template <bool Shared>
  void gather(std::int32_t word, std::span<float> buf) const {
    std::fill(buf.begin(), buf.end(), 0.0f);
    for (auto g : (*subwords)[word]) {
      float* row = table + static_cast<std::size_t>(g) * dim;
      for (std::int32_t i = 0; i < dim; ++i) buf[i] += detail::load<Shared>(row[i]);
    }
  }

  // Every n-gram receives the composed gradient scaled by 1/|grams|.
  template <bool Shared>
  void scatter(std::int32_t word, std::span<const float> step) const {
    const auto& grams = (*subwords)[word];
    const float scale = 1.0f / static_cast<float>(grams.size());
    for (auto g : grams) {
      float* row = table + static_cast<std::size_t>(g) * dim;
      for (std::int32_t i = 0; i < dim; ++i) {
        detail::store<Shared>(row[i],
                              detail::load<Shared>(row[i]) + scale * step[i]);
      }
    }
  }
};

template <bool Shared, typename Input>
double skipgram_range(const detail::TrainingData& data, std::size_t begin,
                      std::size_t end, const Input& input, float* output,
                      const EmbeddingConfig& config,
                      const detail::NoiseSampler& noise, Rng& rng,
                      std::atomic<std::size_t>& processed, double total) {
  const std::int32_t d = config.dim;
  std::vector<float> buf(d), step(d);
  std::uniform_int_distribution<std::int32_t> reduce(1, config.window);
  double loss = 0.0;
  for (std::size_t doc = begin; doc < end; ++doc) {
    const auto& words = data.docs[doc];
    const auto n = static_cast<std::int64_t>(words.size());
    for (std::int64_t pos = 0; pos < n; ++pos) {
      const double done =
          static_cast<double>(processed.fetch_add(1, std::memory_order_relaxed));
      const auto lr = static_cast<float>(
          config.learning_rate * std::max(1e-4, 1.0 - done / (total + 1.0)));
      const std::int32_t b = reduce(rng);
      for (std::int64_t c = pos - b; c <= pos + b; ++c) {
        if (c == pos || c < 0 || c >= n) continue;
        input.template gather<Shared>(words[c], buf);
        std::fill(step.begin(), step.end(), 0.0f);
        loss += detail::sgns_pair<Shared>(buf, output, d, words[pos], noise,
                                          rng, config.negatives, lr, step);
        input.template scatter<Shared>(words[c], step);
      }
    }
  }
  return loss;
}

template <typename Input>
std::vector<double> run_skipgram(const detail::TrainingData& data,
                                 const Input& input, float* output,
                                 const EmbeddingConfig& config) {
  const auto weights = detail::noise_weights(data.vocab.frequencies());
  const double total =
      static_cast<double>(data.total_tokens) * std::max(config.epochs, 1);
  std::vector<Rng> rngs;
  for (std::int32_t w = 0; w < config.workers; ++w) {
    rngs.emplace_back(config.seed + 0x9E3779B97F4A7C15ULL * (w + 1));
  }
  std::atomic<std::size_t> processed{0};
  std::vector<double> objective;
  for (std::int32_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<double> losses(config.workers, 0.0);
    detail::run_workers(
        data.docs.size(), config.workers,
        [&](std::int32_t w, std::size_t begin, std::size_t end) {
          detail::NoiseSampler noise(weights);
          losses[w] = config.workers == 1
                          ? skipgram_range<false>(data, begin, end, input,
                                                  output, config, noise,
                                                  rngs[w], processed, total)
                          : skipgram_range<true>(data, begin, end, input,
                                                 output, config, noise,
                                                 rngs[w], processed, total);
        });
    double sum = 0.0;
    for (auto l : losses) sum += l;
    objective.push_back(sum / std::max<std::size_t>(data.total_tokens, 1));
  }
  return objective;
}

}  // namespace

std::vector<float> initial_word_vectors(std::size_t count, std::int32_t dim,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<float> init(-0.5f / dim, 0.5f / dim);
  std::vector<float> vectors(count * static_cast<std::size_t>(dim));
  for (auto& x : vectors) x = init(rng);
  return vectors;
}

TextEmbedder train_word2vec(const Corpus& corpus,
                            const EmbeddingConfig& config) {
  auto data = detail::prepare_training_data(corpus, config);
  const std::size_t v = data.vocab.size();
  auto vectors = initial_word_vectors(v, config.dim, config.seed);
  std::vector<float> output(v * config.dim, 0.0f);
  WordInput input{vectors.data(), config.dim};
  auto objective = run_skipgram(data, input, output.data(), config);
  TextEmbedder embedder(EmbeddingMethod::kWord2Vec, config.dim,
                        std::move(data.vocab), std::move(data.idf),
                        WordTableModel{std::move(vectors)});
  embedder.mutable_log().epoch_objective = std::move(objective);
  return embedder;
}

TextEmbedder train_fasttext(const Corpus& corpus,
                            const EmbeddingConfig& config) {
  if (config.min_n > config.max_n) {
    fail(ErrorCode::kConfig, "min_n must be <= max_n");
  }
  auto data = detail::prepare_training_data(corpus, config);
  const std::size_t v = data.vocab.size();

  FastTextModel model;
  model.min_n = config.min_n;
  model.max_n = config.max_n;
  std::unordered_map<std::string, std::int32_t> index;
  std::vector<std::vector<std::int32_t>> subwords(v);
  for (std::size_t w = 0; w < v; ++w) {
    for (auto& gram : TextEmbedder::char_ngrams(
             data.vocab.token(static_cast<std::int32_t>(w)), config.min_n,
             config.max_n)) {
      auto [it, inserted] =
          index.emplace(gram, static_cast<std::int32_t>(model.ngrams.size()));
      if (inserted) model.ngrams.push_back(gram);
      subwords[w].push_back(it->second);
    }
    if (subwords[w].empty()) {
      fail(ErrorCode::kConfig,
           "token '" + data.vocab.token(static_cast<std::int32_t>(w)) +
               "' has no character n-grams in the configured range");
    }
  }
  model.ngram_vectors =
      initial_word_vectors(model.ngrams.size(), config.dim, config.seed);
  std::vector<float> output(v * config.dim, 0.0f);
  NgramInput input{model.ngram_vectors.data(), config.dim, &subwords};
  auto objective = run_skipgram(data, input, output.data(), config);
  TextEmbedder embedder(EmbeddingMethod::kFastText, config.dim,
                        std::move(data.vocab), std::move(data.idf),
                        std::move(model));
  embedder.mutable_log().epoch_objective = std::move(objective);
  return embedder;
}

}  // namespace semspace
