// Paragraph vectors, distributed bag of words: each document vector predicts
// the words of its document under negative sampling.

#include <atomic>

#include "error.hpp"
#include "sgns.hpp"
#include "text_embedder.hpp"
#include "trainer_common.hpp"

namespace semspace {

namespace {

template <bool Shared>
double dbow_range(const detail::TrainingData& data, std::size_t begin,
                  std::size_t end, float* docs, float* output,
                  const EmbeddingConfig& config,
                  const detail::NoiseSampler& noise, detail::Rng& rng,
                  std::atomic<std::size_t>& processed, double total) {
  const std::int32_t d = config.dim;
  std::vector<float> buf(d), step(d);
  double loss = 0.0;
  for (std::size_t doc = begin; doc < end; ++doc) {
    float* row = docs + doc * d;
    for (auto word : data.docs[doc]) {
      const double done =
          static_cast<double>(processed.fetch_add(1, std::memory_order_relaxed));
      const auto lr = static_cast<float>(
          config.learning_rate * std::max(1e-4, 1.0 - done / (total + 1.0)));
      for (std::int32_t i = 0; i < d; ++i) buf[i] = detail::load<Shared>(row[i]);
      std::fill(step.begin(), step.end(), 0.0f);
      loss += detail::sgns_pair<Shared>(buf, output, d, word, noise, rng,
                                        config.negatives, lr, step);
      for (std::int32_t i = 0; i < d; ++i) {
        detail::store<Shared>(row[i], detail::load<Shared>(row[i]) + step[i]);
      }
    }
  }
  return loss;
}

}  // namespace

TextEmbedder train_doc2vec(const Corpus& corpus, const EmbeddingConfig& config) {
  auto data = detail::prepare_training_data(corpus, config);
  const std::size_t v = data.vocab.size();
  const std::int32_t d = config.dim;

  Doc2VecModel model;
  model.infer_steps = config.infer_steps;
  model.negatives = config.negatives;
  model.learning_rate = config.learning_rate;
  model.seed = config.seed;
  model.doc_ids = data.doc_ids;
  model.doc_vectors = initial_word_vectors(data.docs.size(), d, config.seed);
  model.output.assign(v * d, 0.0f);

  const auto weights = detail::noise_weights(data.vocab.frequencies());
  const double total =
      static_cast<double>(data.total_tokens) * std::max(config.epochs, 1);
  std::vector<detail::Rng> rngs;
  for (std::int32_t w = 0; w < config.workers; ++w) {
    rngs.emplace_back(config.seed + 0x9E3779B97F4A7C15ULL * (w + 1));
  }
  std::atomic<std::size_t> processed{0};
  TrainingLog log;
  for (std::int32_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<double> losses(config.workers, 0.0);
    detail::run_workers(
        data.docs.size(), config.workers,
        [&](std::int32_t w, std::size_t begin, std::size_t end) {
          detail::NoiseSampler noise(weights);
          losses[w] =
              config.workers == 1
                  ? dbow_range<false>(data, begin, end, model.doc_vectors.data(),
                                      model.output.data(), config, noise,
                                      rngs[w], processed, total)
                  : dbow_range<true>(data, begin, end, model.doc_vectors.data(),
                                     model.output.data(), config, noise,
                                     rngs[w], processed, total);
        });
    double sum = 0.0;
    for (auto l : losses) sum += l;
    log.epoch_objective.push_back(sum /
                                  std::max<std::size_t>(data.total_tokens, 1));
  }
  TextEmbedder embedder(EmbeddingMethod::kDoc2Vec, d, std::move(data.vocab),
                        std::move(data.idf), std::move(model));
  embedder.mutable_log() = std::move(log);
  return embedder;
}

}  // namespace semspace
