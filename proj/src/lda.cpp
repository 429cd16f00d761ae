// Latent Dirichlet allocation by collapsed Gibbs sampling. Topics play the
// role of embedding dimensions.

#include <random>

#include "error.hpp"
#include "text_embedder.hpp"
#include "trainer_common.hpp"

namespace semspace {

TextEmbedder train_lda(const Corpus& corpus, const EmbeddingConfig& config) {
  auto data = detail::prepare_training_data(corpus, config);
  const std::size_t v = data.vocab.size();
  const std::size_t k_topics = static_cast<std::size_t>(config.dim);
  const double alpha = config.alpha > 0 ? config.alpha : 50.0 / config.dim;
  const double beta = config.beta;

  TrainingLog log;
  if (data.docs.size() < k_topics) {
    log.warnings.push_back("lda: " + std::to_string(data.docs.size()) +
                           " training documents for " +
                           std::to_string(k_topics) + " topics");
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::int32_t> init(0, config.dim - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<std::int32_t>> z(data.docs.size());
  std::vector<std::int32_t> doc_topic(data.docs.size() * k_topics, 0);
  std::vector<std::int32_t> word_topic(v * k_topics, 0);
  std::vector<std::int64_t> topic_total(k_topics, 0);
  for (std::size_t d = 0; d < data.docs.size(); ++d) {
    z[d].resize(data.docs[d].size());
    for (std::size_t i = 0; i < z[d].size(); ++i) {
      const auto k = init(rng);
      z[d][i] = k;
      ++doc_topic[d * k_topics + k];
      ++word_topic[data.docs[d][i] * k_topics + k];
      ++topic_total[k];
    }
  }

  const double v_beta = static_cast<double>(v) * beta;
  std::vector<double> cumulative(k_topics);
  for (std::int32_t sweep = 0; sweep < config.sweeps; ++sweep) {
    for (std::size_t d = 0; d < data.docs.size(); ++d) {
      std::int32_t* nd = doc_topic.data() + d * k_topics;
      for (std::size_t i = 0; i < z[d].size(); ++i) {
        const std::int32_t w = data.docs[d][i];
        std::int32_t* nw = word_topic.data() + static_cast<std::size_t>(w) * k_topics;
        std::int32_t k = z[d][i];
        --nd[k];
        --nw[k];
        --topic_total[k];
        double total = 0.0;
        for (std::size_t t = 0; t < k_topics; ++t) {
          total += (nd[t] + alpha) * (nw[t] + beta) / (topic_total[t] + v_beta);
          cumulative[t] = total;
        }
        const double u = unit(rng) * total;
        k = 0;
        while (static_cast<std::size_t>(k) + 1 < k_topics && cumulative[k] <= u) {
          ++k;
        }
        z[d][i] = k;
        ++nd[k];
        ++nw[k];
        ++topic_total[k];
      }
    }
  }

  LdaModel model;
  model.alpha = alpha;
  model.beta = beta;
  model.infer_sweeps = config.infer_sweeps;
  model.seed = config.seed;
  model.word_topic.resize(v * k_topics);
  model.topic_word.resize(k_topics * v);
  for (std::size_t w = 0; w < v; ++w) {
    double n_w = 0.0;
    for (std::size_t t = 0; t < k_topics; ++t) n_w += word_topic[w * k_topics + t];
    for (std::size_t t = 0; t < k_topics; ++t) {
      model.word_topic[w * k_topics + t] = static_cast<float>(
          (word_topic[w * k_topics + t] + beta) / (n_w + k_topics * beta));
      model.topic_word[t * v + w] = static_cast<float>(
          (word_topic[w * k_topics + t] + beta) / (topic_total[t] + v_beta));
    }
  }
  TextEmbedder embedder(EmbeddingMethod::kLda, config.dim, std::move(data.vocab),
                        std::move(data.idf), std::move(model));
  embedder.mutable_log() = std::move(log);
  return embedder;
}

}  // namespace semspace
