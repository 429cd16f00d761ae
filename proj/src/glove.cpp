// GloVe: weighted least squares on log co-occurrence counts, AdaGrad steps.

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "error.hpp"
#include "text_embedder.hpp"
#include "trainer_common.hpp"

namespace semspace {

std::vector<Cooccurrence> glove_cooccurrence(
    std::span<const std::vector<std::int32_t>> documents, std::int32_t window) {
  std::map<std::pair<std::int32_t, std::int32_t>, double> counts;
  for (const auto& doc : documents) {
    const auto n = static_cast<std::int64_t>(doc.size());
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = i + 1; j < n && j <= i + window; ++j) {
        const double w = 1.0 / static_cast<double>(j - i);
        counts[{doc[i], doc[j]}] += w;
        counts[{doc[j], doc[i]}] += w;
      }
    }
  }
  std::vector<Cooccurrence> out;
  out.reserve(counts.size());
  for (const auto& [key, count] : counts) {
    out.push_back({key.first, key.second, count});
  }
  return out;
}

namespace {

struct GloveParams {
  std::int32_t dim;
  std::vector<float> w, w_ctx, b, b_ctx;
  std::vector<float> gw, gw_ctx, gb, gb_ctx;  // AdaGrad squared-gradient sums
};

double weighting(double x, const EmbeddingConfig& config) {
  return x < config.x_max ? std::pow(x / config.x_max, config.power) : 1.0;
}

double residual(const GloveParams& p, const Cooccurrence& c) {
  const float* wi = p.w.data() + static_cast<std::size_t>(c.row) * p.dim;
  const float* wj = p.w_ctx.data() + static_cast<std::size_t>(c.col) * p.dim;
  double inner = 0.0;
  for (std::int32_t k = 0; k < p.dim; ++k) {
    inner += static_cast<double>(wi[k]) * wj[k];
  }
  return inner + p.b[c.row] + p.b_ctx[c.col] - std::log(c.count);
}

double objective(const GloveParams& p, std::span<const Cooccurrence> pairs,
                 const EmbeddingConfig& config) {
  double j = 0.0;
  for (const auto& c : pairs) {
    const double r = residual(p, c);
    j += 0.5 * weighting(c.count, config) * r * r;
  }
  return j;
}

}  // namespace

TextEmbedder train_glove(const Corpus& corpus, const EmbeddingConfig& config) {
  auto data = detail::prepare_training_data(corpus, config);
  const std::size_t v = data.vocab.size();
  const std::int32_t d = config.dim;
  auto pairs = glove_cooccurrence(data.docs, config.window);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<float> init(-0.5f / d, 0.5f / d);
  GloveParams p{d, {}, {}, {}, {}, {}, {}, {}, {}};
  auto fill = [&](std::vector<float>& values, std::size_t n) {
    values.resize(n);
    for (auto& x : values) x = init(rng);
  };
  fill(p.w, v * d);
  fill(p.w_ctx, v * d);
  fill(p.b, v);
  fill(p.b_ctx, v);
  p.gw.assign(v * d, 1.0f);
  p.gw_ctx.assign(v * d, 1.0f);
  p.gb.assign(v, 1.0f);
  p.gb_ctx.assign(v, 1.0f);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  TrainingLog log;
  const auto lr = static_cast<float>(config.learning_rate);
  for (std::int32_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto idx : order) {
      const auto& c = pairs[idx];
      const auto fdiff =
          static_cast<float>(weighting(c.count, config) * residual(p, c));
      float* wi = p.w.data() + static_cast<std::size_t>(c.row) * d;
      float* wj = p.w_ctx.data() + static_cast<std::size_t>(c.col) * d;
      float* gi = p.gw.data() + static_cast<std::size_t>(c.row) * d;
      float* gj = p.gw_ctx.data() + static_cast<std::size_t>(c.col) * d;
      for (std::int32_t k = 0; k < d; ++k) {
        const float grad_i = fdiff * wj[k];
        const float grad_j = fdiff * wi[k];
        wi[k] -= lr * grad_i / std::sqrt(gi[k]);
        wj[k] -= lr * grad_j / std::sqrt(gj[k]);
        gi[k] += grad_i * grad_i;
        gj[k] += grad_j * grad_j;
      }
      p.b[c.row] -= lr * fdiff / std::sqrt(p.gb[c.row]);
      p.b_ctx[c.col] -= lr * fdiff / std::sqrt(p.gb_ctx[c.col]);
      p.gb[c.row] += fdiff * fdiff;
      p.gb_ctx[c.col] += fdiff * fdiff;
    }
    log.epoch_objective.push_back(objective(p, pairs, config));
  }

  std::vector<float> vectors(v * d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    vectors[i] = p.w[i] + p.w_ctx[i];
  }
  TextEmbedder embedder(EmbeddingMethod::kGlove, d, std::move(data.vocab),
                        std::move(data.idf), WordTableModel{std::move(vectors)});
  embedder.mutable_log() = std::move(log);
  return embedder;
}

}  // namespace semspace
