#pragma once

// Skip-gram negative-sampling kernel shared by word2vec, fasttext, doc2vec.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "vecmath.hpp"

namespace semspace::detail {

using Rng = std::mt19937_64;

// Relaxed access for lock-free multi-worker training. Lost updates are
// tolerated; torn values are not possible.
template <bool Shared>
inline float load(float& x) {
  if constexpr (Shared) {
    return std::atomic_ref<float>(x).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool Shared>
inline void store(float& x, float value) {
  if constexpr (Shared) {
    std::atomic_ref<float>(x).store(value, std::memory_order_relaxed);
  } else {
    x = value;
  }
}

/// Unigram^power noise distribution over vocabulary ids.
class NoiseSampler {
 public:
  NoiseSampler() = default;
  explicit NoiseSampler(std::span<const double> weights)
      : dist_(weights.begin(), weights.end()) {}

  std::int32_t operator()(Rng& rng) const {
    return static_cast<std::int32_t>(dist_(rng));
  }

 private:
  mutable std::discrete_distribution<std::int32_t> dist_;
};

std::vector<double> noise_weights(std::span<const std::int64_t> frequency,
                                  double power = 0.75);

/// One positive pair (input, target) plus `negatives` noise pairs. Adds the
/// input-side gradient step into `input_step`; output rows are updated in
/// place unless `update_output` is false. Returns the pair loss.
template <bool Shared>
double sgns_pair(std::span<const float> input, float* output_table,
                 std::int32_t dim, std::int32_t target,
                 const NoiseSampler& noise, Rng& rng, std::int32_t negatives,
                 float learning_rate, std::span<float> input_step,
                 bool update_output = true) {
  double loss = 0.0;
  for (std::int32_t n = 0; n <= negatives; ++n) {
    std::int32_t word;
    float label;
    if (n == 0) {
      word = target;
      label = 1.0f;
    } else {
      word = noise(rng);
      if (word == target) continue;
      label = 0.0f;
    }
    float* out = output_table + static_cast<std::size_t>(word) * dim;
    double f = 0.0;
    for (std::int32_t i = 0; i < dim; ++i) {
      f += static_cast<double>(input[i]) * load<Shared>(out[i]);
    }
    const double p = sigmoid(f);
    loss -= label > 0 ? std::log(std::max(p, 1e-12))
                      : std::log(std::max(1.0 - p, 1e-12));
    const float g = static_cast<float>((label - p) * learning_rate);
    for (std::int32_t i = 0; i < dim; ++i) {
      const float o = load<Shared>(out[i]);
      input_step[i] += g * o;
      if (update_output) store<Shared>(out[i], o + g * input[i]);
    }
  }
  return loss;
}

/// Splits `count` items into `workers` contiguous ranges.
std::vector<std::pair<std::size_t, std::size_t>> shard(std::size_t count,
                                                       std::int32_t workers);

/// Runs fn(worker, begin, end) on each shard; in-thread when workers == 1.
template <typename Fn>
void run_workers(std::size_t count, std::int32_t workers, Fn&& fn) {
  auto ranges = shard(count, workers);
  if (ranges.size() <= 1) {
    if (!ranges.empty()) fn(0, ranges[0].first, ranges[0].second);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(ranges.size());
  for (std::size_t w = 0; w < ranges.size(); ++w) {
    threads.emplace_back([&fn, w, r = ranges[w]] {
      fn(static_cast<std::int32_t>(w), r.first, r.second);
    });
  }
}

}  // namespace semspace::detail
