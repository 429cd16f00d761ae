#include "sgns.hpp"

#include <algorithm>

namespace semspace::detail {

std::vector<double> noise_weights(std::span<const std::int64_t> frequency,
                                  double power) {
  std::vector<double> weights(frequency.size());
  for (std::size_t i = 0; i < frequency.size(); ++i) {
    weights[i] = std::pow(static_cast<double>(frequency[i]), power);
  }
  return weights;
}

std::vector<std::pair<std::size_t, std::size_t>> shard(std::size_t count,
                                                       std::int32_t workers) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  if (count == 0) return ranges;
  const auto n = static_cast<std::size_t>(
      std::clamp<std::int64_t>(workers, 1, static_cast<std::int64_t>(count)));
  for (std::size_t w = 0; w < n; ++w) {
    ranges.emplace_back(count * w / n, count * (w + 1) / n);
  }
  return ranges;
}

}  // namespace semspace::detail
