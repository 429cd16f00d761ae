#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace semspace {

using Vector = std::vector<double>;

template <typename A, typename B>
double dot(std::span<const A> a, std::span<const B> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

template <typename A>
double norm(std::span<const A> a) {
  return std::sqrt(dot(a, a));
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace semspace
