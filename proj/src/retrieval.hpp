#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vecmath.hpp"

namespace semspace {

/// <a, b> / (|a| |b|). Throws kShape on length mismatch, kNumeric on a zero
/// vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct WeightedVector {
  Vector vector;
  double weight = 1.0;
};

/// Sum of weight * unit(vector), normalized. Throws kDegenerateQuery when the
/// sum has norm below 1e-9.
Vector compose_query(std::span<const WeightedVector> terms);

struct ScoredId {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredId&) const = default;
};

using RankedResult = std::vector<ScoredId>;

/// Immutable exact cosine index. Rows are stored unit-normalized in single
/// precision; insertion order is kept.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;

  static RetrievalIndex build(
      std::span<const std::pair<std::string, Vector>> items);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::int32_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> row(std::size_t i) const {
    return {rows_.data() + i * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  /// Position of `id`, or -1.
  std::int64_t position(const std::string& id) const;
  Vector vector(std::size_t i) const;

  /// Top-k by cosine, descending; ties by ascending id. k > size returns all.
  RankedResult query_nearest(std::span<const double> query, std::size_t k) const;

  /// Every item scored in index order.
  std::vector<double> scores(std::span<const double> query) const;

  bool operator==(const RetrievalIndex& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && rows_ == other.rows_;
  }

  friend void save_index(const RetrievalIndex& index, const std::string& path);
  friend RetrievalIndex load_index(const std::string& path);

 private:
  RetrievalIndex(std::int32_t dim, std::vector<std::string> ids,
                 std::vector<float> rows);

  std::int32_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> rows_;
  std::unordered_map<std::string, std::size_t> positions_;
};

RankedResult query_nearest(const RetrievalIndex& index,
                           std::span<const double> query, std::size_t k);

void save_index(const RetrievalIndex& index, const std::string& path);
RetrievalIndex load_index(const std::string& path);

}  // namespace semspace
