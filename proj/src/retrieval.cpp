#include "retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "error.hpp"

namespace semspace {

namespace {

constexpr std::uint32_t kIndexVersion = 1;

bool ranks_before(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kShape, "cosine of vectors with different lengths");
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    fail(ErrorCode::kNumeric, "cosine of a zero vector");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vector compose_query(std::span<const WeightedVector> terms) {
  if (terms.empty()) fail(ErrorCode::kDegenerateQuery, "query has no terms");
  const std::size_t d = terms.front().vector.size();
  Vector q(d, 0.0);
  for (const auto& term : terms) {
    if (term.vector.size() != d) {
      fail(ErrorCode::kShape, "query terms have different dimensions");
    }
    if (!std::isfinite(term.weight)) {
      fail(ErrorCode::kNumeric, "query weight is not finite");
    }
    const double n = norm<double>(term.vector);
    if (n == 0.0) fail(ErrorCode::kDegenerateQuery, "query term is a zero vector");
    for (std::size_t i = 0; i < d; ++i) q[i] += term.weight * term.vector[i] / n;
  }
  const double n = norm<double>(q);
  if (!(n >= 1e-9)) {
    fail(ErrorCode::kDegenerateQuery, "query terms cancel out");
  }
  for (auto& x : q) x /= n;
  return q;
}

RetrievalIndex::RetrievalIndex(std::int32_t dim, std::vector<std::string> ids,
                               std::vector<float> rows)
    : dim_(dim), ids_(std::move(ids)), rows_(std::move(rows)) {
  positions_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!positions_.emplace(ids_[i], i).second) {
      fail(ErrorCode::kValidation, "duplicate index id '" + ids_[i] + "'");
    }
  }
}

RetrievalIndex RetrievalIndex::build(
    std::span<const std::pair<std::string, Vector>> items) {
  if (items.empty()) return RetrievalIndex();
  const std::size_t d = items.front().second.size();
  if (d == 0) fail(ErrorCode::kShape, "index vectors must be non-empty");
  std::vector<std::string> ids;
  std::vector<float> rows;
  ids.reserve(items.size());
  rows.reserve(items.size() * d);
  for (const auto& [id, vec] : items) {
    if (vec.size() != d) {
      fail(ErrorCode::kShape, "item '" + id + "' has dimension " +
                                  std::to_string(vec.size()) + ", expected " +
                                  std::to_string(d));
    }
    const double n = norm<double>(vec);
    if (!(n > 0.0) || !std::isfinite(n)) {
      fail(ErrorCode::kNumeric, "item '" + id + "' has a zero or non-finite vector");
    }
    ids.push_back(id);
    for (double x : vec) rows.push_back(static_cast<float>(x / n));
  }
  return RetrievalIndex(static_cast<std::int32_t>(d), std::move(ids),
                        std::move(rows));
}

std::int64_t RetrievalIndex::position(const std::string& id) const {
  auto it = positions_.find(id);
  return it == positions_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

Vector RetrievalIndex::vector(std::size_t i) const {
  auto r = row(i);
  return Vector(r.begin(), r.end());
}

std::vector<double> RetrievalIndex::scores(std::span<const double> query) const {
  if (empty()) return {};
  if (query.size() != static_cast<std::size_t>(dim_)) {
    fail(ErrorCode::kShape, "query dimension " + std::to_string(query.size()) +
                                " does not match index dimension " +
                                std::to_string(dim_));
  }
  const double qn = norm(query);
  if (!(qn > 0.0)) fail(ErrorCode::kNumeric, "query is a zero vector");
  std::vector<double> out(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    out[i] = std::clamp(dot(row(i), query) / qn, -1.0, 1.0);
  }
  return out;
}

RankedResult RetrievalIndex::query_nearest(std::span<const double> query,
                                           std::size_t k) const {
  if (k == 0) fail(ErrorCode::kUsage, "k must be >= 1");
  if (query.empty() || norm(query) == 0.0) {
    fail(ErrorCode::kNumeric, "query is a zero vector");
  }
  const auto s = scores(query);
  RankedResult all;
  all.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) all.push_back({ids_[i], s[i]});
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + n, all.end(), ranks_before);
  all.resize(n);
  return all;
}

RankedResult query_nearest(const RetrievalIndex& index,
                           std::span<const double> query, std::size_t k) {
  return index.query_nearest(query, k);
}

void save_index(const RetrievalIndex& index, const std::string& path) {
  BinaryWriter out(path);
  out.magic("SSIX");
  out.scalar<std::uint32_t>(kIndexVersion);
  out.scalar<std::uint64_t>(index.ids_.size());
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(index.dim_));
  for (const auto& id : index.ids_) out.string(id);
  out.array<float>(index.rows_);
  out.finish();
}

RetrievalIndex load_index(const std::string& path) {
  BinaryReader in(path);
  in.expect_magic("SSIX", "retrieval index");
  const auto version = in.scalar<std::uint32_t>();
  if (version != kIndexVersion) {
    fail(ErrorCode::kFormat, "'" + path + "' has unsupported version " +
                                 std::to_string(version));
  }
  const auto n = in.scalar<std::uint64_t>();
  const auto d = in.scalar<std::uint32_t>();
  if (n > 0 && d == 0) fail(ErrorCode::kFormat, "'" + path + "' has dimension 0");
  std::vector<std::string> ids;
  for (std::uint64_t i = 0; i < n; ++i) ids.push_back(in.string());
  auto rows = in.array<float>(n * d);
  in.expect_end();
  return RetrievalIndex(static_cast<std::int32_t>(d), std::move(ids),
                        std::move(rows));
}

}  // namespace semspace
