#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "retrieval.hpp"
#include "text_embedder.hpp"
#include "visual.hpp"

namespace semspace {

enum class QueryCategory { kUrban, kWeather, kFood, kPeople };
enum class QueryComplexity { kSimple, kComplex };

std::string_view category_name(QueryCategory category);
QueryCategory parse_category(std::string_view name);

struct QuerySpec {
  std::vector<std::string> words;
  QueryCategory category = QueryCategory::kUrban;
  QueryComplexity complexity = QueryComplexity::kSimple;

  void validate() const;
  std::string text() const;  // words joined with " + "
  bool operator==(const QuerySpec&) const = default;
};

/// JSON array of {"words": [...], "category": "...", "complexity": "..."}.
std::vector<QuerySpec> load_query_fixture(const std::string& path);

/// One simple query per concept and one complex query per adjacent pair
/// (i, i + 1 mod n); categories cycle through the four kinds.
std::vector<QuerySpec> concept_queries(std::span<const std::string> concepts);

/// (# relevant among the first min(k, n)) / k; 0 for an empty list.
double precision_at_k(const std::vector<bool>& relevance, std::size_t k);

/// Simple: labels contain the word. Complex: labels contain every word.
bool relevance_complex(const QuerySpec& query,
                       std::span<const std::string> labels);

/// Mean of precision@i over relevant positions i; 0 without relevant items.
double average_precision(const std::vector<bool>& relevance);

double mean(std::span<const double> values);

/// 1 - SS_res / SS_tot of the least-squares line of y on x. Throws
/// kUndefined for fewer than two points or a constant axis.
double r_squared(std::span<const double> x, std::span<const double> y);

struct ReportEntry {
  std::string name;
  std::string category;
  std::string complexity;
  double value = 0.0;
  bool flagged = false;
  std::string note;
};

struct EvalReport {
  std::string protocol;
  std::vector<ReportEntry> entries;
  std::map<std::string, double> aggregates;
  std::map<std::string, std::string> metadata;
};

std::string report_json(const EvalReport& report);
std::string report_csv(const EvalReport& report);

/// Vector of a query: each word embedded on its own, then composed with
/// equal weights.
Vector embed_query_spec(const TextEmbedder& text, Aggregation aggregation,
                        const QuerySpec& query);

/// P@5 of every query against `index`; relevance from the corpus labels of
/// the retrieved ids. Aggregates: all, simple, complex.
EvalReport eval_p5_suite(const RetrievalIndex& index, const TextEmbedder& text,
                         Aggregation aggregation,
                         std::span<const QuerySpec> queries,
                         const Corpus& labels);

/// Relevance flags of the full ranking of `index` for `query`.
std::vector<bool> ranked_relevance(
    const RetrievalIndex& index, std::span<const double> query,
    const std::function<bool(const std::string&)>& relevant);

struct EvalSplit {
  std::vector<Split> pool = {Split::kTest};
  double query_fraction = 0.05;
  std::uint64_t seed = 1;
  std::size_t max_queries = 0;  // 0 = no cap
};

/// Pool documents with features are shuffled by seed; the first
/// query_fraction become queries whose text is their tags, the rest the
/// retrieval set. Relevant = shares at least one tag. Aggregate: map.
EvalReport eval_tag_query_map(const Corpus& corpus, const VisualEmbedder& visual,
                              const TextEmbedder& text, Aggregation aggregation,
                              const EvalSplit& split);

/// Ranks every pool document (via the regressor) against each embedded
/// concept name; relevant = labelled with the concept. Empty `concepts`
/// means every label present in the pool. Aggregate: map.
EvalReport eval_concept_ap(const Corpus& corpus, const VisualEmbedder& visual,
                           const TextEmbedder& text, Aggregation aggregation,
                           std::span<const std::string> concepts,
                           const EvalSplit& split);

struct PairPoint {
  std::string first;
  std::string second;
  double text_distance = 0.0;   // min-max normalized cosine distance
  double image_distance = 0.0;  // min-max normalized cosine distance
  std::int32_t shared_tags = 0;
  bool operator==(const PairPoint&) const = default;
};

struct CorrelationStudy {
  std::vector<PairPoint> pairs;
  double r2 = 0.0;
  // Mean normalized image distance per shared-tag bucket 0, 1, 2, 3, >=4.
  std::vector<double> bucket_image_mean;
  std::vector<std::size_t> bucket_count;
  double mean_image_distance_sharing = 0.0;
  double mean_image_distance_disjoint = 0.0;
};

/// Random document pairs (with replacement, distinct members) drawn from
/// the pool; text and image cosine distances, min-max normalized per axis.
CorrelationStudy distance_correlation_study(
    const Corpus& corpus, const TextEmbedder& text, const VisualEmbedder& visual,
    Aggregation aggregation, std::size_t n_pairs, std::uint64_t seed,
    std::span<const Split> pool = {});

EvalReport correlation_report(const CorrelationStudy& study);
void write_pairs_csv(const CorrelationStudy& study, const std::string& path);

}  // namespace semspace
