#include "evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace semspace {

using nlohmann::json;

std::string_view category_name(QueryCategory category) {
  switch (category) {
    case QueryCategory::kUrban:
      return "urban";
    case QueryCategory::kWeather:
      return "weather";
    case QueryCategory::kFood:
      return "food";
    case QueryCategory::kPeople:
      return "people";
  }
  return "urban";
}

QueryCategory parse_category(std::string_view name) {
  for (auto c : {QueryCategory::kUrban, QueryCategory::kWeather,
                 QueryCategory::kFood, QueryCategory::kPeople}) {
    if (category_name(c) == name) return c;
  }
  fail(ErrorCode::kParse, "unknown query category '" + std::string(name) + "'");
}

void QuerySpec::validate() const {
  const std::size_t expected = complexity == QueryComplexity::kSimple ? 1 : 2;
  if (words.size() != expected) {
    fail(ErrorCode::kValidation,
         std::string(complexity == QueryComplexity::kSimple ? "simple"
                                                             : "complex") +
             " query must have " + std::to_string(expected) + " word(s)");
  }
}

std::string QuerySpec::text() const {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += " + ";
    out += words[i];
  }
  return out;
}

std::vector<QuerySpec> load_query_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open query fixture '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, path + ": " + e.what());
  }
  if (!doc.is_array()) fail(ErrorCode::kParse, path + ": expected an array");
  std::vector<QuerySpec> out;
  for (const auto& item : doc) {
    try {
      QuerySpec q;
      q.words = item.at("words").get<std::vector<std::string>>();
      q.category = parse_category(item.at("category").get<std::string>());
      const auto complexity = item.at("complexity").get<std::string>();
      if (complexity == "simple") {
        q.complexity = QueryComplexity::kSimple;
      } else if (complexity == "complex") {
        q.complexity = QueryComplexity::kComplex;
      } else {
        fail(ErrorCode::kParse, "unknown complexity '" + complexity + "'");
      }
      q.validate();
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, path + ": " + e.what());
    }
  }
  return out;
}

std::vector<QuerySpec> concept_queries(std::span<const std::string> concepts) {
  std::vector<QuerySpec> out;
  const auto category = [](std::size_t i) {
    return static_cast<QueryCategory>(i % 4);
  };
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    out.push_back({{concepts[i]}, category(i), QueryComplexity::kSimple});
  }
  if (concepts.size() >= 2) {
    for (std::size_t i = 0; i < concepts.size(); ++i) {
      const auto& next = concepts[(i + 1) % concepts.size()];
      if (concepts.size() == 2 && i == 1) break;
      out.push_back({{concepts[i], next}, category(i), QueryComplexity::kComplex});
    }
  }
  return out;
}

double precision_at_k(const std::vector<bool>& relevance, std::size_t k) {
  if (k == 0) fail(ErrorCode::kUsage, "k must be >= 1");
  const std::size_t n = std::min(k, relevance.size());
  const auto hits = std::count(relevance.begin(), relevance.begin() + n, true);
  return static_cast<double>(hits) / static_cast<double>(k);
}

bool relevance_complex(const QuerySpec& query,
                       std::span<const std::string> labels) {
  return std::all_of(query.words.begin(), query.words.end(),
                     [&](const std::string& word) {
                       return std::find(labels.begin(), labels.end(), word) !=
                              labels.end();
                     });
}

double average_precision(const std::vector<bool>& relevance) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (!relevance[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double r_squared(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorCode::kShape, "r_squared inputs have different lengths");
  }
  if (x.size() < 2) fail(ErrorCode::kUndefined, "r_squared needs >= 2 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) fail(ErrorCode::kUndefined, "r_squared: x is constant");
  if (syy == 0.0) fail(ErrorCode::kUndefined, "r_squared: y is constant");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (slope * x[i] + intercept);
    ss_res += r * r;
  }
  return 1.0 - ss_res / syy;
}

std::string report_json(const EvalReport& report) {
  json out;
  out["protocol"] = report.protocol;
  out["aggregates"] = report.aggregates;
  out["metadata"] = report.metadata;
  json entries = json::array();
  for (const auto& e : report.entries) {
    json item{{"name", e.name}, {"value", e.value}, {"flagged", e.flagged}};
    if (!e.category.empty()) item["category"] = e.category;
    if (!e.complexity.empty()) item["complexity"] = e.complexity;
    if (!e.note.empty()) item["note"] = e.note;
    entries.push_back(std::move(item));
  }
  out["entries"] = std::move(entries);
  return out.dump(2);
}

namespace {

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string number(double v) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << v;
  return out.str();
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  auto meta = [&](const char* key) {
    auto it = report.metadata.find(key);
    return it == report.metadata.end() ? std::string() : it->second;
  };
  auto agg = [&](const char* key) {
    auto it = report.aggregates.find(key);
    return it == report.aggregates.end() ? std::string() : number(it->second);
  };
  if (report.protocol == "p5") {
    // One row per text embedding.
    out << "text_embedding,aggregation,all,simple,complex\n";
    out << csv_field(meta("text_embedding")) << ','
        << csv_field(meta("aggregation")) << ',' << agg("all") << ','
        << agg("simple") << ',' << agg("complex") << '\n';
  } else if (report.protocol == "corr") {
    out << "n_pairs,r2,mean_image_distance_sharing,mean_image_distance_disjoint\n";
    out << meta("n_pairs") << ',' << agg("r2") << ','
        << agg("mean_image_distance_sharing") << ','
        << agg("mean_image_distance_disjoint") << '\n';
  } else {
    // One row per concept (or query), then MAP.
    out << "name,ap\n";
    for (const auto& e : report.entries) {
      out << csv_field(e.name) << ',' << number(e.value) << '\n';
    }
    out << "MAP," << agg("map") << '\n';
  }
  return out.str();
}

Vector embed_query_spec(const TextEmbedder& text, Aggregation aggregation,
                        const QuerySpec& query) {
  std::vector<WeightedVector> terms;
  for (const auto& word : query.words) {
    const auto tokens = tokenize(word);
    terms.push_back({text.embed(tokens, aggregation).vector, 1.0});
  }
  return compose_query(terms);
}

namespace {

const std::vector<std::string>& labels_of(const Corpus& corpus,
                                          const std::string& id) {
  static const std::vector<std::string> kNone;
  const Document* doc = corpus.find(id);
  if (!doc) return kNone;
  return doc->labels ? *doc->labels : kNone;
}

bool in_pool(const Document& doc, std::span<const Split> pool) {
  return pool.empty() ||
         std::find(pool.begin(), pool.end(), doc.split) != pool.end();
}

std::string pool_name(std::span<const Split> pool) {
  if (pool.empty()) return "all";
  std::string out;
  for (auto s : pool) {
    if (!out.empty()) out += '+';
    out += split_name(s);
  }
  return out;
}

}  // namespace

EvalReport eval_p5_suite(const RetrievalIndex& index, const TextEmbedder& text,
                         Aggregation aggregation,
                         std::span<const QuerySpec> queries,
                         const Corpus& labels) {
  EvalReport report;
  report.protocol = "p5";
  report.metadata["text_embedding"] = std::string(method_name(text.method()));
  report.metadata["aggregation"] = std::string(aggregation_name(aggregation));
  report.metadata["relevance"] =
      "label-based: simple queries need the word, complex queries need both";
  report.metadata["index_size"] = std::to_string(index.size());
  std::vector<double> all, simple, complex;
  for (const auto& query : queries) {
    query.validate();
    ReportEntry entry;
    entry.name = query.text();
    entry.category = std::string(category_name(query.category));
    entry.complexity =
        query.complexity == QueryComplexity::kSimple ? "simple" : "complex";
    try {
      const auto q = embed_query_spec(text, aggregation, query);
      const auto top = index.query_nearest(q, 5);
      std::vector<bool> relevance;
      for (const auto& hit : top) {
        relevance.push_back(relevance_complex(query, labels_of(labels, hit.id)));
      }
      entry.value = precision_at_k(relevance, 5);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnembeddable &&
          e.code() != ErrorCode::kDegenerateQuery) {
        throw;
      }
      entry.value = 0.0;
      entry.flagged = true;
      entry.note = e.what();
    }
    all.push_back(entry.value);
    (query.complexity == QueryComplexity::kSimple ? simple : complex)
        .push_back(entry.value);
    report.entries.push_back(std::move(entry));
  }
  report.aggregates["all"] = mean(all);
  report.aggregates["simple"] = mean(simple);
  report.aggregates["complex"] = mean(complex);
  return report;
}

std::vector<bool> ranked_relevance(
    const RetrievalIndex& index, std::span<const double> query,
    const std::function<bool(const std::string&)>& relevant) {
  const auto ranking = index.query_nearest(query, std::max<std::size_t>(index.size(), 1));
  std::vector<bool> out;
  out.reserve(ranking.size());
  for (const auto& hit : ranking) out.push_back(relevant(hit.id));
  return out;
}

namespace {

std::vector<const Document*> pool_documents(const Corpus& corpus,
                                            std::span<const Split> pool) {
  std::vector<const Document*> out;
  for (const auto& doc : corpus.documents()) {
    if (in_pool(doc, pool) && doc.features) out.push_back(&doc);
  }
  return out;
}

RetrievalIndex index_documents(std::span<const Document* const> docs,
                               const VisualEmbedder& visual) {
  std::vector<std::pair<std::string, Vector>> items;
  items.reserve(docs.size());
  for (const auto* doc : docs) {
    items.emplace_back(doc->id, visual.forward(*doc->features));
  }
  return RetrievalIndex::build(items);
}

}  // namespace

EvalReport eval_tag_query_map(const Corpus& corpus, const VisualEmbedder& visual,
                              const TextEmbedder& text, Aggregation aggregation,
                              const EvalSplit& split) {
  if (!(split.query_fraction > 0.0 && split.query_fraction < 1.0)) {
    fail(ErrorCode::kConfig, "query_fraction must be in (0, 1)");
  }
  auto docs = pool_documents(corpus, split.pool);
  std::erase_if(docs, [](const Document* d) { return d->tags.empty(); });
  if (docs.size() < 2) {
    fail(ErrorCode::kValidation, "tag-query MAP needs >= 2 tagged documents");
  }
  std::mt19937_64 rng(split.seed);
  std::shuffle(docs.begin(), docs.end(), rng);
  auto n_queries = static_cast<std::size_t>(
      std::llround(split.query_fraction * static_cast<double>(docs.size())));
  n_queries = std::clamp<std::size_t>(n_queries, 1, docs.size() - 1);
  std::vector<const Document*> queries(docs.begin(), docs.begin() + n_queries);
  std::vector<const Document*> retrieval(docs.begin() + n_queries, docs.end());
  if (split.max_queries > 0 && queries.size() > split.max_queries) {
    queries.resize(split.max_queries);
  }
  const auto index = index_documents(retrieval, visual);

  EvalReport report;
  report.protocol = "tagmap";
  report.metadata["relevance"] = "shares at least one tag with the query";
  report.metadata["pool"] = pool_name(split.pool);
  report.metadata["query_fraction"] = std::to_string(split.query_fraction);
  report.metadata["queries"] = std::to_string(queries.size());
  report.metadata["retrieval_set"] = std::to_string(retrieval.size());
  std::vector<double> aps;
  for (const auto* qdoc : queries) {
    ReportEntry entry;
    entry.name = qdoc->id;
    std::vector<std::string> tokens;
    for (const auto& tag : qdoc->tags) {
      auto t = tokenize(tag);
      tokens.insert(tokens.end(), t.begin(), t.end());
    }
    try {
      const auto q = text.embed(tokens, aggregation).vector;
      const std::set<std::string> tags(qdoc->tags.begin(), qdoc->tags.end());
      const auto relevance = ranked_relevance(index, q, [&](const std::string& id) {
        const auto& other = corpus.find(id)->tags;
        return std::any_of(other.begin(), other.end(),
                           [&](const std::string& t) { return tags.count(t) > 0; });
      });
      entry.value = average_precision(relevance);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnembeddable) throw;
      entry.flagged = true;
      entry.note = e.what();
    }
    aps.push_back(entry.value);
    report.entries.push_back(std::move(entry));
  }
  report.aggregates["map"] = mean(aps);
  return report;
}

EvalReport eval_concept_ap(const Corpus& corpus, const VisualEmbedder& visual,
                           const TextEmbedder& text, Aggregation aggregation,
                           std::span<const std::string> concepts,
                           const EvalSplit& split) {
  const auto docs = pool_documents(corpus, split.pool);
  if (docs.empty()) {
    fail(ErrorCode::kValidation, "concept AP pool has no documents with features");
  }
  for (const auto* doc : docs) {
    if (!doc->labels) {
      fail(ErrorCode::kValidation, "concept AP needs ground-truth labels; "
                                   "document '" + doc->id + "' has none");
    }
  }
  std::vector<std::string> names(concepts.begin(), concepts.end());
  if (names.empty()) {
    std::set<std::string> all;
    for (const auto* doc : docs) all.insert(doc->labels->begin(), doc->labels->end());
    names.assign(all.begin(), all.end());
  }
  const auto index = index_documents(docs, visual);

  EvalReport report;
  report.protocol = "conceptap";
  report.metadata["relevance"] = "item is labelled with the concept";
  report.metadata["pool"] = pool_name(split.pool);
  report.metadata["retrieval_set"] = std::to_string(docs.size());
  std::vector<double> aps;
  for (const auto& concept_name : names) {
    ReportEntry entry;
    entry.name = concept_name;
    try {
      const auto tokens = tokenize(concept_name);
      const auto q = text.embed(tokens, aggregation).vector;
      const auto relevance = ranked_relevance(index, q, [&](const std::string& id) {
        const auto& labels = *corpus.find(id)->labels;
        return std::find(labels.begin(), labels.end(), concept_name) != labels.end();
      });
      entry.value = average_precision(relevance);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUnembeddable) throw;
      entry.flagged = true;
      entry.note = e.what();
    }
    aps.push_back(entry.value);
    report.entries.push_back(std::move(entry));
  }
  report.aggregates["map"] = mean(aps);
  return report;
}

CorrelationStudy distance_correlation_study(
    const Corpus& corpus, const TextEmbedder& text, const VisualEmbedder& visual,
    Aggregation aggregation, std::size_t n_pairs, std::uint64_t seed,
    std::span<const Split> pool) {
  if (n_pairs < 2) fail(ErrorCode::kConfig, "n_pairs must be >= 2");
  struct Entry {
    const Document* doc;
    Vector text;
    Vector image;
  };
  std::vector<Entry> entries;
  for (const auto& doc : corpus.documents()) {
    if (!in_pool(doc, pool) || !doc.features || doc.tags.empty()) continue;
    const auto tokens = document_tokens(doc);
    Vector t;
    try {
      t = text.embed(tokens, aggregation).vector;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnembeddable) continue;
      throw;
    }
    entries.push_back({&doc, std::move(t), visual.forward(*doc.features)});
  }
  if (entries.size() < 2) {
    fail(ErrorCode::kValidation,
         "distance study needs >= 2 documents with features and tags");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, entries.size() - 2);
  CorrelationStudy study;
  std::vector<double> tx, iy;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const std::size_t a = pick(rng);
    std::size_t b = pick_other(rng);
    if (b >= a) ++b;
    const auto& ea = entries[a];
    const auto& eb = entries[b];
    PairPoint point;
    point.first = ea.doc->id;
    point.second = eb.doc->id;
    const double text_sim = dot<double, double>(ea.text, eb.text);
    const double ta = norm<double>(ea.text), tb = norm<double>(eb.text);
    const double ia = norm<double>(ea.image), ib = norm<double>(eb.image);
    if (ta == 0.0 || tb == 0.0 || ia == 0.0 || ib == 0.0) {
      fail(ErrorCode::kUndefined, "zero embedding in distance study");
    }
    point.text_distance = 1.0 - text_sim / (ta * tb);
    point.image_distance =
        1.0 - dot<double, double>(ea.image, eb.image) / (ia * ib);
    for (const auto& tag : ea.doc->tags) {
      if (std::find(eb.doc->tags.begin(), eb.doc->tags.end(), tag) !=
          eb.doc->tags.end()) {
        ++point.shared_tags;
      }
    }
    tx.push_back(point.text_distance);
    iy.push_back(point.image_distance);
    study.pairs.push_back(std::move(point));
  }

  auto normalize = [](std::vector<double>& v, const char* axis) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double min = *lo, range = *hi - *lo;
    if (!(range > 0.0)) {
      fail(ErrorCode::kUndefined, std::string("distance study: constant ") +
                                      axis + " distances");
    }
    for (auto& x : v) x = (x - min) / range;
  };
  normalize(tx, "text");
  normalize(iy, "image");
  study.bucket_image_mean.assign(5, 0.0);
  study.bucket_count.assign(5, 0);
  double sharing = 0.0, disjoint = 0.0;
  std::size_t n_sharing = 0, n_disjoint = 0;
  for (std::size_t i = 0; i < study.pairs.size(); ++i) {
    auto& point = study.pairs[i];
    point.text_distance = tx[i];
    point.image_distance = iy[i];
    const auto bucket = static_cast<std::size_t>(std::min(point.shared_tags, 4));
    study.bucket_image_mean[bucket] += iy[i];
    ++study.bucket_count[bucket];
    if (point.shared_tags > 0) {
      sharing += iy[i];
      ++n_sharing;
    } else {
      disjoint += iy[i];
      ++n_disjoint;
    }
  }
  for (std::size_t b = 0; b < 5; ++b) {
    if (study.bucket_count[b]) study.bucket_image_mean[b] /= study.bucket_count[b];
  }
  study.mean_image_distance_sharing =
      n_sharing ? sharing / n_sharing : std::nan("");
  study.mean_image_distance_disjoint =
      n_disjoint ? disjoint / n_disjoint : std::nan("");
  study.r2 = r_squared(tx, iy);
  return study;
}

EvalReport correlation_report(const CorrelationStudy& study) {
  EvalReport report;
  report.protocol = "corr";
  report.metadata["n_pairs"] = std::to_string(study.pairs.size());
  report.metadata["distance"] = "cosine distance, min-max normalized per axis";
  report.aggregates["r2"] = study.r2;
  report.aggregates["mean_image_distance_sharing"] =
      study.mean_image_distance_sharing;
  report.aggregates["mean_image_distance_disjoint"] =
      study.mean_image_distance_disjoint;
  static const char* kBuckets[] = {"0", "1", "2", "3", ">=4"};
  for (std::size_t b = 0; b < study.bucket_count.size(); ++b) {
    ReportEntry entry;
    entry.name = std::string("shared_tags_") + kBuckets[b];
    entry.value = study.bucket_image_mean[b];
    entry.note = std::to_string(study.bucket_count[b]) + " pairs";
    report.entries.push_back(std::move(entry));
  }
  return report;
}

void write_pairs_csv(const CorrelationStudy& study, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "text_dist,image_dist,shared_tags\n";
  out.precision(17);
  for (const auto& p : study.pairs) {
    out << p.text_distance << ',' << p.image_distance << ',' << p.shared_tags
        << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "error writing '" + path + "'");
}

}  // namespace semspace
