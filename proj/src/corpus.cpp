#include "corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "error.hpp"

namespace semspace {

using nlohmann::json;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  fail(ErrorCode::kValidation, "unknown split '" + std::string(name) + "'");
}

namespace {

// Keeps first occurrences only; tags and labels are sets.
std::vector<std::string> dedupe(std::vector<std::string> values) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  out.reserve(values.size());
  for (auto& v : values) {
    if (seen.insert(v).second) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

Corpus::Corpus(std::vector<Document> documents)
    : documents_(std::move(documents)) {
  bool have_dim = false;
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    auto& doc = documents_[i];
    doc.tags = dedupe(std::move(doc.tags));
    if (doc.labels) doc.labels = dedupe(std::move(*doc.labels));
    if (!by_id_.emplace(doc.id, i).second) {
      fail(ErrorCode::kValidation, "duplicate document id '" + doc.id + "'");
    }
    if (doc.features) {
      if (!have_dim) {
        feature_dim_ = doc.features->size();
        have_dim = true;
      } else if (doc.features->size() != feature_dim_) {
        fail(ErrorCode::kValidation,
             "document '" + doc.id + "' has " +
                 std::to_string(doc.features->size()) +
                 " features, expected " + std::to_string(feature_dim_));
      }
    }
  }
}

const Document* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

std::vector<const Document*> Corpus::split(Split split) const {
  std::vector<const Document*> out;
  for (const auto& doc : documents_) {
    if (doc.split == split) out.push_back(&doc);
  }
  return out;
}

namespace {

std::vector<std::string> string_array(const json& value, const char* field,
                                      const std::string& where) {
  if (!value.is_array()) {
    fail(ErrorCode::kParse, where + ": '" + field + "' must be an array");
  }
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) {
      fail(ErrorCode::kParse,
           where + ": '" + field + "' must contain only strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

Document parse_document(const std::string& line, const std::string& where) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, where + ": " + e.what());
  }
  if (!obj.is_object()) fail(ErrorCode::kParse, where + ": expected object");

  Document doc;
  auto id = obj.find("id");
  if (id == obj.end() || !id->is_string()) {
    fail(ErrorCode::kParse, where + ": missing string field 'id'");
  }
  doc.id = id->get<std::string>();
  auto caption = obj.find("caption");
  if (caption != obj.end()) {
    if (!caption->is_string()) {
      fail(ErrorCode::kParse, where + ": 'caption' must be a string");
    }
    doc.caption = caption->get<std::string>();
  }
  if (auto tags = obj.find("tags"); tags != obj.end()) {
    doc.tags = string_array(*tags, "tags", where);
  }
  if (auto labels = obj.find("labels"); labels != obj.end()) {
    doc.labels = string_array(*labels, "labels", where);
  }
  if (auto features = obj.find("features"); features != obj.end()) {
    if (!features->is_array()) {
      fail(ErrorCode::kParse, where + ": 'features' must be an array");
    }
    std::vector<double> values;
    values.reserve(features->size());
    for (const auto& v : *features) {
      if (!v.is_number()) {
        fail(ErrorCode::kParse, where + ": 'features' must contain numbers");
      }
      values.push_back(v.get<double>());
    }
    doc.features = std::move(values);
  }
  auto split = obj.find("split");
  if (split == obj.end() || !split->is_string()) {
    fail(ErrorCode::kParse, where + ": missing string field 'split'");
  }
  try {
    doc.split = parse_split(split->get<std::string>());
  } catch (const Error& e) {
    fail(ErrorCode::kParse, where + ": " + e.what());
  }
  return doc;
}

}  // namespace

Corpus parse_corpus(std::istream& in, const std::string& source_name) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    docs.push_back(
        parse_document(line, source_name + ":" + std::to_string(line_no)));
  }
  return Corpus(std::move(docs));
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open corpus '" + path + "'");
  return parse_corpus(in, path);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  for (const auto& doc : corpus.documents()) {
    json obj = json::object();
    obj["id"] = doc.id;
    obj["caption"] = doc.caption;
    obj["tags"] = doc.tags;
    if (doc.features) obj["features"] = *doc.features;
    if (doc.labels) obj["labels"] = *doc.labels;
    obj["split"] = std::string(split_name(doc.split));
    out << obj.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write corpus '" + path + "'");
  write_corpus(corpus, out);
  if (!out) fail(ErrorCode::kIo, "error writing corpus '" + path + "'");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    auto byte = static_cast<unsigned char>(c);
    bool keep = byte >= 0x80 || (byte >= '0' && byte <= '9') ||
                (byte >= 'a' && byte <= 'z') || (byte >= 'A' && byte <= 'Z');
    if (keep) {
      if (byte >= 'A' && byte <= 'Z') byte = byte - 'A' + 'a';
      current.push_back(static_cast<char>(byte));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> document_tokens(const Document& doc) {
  auto tokens = tokenize(doc.caption);
  for (const auto& tag : doc.tags) {
    auto more = tokenize(tag);
    tokens.insert(tokens.end(), std::make_move_iterator(more.begin()),
                  std::make_move_iterator(more.end()));
  }
  return tokens;
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> streams,
                             std::int64_t min_count) {
  if (min_count < 1) fail(ErrorCode::kConfig, "min_count must be >= 1");
  std::unordered_map<std::string, std::pair<std::int64_t, std::int64_t>> counts;
  for (const auto& stream : streams) {
    std::unordered_set<std::string_view> seen;
    for (const auto& token : stream) {
      auto& entry = counts[token];
      ++entry.first;
      if (seen.insert(token).second) ++entry.second;
    }
  }
  std::vector<std::pair<std::string, std::pair<std::int64_t, std::int64_t>>>
      kept;
  for (auto& [token, c] : counts) {
    if (c.first >= min_count) kept.emplace_back(token, c);
  }
  if (kept.empty()) {
    fail(ErrorCode::kValidation,
         "vocabulary is empty at min_count=" + std::to_string(min_count));
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  std::vector<std::int64_t> freq, df;
  for (auto& [token, c] : kept) {
    tokens.push_back(token);
    freq.push_back(c.first);
    df.push_back(c.second);
  }
  return from_parts(std::move(tokens), std::move(freq), std::move(df),
                    static_cast<std::int64_t>(streams.size()));
}

Vocabulary Vocabulary::from_parts(std::vector<std::string> tokens,
                                  std::vector<std::int64_t> frequency,
                                  std::vector<std::int64_t> document_frequency,
                                  std::int64_t document_count) {
  if (frequency.size() != tokens.size() ||
      document_frequency.size() != tokens.size()) {
    fail(ErrorCode::kFormat, "vocabulary columns have different lengths");
  }
  Vocabulary vocab;
  vocab.tokens_ = std::move(tokens);
  vocab.frequency_ = std::move(frequency);
  vocab.document_frequency_ = std::move(document_frequency);
  vocab.document_count_ = document_count;
  vocab.index_.reserve(vocab.tokens_.size());
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    if (!vocab.index_.emplace(vocab.tokens_[i], static_cast<std::int32_t>(i))
             .second) {
      fail(ErrorCode::kFormat, "duplicate vocabulary token '" +
                                   vocab.tokens_[i] + "'");
    }
  }
  return vocab;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kMissing : it->second;
}

std::vector<std::int32_t> Vocabulary::encode(
    std::span<const std::string> tokens) const {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto i = id(t);
    if (i != kMissing) ids.push_back(i);
  }
  return ids;
}

std::vector<std::vector<std::string>> train_streams(const Corpus& corpus) {
  std::vector<std::vector<std::string>> streams;
  for (const auto& doc : corpus.documents()) {
    if (doc.split == Split::kTrain) streams.push_back(document_tokens(doc));
  }
  return streams;
}

Vocabulary build_vocabulary(const Corpus& corpus, std::int64_t min_count) {
  auto streams = train_streams(corpus);
  return Vocabulary::build(streams, min_count);
}

double TfIdfStats::idf_value(std::int64_t document_count, std::int64_t df) {
  return std::log(static_cast<double>(document_count) /
                  static_cast<double>(1 + df)) +
         1.0;
}

TfIdfStats compute_tfidf_stats(const Corpus& corpus, const Vocabulary& vocab) {
  TfIdfStats stats;
  auto streams = train_streams(corpus);
  std::vector<std::int64_t> df(vocab.size(), 0);
  for (const auto& stream : streams) {
    std::unordered_map<std::int32_t, std::int32_t> tf;
    for (auto id : vocab.encode(stream)) ++tf[id];
    for (const auto& [id, count] : tf) ++df[id];
    stats.term_frequency.push_back(std::move(tf));
  }
  const auto n = static_cast<std::int64_t>(streams.size());
  stats.idf.resize(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    stats.idf[i] = TfIdfStats::idf_value(n, df[i]);
  }
  return stats;
}

Corpus filter_low_frequency_tags(const Corpus& corpus,
                                 std::int64_t min_tag_count) {
  std::vector<Document> kept = corpus.documents();
  // Dropping a document lowers the counts of its other tags, so repeat
  // until no tag falls under the threshold.
  for (bool changed = true; changed;) {
    std::unordered_map<std::string, std::int64_t> counts;
    for (const auto& doc : kept) {
      for (const auto& tag : doc.tags) ++counts[tag];
    }
    const std::size_t before = kept.size();
    std::vector<Document> next;
    bool erased = false;
    for (auto& doc : kept) {
      erased |= std::erase_if(doc.tags, [&](const std::string& tag) {
                  return counts[tag] < min_tag_count;
                }) > 0;
      if (doc.tags.empty()) continue;
      if (doc.labels && doc.labels->empty()) continue;
      next.push_back(std::move(doc));
    }
    kept = std::move(next);
    changed = kept.size() != before || erased;
  }
  return Corpus(std::move(kept));
}

}  // namespace semspace
