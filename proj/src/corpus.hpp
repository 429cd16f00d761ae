#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semspace {

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

/// One image-text pair. `features` stands in for the image itself.
struct Document {
  std::string id;
  std::string caption;
  std::vector<std::string> tags;
  std::optional<std::vector<double>> features;
  std::optional<std::vector<std::string>> labels;
  Split split = Split::kTrain;

  bool operator==(const Document&) const = default;
};

/// Ordered, validated document collection: unique ids, uniform feature length.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  /// Length shared by every feature vector, 0 when no document has one.
  std::size_t feature_dim() const { return feature_dim_; }

  const Document* find(std::string_view id) const;
  std::vector<const Document*> split(Split split) const;

  bool operator==(const Corpus& other) const {
    return documents_ == other.documents_;
  }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t feature_dim_ = 0;
};

/// Reads the JSON-lines corpus format. Blank lines are skipped.
Corpus load_corpus(const std::string& path);
Corpus parse_corpus(std::istream& in, const std::string& source_name);
void save_corpus(const Corpus& corpus, const std::string& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

/// Lowercases ASCII, splits on runs of non-alphanumeric ASCII characters.
/// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

/// Text stream of a document: caption tokens followed by tag tokens.
std::vector<std::string> document_tokens(const Document& doc);

class Vocabulary {
 public:
  static constexpr std::int32_t kMissing = -1;

  Vocabulary() = default;

  /// Ids ordered by descending frequency, ties by token.
  static Vocabulary build(std::span<const std::vector<std::string>> streams,
                          std::int64_t min_count);

  /// Rebuilds from persisted columns; ids follow the given order.
  static Vocabulary from_parts(std::vector<std::string> tokens,
                               std::vector<std::int64_t> frequency,
                               std::vector<std::int64_t> document_frequency,
                               std::int64_t document_count);

  std::size_t size() const { return tokens_.size(); }
  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_[id]; }
  std::int64_t frequency(std::int32_t id) const { return frequency_[id]; }
  std::int64_t document_frequency(std::int32_t id) const {
    return document_frequency_[id];
  }
  std::int64_t document_count() const { return document_count_; }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::int64_t>& frequencies() const { return frequency_; }
  const std::vector<std::int64_t>& document_frequencies() const {
    return document_frequency_;
  }

  /// Maps a token stream to ids, dropping unknown tokens.
  std::vector<std::int32_t> encode(std::span<const std::string> tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::int64_t> frequency_;
  std::vector<std::int64_t> document_frequency_;
  std::int64_t document_count_ = 0;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Token streams of the train split, in corpus order.
std::vector<std::vector<std::string>> train_streams(const Corpus& corpus);

/// Vocabulary over the train split. Throws when nothing survives.
Vocabulary build_vocabulary(const Corpus& corpus, std::int64_t min_count);

struct TfIdfStats {
  /// Indexed by vocabulary id: ln(N / (1 + df)) + 1.
  std::vector<double> idf;
  /// Raw term counts per train document, keyed by vocabulary id.
  std::vector<std::unordered_map<std::int32_t, std::int32_t>> term_frequency;

  static double idf_value(std::int64_t document_count, std::int64_t df);
};

TfIdfStats compute_tfidf_stats(const Corpus& corpus, const Vocabulary& vocab);

/// Drops tags seen on fewer than `min_tag_count` documents, then drops
/// documents left without tags or with an explicitly empty label set.
Corpus filter_low_frequency_tags(const Corpus& corpus,
                                 std::int64_t min_tag_count = 20);

}  // namespace semspace
