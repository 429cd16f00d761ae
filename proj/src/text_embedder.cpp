#include "text_embedder.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "binary_io.hpp"
#include "error.hpp"
#include "sgns.hpp"

namespace semspace {

namespace {

constexpr std::uint32_t kEmbedderVersion = 1;

}  // namespace

std::string_view method_name(EmbeddingMethod method) {
  switch (method) {
    case EmbeddingMethod::kLda:
      return "lda";
    case EmbeddingMethod::kWord2Vec:
      return "word2vec";
    case EmbeddingMethod::kFastText:
      return "fasttext";
    case EmbeddingMethod::kDoc2Vec:
      return "doc2vec";
    case EmbeddingMethod::kGlove:
      return "glove";
  }
  return "unknown";
}

EmbeddingMethod parse_method(std::string_view name) {
  for (auto m : {EmbeddingMethod::kLda, EmbeddingMethod::kWord2Vec,
                 EmbeddingMethod::kFastText, EmbeddingMethod::kDoc2Vec,
                 EmbeddingMethod::kGlove}) {
    if (method_name(m) == name) return m;
  }
  fail(ErrorCode::kConfig, "unknown embedding method '" + std::string(name) +
                               "'");
}

std::string_view aggregation_name(Aggregation aggregation) {
  return aggregation == Aggregation::kMean ? "mean" : "tfidf";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::kMean;
  if (name == "tfidf") return Aggregation::kTfIdf;
  fail(ErrorCode::kConfig, "unknown aggregation '" + std::string(name) + "'");
}

EmbeddingConfig EmbeddingConfig::defaults(EmbeddingMethod method) {
  EmbeddingConfig config;
  config.method = method;
  if (method == EmbeddingMethod::kGlove) {
    config.learning_rate = 0.05;
    config.epochs = 25;
  }
  return config;
}

void EmbeddingConfig::validate() const {
  if (dim <= 0) fail(ErrorCode::kConfig, "dim must be positive");
  if (epochs < 0) fail(ErrorCode::kConfig, "epochs must be >= 0");
  if (window < 1) fail(ErrorCode::kConfig, "window must be >= 1");
  if (negatives < 0) fail(ErrorCode::kConfig, "negatives must be >= 0");
  if (min_count < 1) fail(ErrorCode::kConfig, "min_count must be >= 1");
  if (learning_rate <= 0) {
    fail(ErrorCode::kConfig, "learning_rate must be positive");
  }
  if (workers < 1) fail(ErrorCode::kConfig, "workers must be >= 1");
  if (method == EmbeddingMethod::kFastText) {
    if (min_n < 1) fail(ErrorCode::kConfig, "min_n must be >= 1");
    if (min_n > max_n) fail(ErrorCode::kConfig, "min_n must be <= max_n");
  }
  if (method == EmbeddingMethod::kLda) {
    if (beta <= 0) fail(ErrorCode::kConfig, "beta must be positive");
    if (sweeps < 0 || infer_sweeps < 1) {
      fail(ErrorCode::kConfig, "invalid lda sweep counts");
    }
  }
  if (method == EmbeddingMethod::kDoc2Vec && infer_steps < 1) {
    fail(ErrorCode::kConfig, "infer_steps must be >= 1");
  }
  if (method == EmbeddingMethod::kGlove && (x_max <= 0 || power <= 0)) {
    fail(ErrorCode::kConfig, "x_max and power must be positive");
  }
}

TextEmbedder::TextEmbedder(EmbeddingMethod method, std::int32_t dim,
                           Vocabulary vocab, std::vector<double> idf,
                           ModelState state)
    : method_(method),
      dim_(dim),
      vocab_(std::move(vocab)),
      idf_(std::move(idf)),
      state_(std::move(state)) {
  const std::size_t v = vocab_.size();
  const std::size_t d = static_cast<std::size_t>(dim_);
  auto check = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::kShape, std::string("text model: ") + what);
  };
  check(dim_ > 0, "dim must be positive");
  check(idf_.size() == v, "idf table size differs from vocabulary");
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, WordTableModel>) {
          check(m.vectors.size() == v * d, "word table shape");
        } else if constexpr (std::is_same_v<T, FastTextModel>) {
          check(m.ngram_vectors.size() == m.ngrams.size() * d, "n-gram shape");
          for (std::size_t i = 0; i < m.ngrams.size(); ++i) {
            ngram_index_.emplace(m.ngrams[i], static_cast<std::int32_t>(i));
          }
        } else if constexpr (std::is_same_v<T, LdaModel>) {
          check(m.word_topic.size() == v * d, "word-topic shape");
          check(m.topic_word.size() == v * d, "topic-word shape");
        } else {
          check(m.output.size() == v * d, "output table shape");
          check(m.doc_vectors.size() == m.doc_ids.size() * d, "doc shape");
        }
      },
      state_);
  if (method_ == EmbeddingMethod::kDoc2Vec) {
    noise_weights_ = detail::noise_weights(vocab_.frequencies());
  }
}

TextEmbedder TextEmbedder::from_word_table(EmbeddingMethod method,
                                           Vocabulary vocab,
                                           std::vector<double> idf,
                                           std::vector<float> vectors,
                                           std::int32_t dim) {
  return TextEmbedder(method, dim, std::move(vocab), std::move(idf),
                      WordTableModel{std::move(vectors)});
}

double TextEmbedder::unseen_idf() const {
  return TfIdfStats::idf_value(vocab_.document_count(), 0);
}

double TextEmbedder::idf_of(std::string_view token) const {
  auto id = vocab_.id(token);
  return id == Vocabulary::kMissing ? unseen_idf() : idf_[id];
}

std::vector<std::string> TextEmbedder::char_ngrams(std::string_view word,
                                                   std::int32_t min_n,
                                                   std::int32_t max_n) {
  const std::string wrapped = "<" + std::string(word) + ">";
  // Code point start offsets.
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < wrapped.size(); ++i) {
    if ((static_cast<unsigned char>(wrapped[i]) & 0xC0) != 0x80) {
      starts.push_back(i);
    }
  }
  const std::size_t count = starts.size();
  starts.push_back(wrapped.size());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::int32_t n = min_n; n <= max_n; ++n) {
      if (i + n > count) break;
      out.push_back(wrapped.substr(starts[i], starts[i + n] - starts[i]));
    }
  }
  return out;
}

std::optional<Vector> TextEmbedder::fasttext_vector(
    std::string_view token) const {
  const auto& m = std::get<FastTextModel>(state_);
  Vector out(dim_, 0.0);
  bool any = false;
  for (const auto& gram : char_ngrams(token, m.min_n, m.max_n)) {
    auto it = ngram_index_.find(gram);
    if (it == ngram_index_.end()) continue;
    any = true;
    const float* row = m.ngram_vectors.data() +
                       static_cast<std::size_t>(it->second) * dim_;
    for (std::int32_t i = 0; i < dim_; ++i) out[i] += row[i];
  }
  if (!any) return std::nullopt;
  return out;
}

std::optional<Vector> TextEmbedder::word_vector(std::string_view token) const {
  if (method_ == EmbeddingMethod::kFastText) return fasttext_vector(token);
  const auto id = vocab_.id(token);
  if (id == Vocabulary::kMissing) return std::nullopt;
  const std::size_t offset = static_cast<std::size_t>(id) * dim_;
  auto row = [&](const std::vector<float>& table) {
    return Vector(table.begin() + offset, table.begin() + offset + dim_);
  };
  if (auto* table = std::get_if<WordTableModel>(&state_)) {
    return row(table->vectors);
  }
  if (auto* lda = std::get_if<LdaModel>(&state_)) return row(lda->word_topic);
  const std::int32_t ids[] = {id};
  return infer_doc2vec(ids);
}

DocumentEmbedding TextEmbedder::embed(std::span<const std::string> tokens,
                                      Aggregation aggregation) const {
  DocumentEmbedding result;
  if (method_ == EmbeddingMethod::kLda || method_ == EmbeddingMethod::kDoc2Vec) {
    std::vector<std::int32_t> ids;
    for (const auto& t : tokens) {
      auto id = vocab_.id(t);
      if (id == Vocabulary::kMissing) {
        result.dropped.push_back(t);
      } else {
        ids.push_back(id);
      }
    }
    if (ids.empty()) {
      fail(ErrorCode::kUnembeddable, "no token of the query is representable");
    }
    result.vector = method_ == EmbeddingMethod::kLda ? infer_lda(ids)
                                                     : infer_doc2vec(ids);
    return result;
  }

  // Sorted distinct tokens make the sum independent of token order.
  std::map<std::string_view, std::int64_t> counts;
  for (const auto& t : tokens) ++counts[t];
  Vector sum(dim_, 0.0);
  double total_weight = 0.0;
  for (const auto& [token, count] : counts) {
    auto vec = word_vector(token);
    if (!vec) {
      for (std::int64_t i = 0; i < count; ++i) {
        result.dropped.emplace_back(token);
      }
      continue;
    }
    const double weight = aggregation == Aggregation::kMean
                              ? static_cast<double>(count)
                              : static_cast<double>(count) * idf_of(token);
    for (std::int32_t i = 0; i < dim_; ++i) sum[i] += weight * (*vec)[i];
    total_weight += weight;
  }
  if (total_weight <= 0.0) {
    fail(ErrorCode::kUnembeddable, "no token of the query is representable");
  }
  for (auto& x : sum) x /= total_weight;
  result.vector = std::move(sum);
  return result;
}

Vector TextEmbedder::infer_lda(std::span<const std::int32_t> ids) const {
  const auto& m = std::get<LdaModel>(state_);
  const std::size_t k_topics = static_cast<std::size_t>(dim_);
  const std::size_t v = vocab_.size();
  detail::Rng rng(m.seed);
  std::uniform_int_distribution<std::int32_t> init(0, dim_ - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::int32_t> z(ids.size());
  std::vector<double> topic_count(k_topics, 0.0);
  for (auto& zi : z) {
    zi = init(rng);
    topic_count[zi] += 1.0;
  }
  Vector theta(k_topics, 0.0);
  std::vector<double> p(k_topics);
  const std::int32_t burn_in = m.infer_sweeps / 2;
  const double denom = static_cast<double>(ids.size()) + k_topics * m.alpha;
  for (std::int32_t sweep = 0; sweep < m.infer_sweeps; ++sweep) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      topic_count[z[i]] -= 1.0;
      double total = 0.0;
      for (std::size_t k = 0; k < k_topics; ++k) {
        total += (topic_count[k] + m.alpha) * m.topic_word[k * v + ids[i]];
        p[k] = total;
      }
      const double u = unit(rng) * total;
      std::size_t k = 0;
      while (k + 1 < k_topics && p[k] <= u) ++k;
      z[i] = static_cast<std::int32_t>(k);
      topic_count[k] += 1.0;
    }
    if (sweep >= burn_in) {
      for (std::size_t k = 0; k < k_topics; ++k) {
        theta[k] += (topic_count[k] + m.alpha) / denom;
      }
    }
  }
  const double samples = static_cast<double>(m.infer_sweeps - burn_in);
  for (auto& t : theta) t /= samples;
  return theta;
}

Vector TextEmbedder::infer_doc2vec(std::span<const std::int32_t> ids) const {
  const auto& m = std::get<Doc2VecModel>(state_);
  detail::Rng rng(m.seed);
  detail::NoiseSampler noise(noise_weights_);
  std::uniform_real_distribution<float> init(-0.5f / dim_, 0.5f / dim_);
  std::vector<float> vec(dim_);
  for (auto& x : vec) x = init(rng);
  std::vector<float> step(dim_);
  // The output table is only read when update_output is false.
  auto* output = const_cast<float*>(m.output.data());
  for (std::int32_t s = 0; s < m.infer_steps; ++s) {
    const double progress = static_cast<double>(s) / m.infer_steps;
    const auto lr = static_cast<float>(
        m.learning_rate * std::max(1e-4, 1.0 - progress));
    for (auto id : ids) {
      std::fill(step.begin(), step.end(), 0.0f);
      detail::sgns_pair<false>(vec, output, dim_, id, noise, rng,
                               m.negatives, lr, step, false);
      for (std::int32_t i = 0; i < dim_; ++i) vec[i] += step[i];
    }
  }
  return Vector(vec.begin(), vec.end());
}

std::vector<float> TextEmbedder::word_rows() const {
  const std::size_t v = vocab_.size();
  const std::size_t d = static_cast<std::size_t>(dim_);
  if (auto* table = std::get_if<WordTableModel>(&state_)) return table->vectors;
  if (auto* lda = std::get_if<LdaModel>(&state_)) return lda->word_topic;
  if (auto* doc = std::get_if<Doc2VecModel>(&state_)) return doc->output;
  std::vector<float> rows(v * d, 0.0f);
  for (std::size_t w = 0; w < v; ++w) {
    auto vec = fasttext_vector(vocab_.token(static_cast<std::int32_t>(w)));
    if (!vec) continue;
    for (std::size_t i = 0; i < d; ++i) {
      rows[w * d + i] = static_cast<float>((*vec)[i]);
    }
  }
  return rows;
}

Vector embed_document(const TextEmbedder& embedder,
                      std::span<const std::string> tokens,
                      Aggregation aggregation) {
  return embedder.embed(tokens, aggregation).vector;
}

TextEmbedder train_text_embedder(const Corpus& corpus,
                                 const EmbeddingConfig& config) {
  switch (config.method) {
    case EmbeddingMethod::kLda:
      return train_lda(corpus, config);
    case EmbeddingMethod::kWord2Vec:
      return train_word2vec(corpus, config);
    case EmbeddingMethod::kFastText:
      return train_fasttext(corpus, config);
    case EmbeddingMethod::kDoc2Vec:
      return train_doc2vec(corpus, config);
    case EmbeddingMethod::kGlove:
      return train_glove(corpus, config);
  }
  fail(ErrorCode::kConfig, "unknown embedding method");
}

void save_embedder(const TextEmbedder& embedder, const std::string& path) {
  const auto& vocab = embedder.vocabulary();
  BinaryWriter out(path);
  out.magic("SSTE");
  out.scalar<std::uint32_t>(kEmbedderVersion);
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(embedder.method()));
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(embedder.dim()));
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(vocab.size()));
  const auto rows = embedder.word_rows();
  out.array<float>(rows);

  for (const auto& token : vocab.tokens()) out.string(token);
  out.array<std::int64_t>(vocab.frequencies());
  out.array<std::int64_t>(vocab.document_frequencies());
  out.scalar<std::int64_t>(vocab.document_count());
  out.array<double>(embedder.idf());

  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FastTextModel>) {
          out.scalar<std::int32_t>(m.min_n);
          out.scalar<std::int32_t>(m.max_n);
          out.scalar<std::uint32_t>(static_cast<std::uint32_t>(m.ngrams.size()));
          for (const auto& g : m.ngrams) out.string(g);
          out.array<float>(m.ngram_vectors);
        } else if constexpr (std::is_same_v<T, LdaModel>) {
          out.scalar<double>(m.alpha);
          out.scalar<double>(m.beta);
          out.scalar<std::int32_t>(m.infer_sweeps);
          out.scalar<std::uint64_t>(m.seed);
          out.array<float>(m.topic_word);
        } else if constexpr (std::is_same_v<T, Doc2VecModel>) {
          out.scalar<std::int32_t>(m.infer_steps);
          out.scalar<std::int32_t>(m.negatives);
          out.scalar<double>(m.learning_rate);
          out.scalar<std::uint64_t>(m.seed);
          out.scalar<std::uint32_t>(static_cast<std::uint32_t>(m.doc_ids.size()));
          for (const auto& id : m.doc_ids) out.string(id);
          out.array<float>(m.doc_vectors);
        }
      },
      embedder.state());
  out.finish();
}

TextEmbedder load_embedder(const std::string& path) {
  BinaryReader in(path);
  in.expect_magic("SSTE", "text embedder");
  const auto version = in.scalar<std::uint32_t>();
  if (version != kEmbedderVersion) {
    fail(ErrorCode::kFormat, "'" + path + "' has unsupported version " +
                                 std::to_string(version));
  }
  const auto tag = in.scalar<std::uint32_t>();
  if (tag > static_cast<std::uint32_t>(EmbeddingMethod::kGlove)) {
    fail(ErrorCode::kFormat, "'" + path + "' has unknown method tag " +
                                 std::to_string(tag));
  }
  const auto method = static_cast<EmbeddingMethod>(tag);
  const auto dim = in.scalar<std::uint32_t>();
  const auto v = in.scalar<std::uint32_t>();
  if (dim == 0 || dim > (1u << 20)) {
    fail(ErrorCode::kFormat, "'" + path + "' has invalid dimension");
  }
  auto rows = in.array<float>(static_cast<std::uint64_t>(v) * dim);

  std::vector<std::string> tokens;
  tokens.reserve(v);
  for (std::uint32_t i = 0; i < v; ++i) tokens.push_back(in.string());
  auto freq = in.array<std::int64_t>(v);
  auto df = in.array<std::int64_t>(v);
  const auto doc_count = in.scalar<std::int64_t>();
  auto idf = in.array<double>(v);
  auto vocab = Vocabulary::from_parts(std::move(tokens), std::move(freq),
                                      std::move(df), doc_count);

  ModelState state;
  switch (method) {
    case EmbeddingMethod::kWord2Vec:
    case EmbeddingMethod::kGlove:
      state = WordTableModel{std::move(rows)};
      break;
    case EmbeddingMethod::kFastText: {
      FastTextModel m;
      m.min_n = in.scalar<std::int32_t>();
      m.max_n = in.scalar<std::int32_t>();
      const auto g = in.scalar<std::uint32_t>();
      for (std::uint32_t i = 0; i < g; ++i) m.ngrams.push_back(in.string());
      m.ngram_vectors = in.array<float>(static_cast<std::uint64_t>(g) * dim);
      state = std::move(m);
      break;
    }
    case EmbeddingMethod::kLda: {
      LdaModel m;
      m.alpha = in.scalar<double>();
      m.beta = in.scalar<double>();
      m.infer_sweeps = in.scalar<std::int32_t>();
      m.seed = in.scalar<std::uint64_t>();
      m.topic_word = in.array<float>(static_cast<std::uint64_t>(v) * dim);
      m.word_topic = std::move(rows);
      state = std::move(m);
      break;
    }
    case EmbeddingMethod::kDoc2Vec: {
      Doc2VecModel m;
      m.infer_steps = in.scalar<std::int32_t>();
      m.negatives = in.scalar<std::int32_t>();
      m.learning_rate = in.scalar<double>();
      m.seed = in.scalar<std::uint64_t>();
      const auto n = in.scalar<std::uint32_t>();
      for (std::uint32_t i = 0; i < n; ++i) m.doc_ids.push_back(in.string());
      m.doc_vectors = in.array<float>(static_cast<std::uint64_t>(n) * dim);
      m.output = std::move(rows);
      state = std::move(m);
      break;
    }
  }
  in.expect_end();
  return TextEmbedder(method, static_cast<std::int32_t>(dim), std::move(vocab),
                      std::move(idf), std::move(state));
}

void export_word_vectors(const TextEmbedder& embedder,
                         const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  const auto& vocab = embedder.vocabulary();
  const auto rows = embedder.word_rows();
  const std::size_t d = static_cast<std::size_t>(embedder.dim());
  out << vocab.size() << ' ' << d << '\n';
  char buf[32];
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    out << vocab.token(static_cast<std::int32_t>(w));
    for (std::size_t i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof(buf), " %.9g", rows[w * d + i]);
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "error writing '" + path + "'");
}

}  // namespace semspace
