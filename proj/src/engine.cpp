#include "engine.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace semspace {

std::vector<QueryTerm> parse_query_string(const std::string& query) {
  std::vector<QueryTerm> terms;
  std::istringstream in(query);
  std::string word;
  while (in >> word) {
    QueryTerm term;
    double sign = 1.0;
    std::size_t start = 0;
    if (word[0] == '+' || word[0] == '-') {
      sign = word[0] == '-' ? -1.0 : 1.0;
      start = 1;
    }
    std::string body = word.substr(start);
    double weight = 1.0;
    if (auto colon = body.rfind(':'); colon != std::string::npos) {
      const std::string number = body.substr(colon + 1);
      const char* first = number.data();
      const char* last = number.data() + number.size();
      auto [ptr, ec] = std::from_chars(first, last, weight);
      if (ec != std::errc() || ptr != last || number.empty() ||
          !std::isfinite(weight)) {
        fail(ErrorCode::kUsage, "invalid weight in query term '" + word + "'");
      }
      body.resize(colon);
    }
    if (!body.empty() && body[0] == '@') {
      term.kind = TermKind::kImage;
      body.erase(0, 1);
    }
    if (body.empty()) fail(ErrorCode::kUsage, "empty query term '" + word + "'");
    term.value = std::move(body);
    term.weight = sign * weight;
    terms.push_back(std::move(term));
  }
  if (terms.empty()) fail(ErrorCode::kUsage, "query is empty");
  return terms;
}

RetrievalIndex build_test_index(const Corpus& corpus,
                                const VisualEmbedder& visual) {
  std::vector<std::pair<std::string, Vector>> items;
  for (const auto& doc : corpus.documents()) {
    if (doc.split != Split::kTest) continue;
    if (!doc.features) {
      fail(ErrorCode::kValidation, "test document '" + doc.id + "' lacks features");
    }
    items.emplace_back(doc.id, visual.forward(*doc.features));
  }
  if (items.empty()) fail(ErrorCode::kValidation, "corpus has no test documents");
  return RetrievalIndex::build(items);
}

Engine::Engine(TextEmbedder text, Aggregation aggregation)
    : text_(std::move(text)), aggregation_(aggregation) {}

Engine Engine::open(const EnginePaths& paths, Aggregation aggregation) {
  if (paths.text_model.empty()) {
    fail(ErrorCode::kConfig, "a text model path is required");
  }
  Engine engine(load_embedder(paths.text_model), aggregation);
  if (!paths.corpus.empty()) engine.set_corpus(load_corpus(paths.corpus));
  if (!paths.visual_model.empty()) engine.set_visual(load_visual(paths.visual_model));
  if (!paths.index.empty()) engine.set_index(load_index(paths.index));
  if (engine.index_ && !engine.index_->empty() &&
      engine.index_->dim() != engine.text_.dim()) {
    fail(ErrorCode::kShape, "index dimension does not match the text model");
  }
  return engine;
}

const Corpus& Engine::corpus() const {
  if (!corpus_) fail(ErrorCode::kConfig, "no corpus loaded");
  return *corpus_;
}

const VisualEmbedder& Engine::visual() const {
  if (!visual_) fail(ErrorCode::kConfig, "no visual model loaded");
  return *visual_;
}

const RetrievalIndex& Engine::index() const {
  if (!index_) fail(ErrorCode::kConfig, "no index loaded");
  return *index_;
}

QueryAnswer Engine::query(const std::vector<QueryTerm>& terms,
                          std::size_t k) const {
  if (k < 1) fail(ErrorCode::kUsage, "k must be >= 1");
  if (terms.empty()) fail(ErrorCode::kUsage, "query has no terms");
  const auto& idx = index();
  QueryAnswer answer;
  std::vector<WeightedVector> vectors;
  for (const auto& term : terms) {
    if (!std::isfinite(term.weight)) {
      fail(ErrorCode::kUsage, "query weight is not finite");
    }
    if (term.kind == TermKind::kImage) {
      const auto pos = idx.position(term.value);
      if (pos < 0) fail(ErrorCode::kNotFound, "no indexed image '" + term.value + "'");
      vectors.push_back({idx.vector(static_cast<std::size_t>(pos)), term.weight});
      continue;
    }
    const auto tokens = tokenize(term.value);
    DocumentEmbedding emb;
    try {
      emb = text_.embed(tokens, aggregation_);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnembeddable) {
        fail(ErrorCode::kUnembeddable,
             "query term '" + term.value + "' has no in-vocabulary token");
      }
      throw;
    }
    answer.dropped_tokens.insert(answer.dropped_tokens.end(),
                                 emb.dropped.begin(), emb.dropped.end());
    vectors.push_back({std::move(emb.vector), term.weight});
  }
  const auto q = compose_query(vectors);
  if (idx.empty()) return answer;
  answer.results = idx.query_nearest(q, k);
  return answer;
}

std::string Engine::item_json(const std::string& id) const {
  nlohmann::json out;
  const Document* doc = corpus_ ? corpus_->find(id) : nullptr;
  const bool indexed = index_ && index_->position(id) >= 0;
  if (!doc && !indexed) fail(ErrorCode::kNotFound, "unknown item '" + id + "'");
  out["id"] = id;
  out["indexed"] = indexed;
  if (doc) {
    out["caption"] = doc->caption;
    out["tags"] = doc->tags;
    if (doc->labels) out["labels"] = *doc->labels;
    out["split"] = std::string(split_name(doc->split));
  }
  return out.dump();
}

std::vector<std::string> Engine::vocab_prefix(const std::string& prefix,
                                              std::size_t limit) const {
  std::vector<std::string> out;
  for (const auto& token : text_.vocabulary().tokens()) {
    if (out.size() >= limit) break;
    if (token.compare(0, prefix.size(), prefix) == 0) out.push_back(token);
  }
  return out;
}

}  // namespace semspace
