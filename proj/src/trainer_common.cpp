#include "trainer_common.hpp"

#include "error.hpp"

namespace semspace::detail {

TrainingData prepare_training_data(const Corpus& corpus,
                                   const EmbeddingConfig& config) {
  config.validate();
  TrainingData data;
  std::vector<std::vector<std::string>> streams;
  std::vector<std::string> ids;
  for (const auto& doc : corpus.documents()) {
    if (doc.split != Split::kTrain) continue;
    streams.push_back(document_tokens(doc));
    ids.push_back(doc.id);
  }
  if (streams.empty()) {
    fail(ErrorCode::kValidation, "corpus has no train-split documents");
  }
  data.vocab = Vocabulary::build(streams, config.min_count);
  data.idf = compute_tfidf_stats(corpus, data.vocab).idf;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    auto encoded = data.vocab.encode(streams[i]);
    if (encoded.empty()) continue;
    data.total_tokens += encoded.size();
    data.docs.push_back(std::move(encoded));
    data.doc_ids.push_back(ids[i]);
  }
  return data;
}

}  // namespace semspace::detail
