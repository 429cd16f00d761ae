#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "text_embedder.hpp"
#include "vecmath.hpp"

namespace semspace {

enum class Activation : std::uint32_t { kIdentity = 0, kRelu = 1 };

struct DenseLayer {
  std::int32_t in = 0;
  std::int32_t out = 0;
  Activation activation = Activation::kIdentity;
  std::vector<float> weight;  // out x in, row-major
  std::vector<float> bias;    // out

  bool operator==(const DenseLayer&) const = default;
};

/// Feed-forward regressor from image features into the text space:
/// rectifier hidden layers, identity output.
class VisualEmbedder {
 public:
  explicit VisualEmbedder(std::vector<DenseLayer> layers);

  /// He-scaled normal weights (variance 2 / fan_in), zero biases.
  static VisualEmbedder initialize(std::int32_t input_dim,
                                   std::span<const std::int32_t> hidden,
                                   std::int32_t output_dim, std::uint64_t seed);

  std::int32_t input_dim() const { return layers_.front().in; }
  std::int32_t output_dim() const { return layers_.back().out; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  std::size_t parameter_count() const;
  bool parameters_finite() const;

  Vector forward(std::span<const double> feature) const;

  bool operator==(const VisualEmbedder&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as the predictions
};

/// Mean over the batch of the component-averaged binary cross-entropy
/// between sigmoid(targets) and sigmoid(predictions). Both spans are
/// batch x dim row-major. Gradient wrt prediction z is
/// (sigmoid(z) - sigmoid(target)) / (batch * dim).
LossResult sigmoid_xent_loss(std::span<const double> targets,
                             std::span<const double> predictions,
                             std::size_t batch, std::size_t dim);

/// Mean binary entropy of sigmoid(targets): the loss lower bound.
double entropy_floor(std::span<const double> targets);

struct TrainConfig {
  double learning_rate = 0.001;
  double decay_factor = 0.1;
  std::int64_t decay_interval = 100000;
  double momentum = 0.9;
  std::int32_t batch_size = 120;
  std::int64_t max_iterations = 1000;
  std::uint64_t seed = 1;
  std::vector<std::int32_t> hidden = {256};
  // Mini-batch loss is recorded every `log_interval` iterations.
  std::int64_t log_interval = 10;

  void validate() const;
  double rate_at(std::int64_t iteration) const;
};

struct RegressionSet {
  std::vector<double> features;  // n x input_dim
  std::vector<double> targets;   // n x output_dim
  std::size_t count = 0;
  std::int32_t input_dim = 0;
  std::int32_t output_dim = 0;
};

struct VisualTrainingResult {
  VisualEmbedder model;
  std::vector<std::pair<std::int64_t, double>> loss_curve;
  double initial_loss = 0.0;  // full training set, before the first step
  double final_loss = 0.0;    // full training set, after the last step
};

/// Momentum SGD with step decay on the sigmoid cross-entropy loss.
VisualTrainingResult train_regressor(const RegressionSet& data,
                                     const TrainConfig& config);

/// Targets are the text embeddings of train documents (caption then tags).
RegressionSet build_regression_set(const Corpus& corpus,
                                   const TextEmbedder& text,
                                   Aggregation aggregation);

VisualTrainingResult train_visual(const Corpus& corpus, const TextEmbedder& text,
                                  Aggregation aggregation,
                                  const TrainConfig& config);

/// Full-set loss of `model` on `data`.
double regression_loss(const VisualEmbedder& model, const RegressionSet& data);

/// Backpropagated parameter gradients of the loss on (features, targets)
/// against central differences; returns the max relative error.
double gradient_check(const VisualEmbedder& model,
                      std::span<const double> features,
                      std::span<const double> targets, std::size_t batch,
                      double epsilon);

void save_visual(const VisualEmbedder& model, const std::string& path);
VisualEmbedder load_visual(const std::string& path);
void write_loss_curve_csv(
    std::span<const std::pair<std::int64_t, double>> curve,
    const std::string& path);

}  // namespace semspace
