#include "visual.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "error.hpp"

namespace semspace {

namespace {

constexpr std::uint32_t kVisualVersion = 1;

template <typename T>
struct Layer {
  std::int32_t in;
  std::int32_t out;
  Activation activation;
  std::vector<T> weight;
  std::vector<T> bias;
};

template <typename T>
std::vector<Layer<T>> convert(const std::vector<DenseLayer>& layers) {
  std::vector<Layer<T>> out;
  for (const auto& l : layers) {
    out.push_back({l.in, l.out, l.activation,
                   std::vector<T>(l.weight.begin(), l.weight.end()),
                   std::vector<T>(l.bias.begin(), l.bias.end())});
  }
  return out;
}

// activations[0] is the input batch; activations[l + 1] the output of layer l.
template <typename T>
void forward_batch(const std::vector<Layer<T>>& layers, std::span<const T> input,
                   std::size_t batch, std::vector<std::vector<T>>& activations) {
  activations.resize(layers.size() + 1);
  activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    const auto& x = activations[l];
    auto& y = activations[l + 1];
    y.assign(batch * layer.out, T(0));
    for (std::size_t n = 0; n < batch; ++n) {
      const T* xn = x.data() + n * layer.in;
      T* yn = y.data() + n * layer.out;
      for (std::int32_t o = 0; o < layer.out; ++o) {
        const T* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
        T sum = layer.bias[o];
        for (std::int32_t i = 0; i < layer.in; ++i) sum += w[i] * xn[i];
        if (layer.activation == Activation::kRelu && sum < T(0)) sum = T(0);
        yn[o] = sum;
      }
    }
  }
}

// Accumulates parameter gradients into `grads` (same shapes as layers) given
// the loss gradient wrt the network output.
template <typename T>
void backward_batch(const std::vector<Layer<T>>& layers,
                    const std::vector<std::vector<T>>& activations,
                    std::vector<T> grad_out, std::size_t batch,
                    std::vector<Layer<T>>& grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    auto& g = grads[l];
    const auto& x = activations[l];
    const auto& y = activations[l + 1];
    if (layer.activation == Activation::kRelu) {
      for (std::size_t i = 0; i < grad_out.size(); ++i) {
        if (y[i] <= T(0)) grad_out[i] = T(0);
      }
    }
    std::vector<T> grad_in(l > 0 ? batch * layer.in : 0, T(0));
    for (std::size_t n = 0; n < batch; ++n) {
      const T* xn = x.data() + n * layer.in;
      const T* gn = grad_out.data() + n * layer.out;
      T* gin = l > 0 ? grad_in.data() + n * layer.in : nullptr;
      for (std::int32_t o = 0; o < layer.out; ++o) {
        const T go = gn[o];
        if (go == T(0)) continue;
        g.bias[o] += go;
        T* gw = g.weight.data() + static_cast<std::size_t>(o) * layer.in;
        const T* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
        for (std::int32_t i = 0; i < layer.in; ++i) gw[i] += go * xn[i];
        if (gin) {
          for (std::int32_t i = 0; i < layer.in; ++i) gin[i] += go * w[i];
        }
      }
    }
    grad_out = std::move(grad_in);
  }
}

template <typename T>
std::vector<Layer<T>> zeros_like(const std::vector<Layer<T>>& layers) {
  auto out = layers;
  for (auto& l : out) {
    std::fill(l.weight.begin(), l.weight.end(), T(0));
    std::fill(l.bias.begin(), l.bias.end(), T(0));
  }
  return out;
}

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::kNumeric, std::string(what) + " contains NaN or Inf");
    }
  }
}

}  // namespace

VisualEmbedder::VisualEmbedder(std::vector<DenseLayer> layers)
    : layers_(std::move(layers)) {
  if (layers_.empty()) fail(ErrorCode::kShape, "regressor has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.in <= 0 || layer.out <= 0 ||
        layer.weight.size() != static_cast<std::size_t>(layer.in) * layer.out ||
        layer.bias.size() != static_cast<std::size_t>(layer.out)) {
      fail(ErrorCode::kShape, "layer " + std::to_string(l) + " is malformed");
    }
    if (l > 0 && layer.in != layers_[l - 1].out) {
      fail(ErrorCode::kShape, "layer " + std::to_string(l) +
                                  " input does not match previous output");
    }
  }
}

VisualEmbedder VisualEmbedder::initialize(std::int32_t input_dim,
                                          std::span<const std::int32_t> hidden,
                                          std::int32_t output_dim,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  std::int32_t in = input_dim;
  auto add = [&](std::int32_t out, Activation act) {
    if (in <= 0 || out <= 0) fail(ErrorCode::kShape, "layer sizes must be positive");
    DenseLayer layer{in, out, act, {}, std::vector<float>(out, 0.0f)};
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in));
    layer.weight.resize(static_cast<std::size_t>(in) * out);
    for (auto& w : layer.weight) w = static_cast<float>(dist(rng));
    layers.push_back(std::move(layer));
    in = out;
  };
  for (auto h : hidden) add(h, Activation::kRelu);
  add(output_dim, Activation::kIdentity);
  return VisualEmbedder(std::move(layers));
}

std::size_t VisualEmbedder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

bool VisualEmbedder::parameters_finite() const {
  for (const auto& l : layers_) {
    for (float w : l.weight) if (!std::isfinite(w)) return false;
    for (float b : l.bias) if (!std::isfinite(b)) return false;
  }
  return true;
}

Vector VisualEmbedder::forward(std::span<const double> feature) const {
  if (feature.size() != static_cast<std::size_t>(input_dim())) {
    fail(ErrorCode::kShape, "feature length " + std::to_string(feature.size()) +
                                " does not match regressor input " +
                                std::to_string(input_dim()));
  }
  Vector x(feature.begin(), feature.end());
  for (const auto& layer : layers_) {
    Vector y(layer.out);
    for (std::int32_t o = 0; o < layer.out; ++o) {
      const float* w = layer.weight.data() + static_cast<std::size_t>(o) * layer.in;
      double sum = layer.bias[o];
      for (std::int32_t i = 0; i < layer.in; ++i) sum += w[i] * x[i];
      if (layer.activation == Activation::kRelu && sum < 0.0) sum = 0.0;
      y[o] = sum;
    }
    x = std::move(y);
  }
  return x;
}

LossResult sigmoid_xent_loss(std::span<const double> targets,
                             std::span<const double> predictions,
                             std::size_t batch, std::size_t dim) {
  if (batch == 0 || dim == 0) fail(ErrorCode::kShape, "empty loss batch");
  if (targets.size() != batch * dim || predictions.size() != batch * dim) {
    fail(ErrorCode::kShape, "loss inputs must both be batch x dim");
  }
  check_finite(targets, "loss targets");
  check_finite(predictions, "loss predictions");
  LossResult result;
  result.gradient.resize(batch * dim);
  const double scale = 1.0 / static_cast<double>(batch * dim);
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = sigmoid(targets[i]);
    const double z = predictions[i];
    // -[p ln s(z) + (1-p) ln(1-s(z))] without overflow.
    total += std::max(z, 0.0) - z * p + std::log1p(std::exp(-std::abs(z)));
    result.gradient[i] = (sigmoid(z) - p) * scale;
  }
  result.loss = total * scale;
  return result;
}

double entropy_floor(std::span<const double> targets) {
  if (targets.empty()) return 0.0;
  double total = 0.0;
  for (double t : targets) {
    const double p = sigmoid(t);
    if (p > 0.0) total -= p * std::log(p);
    if (p < 1.0) total -= (1.0 - p) * std::log1p(-p);
  }
  return total / static_cast<double>(targets.size());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !(decay_factor > 0) || !(momentum >= 0) ||
      momentum >= 1) {
    fail(ErrorCode::kConfig, "rates must be positive and momentum in [0, 1)");
  }
  if (decay_interval < 1) fail(ErrorCode::kConfig, "decay_interval must be >= 1");
  if (batch_size < 1) fail(ErrorCode::kConfig, "batch_size must be >= 1");
  if (max_iterations < 0) fail(ErrorCode::kConfig, "max_iterations must be >= 0");
  if (log_interval < 1) fail(ErrorCode::kConfig, "log_interval must be >= 1");
  for (auto h : hidden) {
    if (h < 1) fail(ErrorCode::kConfig, "hidden sizes must be positive");
  }
}

double TrainConfig::rate_at(std::int64_t iteration) const {
  return learning_rate *
         std::pow(decay_factor, static_cast<double>(iteration / decay_interval));
}

double regression_loss(const VisualEmbedder& model, const RegressionSet& data) {
  if (data.count == 0) return 0.0;
  const auto layers = convert<double>(model.layers());
  std::vector<std::vector<double>> acts;
  forward_batch<double>(layers, data.features, data.count, acts);
  return sigmoid_xent_loss(data.targets, acts.back(), data.count,
                           data.output_dim)
      .loss;
}

VisualTrainingResult train_regressor(const RegressionSet& data,
                                     const TrainConfig& config) {
  config.validate();
  if (data.count == 0) fail(ErrorCode::kValidation, "no training examples");
  check_finite(data.features, "features");
  check_finite(data.targets, "targets");

  VisualTrainingResult result{
      VisualEmbedder::initialize(data.input_dim, config.hidden, data.output_dim,
                                 config.seed),
      {}, 0.0, 0.0};
  result.initial_loss = regression_loss(result.model, data);

  auto layers = convert<float>(result.model.layers());
  auto velocity = zeros_like(layers);
  std::mt19937_64 rng(config.seed + 1);
  std::vector<std::size_t> order(data.count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t f = static_cast<std::size_t>(data.input_dim);
  const std::size_t d = static_cast<std::size_t>(data.output_dim);
  std::vector<float> inputs(batch * f);
  std::vector<double> targets(batch * d), predictions(batch * d);
  std::vector<std::vector<float>> acts;

  for (std::int64_t iter = 0; iter < config.max_iterations; ++iter) {
    for (std::size_t n = 0; n < batch; ++n) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      for (std::size_t i = 0; i < f; ++i) {
        inputs[n * f + i] = static_cast<float>(data.features[idx * f + i]);
      }
      std::copy_n(data.targets.begin() + idx * d, d, targets.begin() + n * d);
    }
    forward_batch<float>(layers, inputs, batch, acts);
    std::copy(acts.back().begin(), acts.back().end(), predictions.begin());
    auto loss = sigmoid_xent_loss(targets, predictions, batch, d);
    if (iter % config.log_interval == 0 || iter + 1 == config.max_iterations) {
      result.loss_curve.emplace_back(iter, loss.loss);
    }

    auto grads = zeros_like(layers);
    backward_batch<float>(
        layers, acts,
        std::vector<float>(loss.gradient.begin(), loss.gradient.end()), batch,
        grads);
    const auto rate = static_cast<float>(config.rate_at(iter));
    const auto mu = static_cast<float>(config.momentum);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto step = [&](std::vector<float>& w, std::vector<float>& v,
                      const std::vector<float>& g) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          v[i] = mu * v[i] + rate * g[i];
          w[i] -= v[i];
        }
      };
      step(layers[l].weight, velocity[l].weight, grads[l].weight);
      step(layers[l].bias, velocity[l].bias, grads[l].bias);
    }
  }

  auto& out = result.model.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out[l].weight = std::move(layers[l].weight);
    out[l].bias = std::move(layers[l].bias);
  }
  if (!result.model.parameters_finite()) {
    fail(ErrorCode::kNumeric, "training produced non-finite parameters");
  }
  result.final_loss = regression_loss(result.model, data);
  return result;
}

RegressionSet build_regression_set(const Corpus& corpus,
                                   const TextEmbedder& text,
                                   Aggregation aggregation) {
  RegressionSet data;
  data.input_dim = static_cast<std::int32_t>(corpus.feature_dim());
  data.output_dim = text.dim();
  std::string missing;
  std::size_t missing_count = 0;
  for (const auto& doc : corpus.documents()) {
    if (doc.split != Split::kTrain) continue;
    if (!doc.features) {
      if (missing_count++ < 20) missing += (missing.empty() ? "" : ", ") + doc.id;
      continue;
    }
  }
  if (missing_count > 0) {
    if (missing_count > 20) missing += ", ...";
    fail(ErrorCode::kValidation, std::to_string(missing_count) +
                                     " train documents lack features: " +
                                     missing);
  }
  for (const auto& doc : corpus.documents()) {
    if (doc.split != Split::kTrain) continue;
    const auto tokens = document_tokens(doc);
    DocumentEmbedding target;
    try {
      target = text.embed(tokens, aggregation);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUnembeddable) continue;
      throw;
    }
    data.features.insert(data.features.end(), doc.features->begin(),
                         doc.features->end());
    data.targets.insert(data.targets.end(), target.vector.begin(),
                        target.vector.end());
    ++data.count;
  }
  if (data.count == 0) {
    fail(ErrorCode::kValidation, "no embeddable train documents with features");
  }
  return data;
}

VisualTrainingResult train_visual(const Corpus& corpus, const TextEmbedder& text,
                                  Aggregation aggregation,
                                  const TrainConfig& config) {
  return train_regressor(build_regression_set(corpus, text, aggregation),
                         config);
}

double gradient_check(const VisualEmbedder& model,
                      std::span<const double> features,
                      std::span<const double> targets, std::size_t batch,
                      double epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1e-2) {
    fail(ErrorCode::kConfig, "epsilon must be in (0, 1e-2]");
  }
  const std::size_t d = static_cast<std::size_t>(model.output_dim());
  if (features.size() != batch * model.input_dim() ||
      targets.size() != batch * d) {
    fail(ErrorCode::kShape, "gradient check batch has the wrong shape");
  }
  auto layers = convert<double>(model.layers());
  auto loss_of = [&](const std::vector<Layer<double>>& net) {
    std::vector<std::vector<double>> acts;
    forward_batch<double>(net, features, batch, acts);
    return sigmoid_xent_loss(targets, acts.back(), batch, d);
  };

  std::vector<std::vector<double>> acts;
  forward_batch<double>(layers, features, batch, acts);
  auto loss = sigmoid_xent_loss(targets, acts.back(), batch, d);
  auto grads = zeros_like(layers);
  backward_batch<double>(layers, acts, loss.gradient, batch, grads);

  double worst = 0.0;
  auto probe = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + epsilon;
    const double plus = loss_of(layers).loss;
    param = saved - epsilon;
    const double minus = loss_of(layers).loss;
    param = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double scale =
        std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = 0; i < layers[l].weight.size(); ++i) {
      probe(layers[l].weight[i], grads[l].weight[i]);
    }
    for (std::size_t i = 0; i < layers[l].bias.size(); ++i) {
      probe(layers[l].bias[i], grads[l].bias[i]);
    }
  }
  return worst;
}

void save_visual(const VisualEmbedder& model, const std::string& path) {
  BinaryWriter out(path);
  out.magic("SSVE");
  out.scalar<std::uint32_t>(kVisualVersion);
  out.scalar<std::uint32_t>(static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    out.scalar<std::uint32_t>(static_cast<std::uint32_t>(l.in));
    out.scalar<std::uint32_t>(static_cast<std::uint32_t>(l.out));
    out.scalar<std::uint32_t>(static_cast<std::uint32_t>(l.activation));
  }
  for (const auto& l : model.layers()) {
    out.array<float>(l.weight);
    out.array<float>(l.bias);
  }
  out.finish();
}

VisualEmbedder load_visual(const std::string& path) {
  BinaryReader in(path);
  in.expect_magic("SSVE", "visual embedder");
  const auto version = in.scalar<std::uint32_t>();
  if (version != kVisualVersion) {
    fail(ErrorCode::kFormat, "'" + path + "' has unsupported version " +
                                 std::to_string(version));
  }
  const auto count = in.scalar<std::uint32_t>();
  if (count == 0 || count > 1024) {
    fail(ErrorCode::kFormat, "'" + path + "' has an invalid layer count");
  }
  std::vector<DenseLayer> layers(count);
  for (auto& l : layers) {
    l.in = static_cast<std::int32_t>(in.scalar<std::uint32_t>());
    l.out = static_cast<std::int32_t>(in.scalar<std::uint32_t>());
    const auto act = in.scalar<std::uint32_t>();
    if (act > 1 || l.in <= 0 || l.out <= 0) {
      fail(ErrorCode::kFormat, "'" + path + "' has an invalid layer header");
    }
    l.activation = static_cast<Activation>(act);
  }
  for (auto& l : layers) {
    l.weight = in.array<float>(static_cast<std::uint64_t>(l.in) * l.out);
    l.bias = in.array<float>(static_cast<std::uint64_t>(l.out));
  }
  in.expect_end();
  return VisualEmbedder(std::move(layers));
}

void write_loss_curve_csv(
    std::span<const std::pair<std::int64_t, double>> curve,
    const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path + "'");
  out << "iteration,loss\n";
  char buf[32];
  for (const auto& [iter, loss] : curve) {
    // Shortest text that reads back to the same double.
    auto end = std::to_chars(buf, buf + sizeof(buf), loss).ptr;
    out << iter << ',' << std::string_view(buf, end - buf) << '\n';
  }
  if (!out) fail(ErrorCode::kIo, "error writing '" + path + "'");
}

}  // namespace semspace
