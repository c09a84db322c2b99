#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedblock/types.hpp"

namespace fedblock {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct DenseLayer {
  Matrix weight;             // [out x in]
  std::vector<double> bias;  // [out]

  std::size_t in() const { return weight.cols; }
  std::size_t out() const { return weight.rows; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Parameters of a feed-forward classifier: ReLU between layers, softmax on
/// the output. The last layer is the ultimate layer (one row per class).
///
/// The same type doubles as a gradient container, since gradients share the
/// parameter layout.
class ModelParams {
 public:
  ModelParams() = default;
  /// Throws ShapeError if the layer dimensions do not chain.
  explicit ModelParams(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  std::size_t input_dim() const;
  std::size_t num_classes() const;
  /// Width of the layer feeding the ultimate layer (input dim for a single-layer model).
  std::size_t penultimate_dim() const;
  std::size_t parameter_count() const;

  const DenseLayer& ultimate() const { return layers_.back(); }

  bool same_architecture(const ModelParams& other) const;
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

/// He-initialised MLP; `widths` = {input, hidden..., classes}.
ModelParams init_mlp(std::span<const std::size_t> widths, std::uint64_t seed);

/// Model of the same architecture with every parameter zero.
ModelParams zeros_like(const ModelParams& model);

// Flat-vector arithmetic over all parameters, in canonical layer order.
std::vector<double> flatten(const ModelParams& model);
ModelParams unflatten_like(const ModelParams& shape, std::span<const double> flat);
/// target += scale * x
void add_scaled(ModelParams& target, const ModelParams& x, double scale);
/// a - b
ModelParams difference(const ModelParams& a, const ModelParams& b);
double l2_norm(const ModelParams& model);

/// Class probabilities for one input.
std::vector<double> forward(const ModelParams& model, std::span<const double> x);

/// Predicted class; ties go to the lowest index.
int predict(const ModelParams& model, std::span<const double> x);

/// Mean cross-entropy. Throws DomainError on an empty dataset.
double loss(const ModelParams& model, std::span<const Sample> data);

/// Gradient of the mean cross-entropy over `batch`, by backpropagation.
ModelParams loss_gradient(const ModelParams& model, std::span<const Sample> batch);

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

/// Mini-batch SGD. Each epoch visits a seeded shuffle of the data in
/// consecutive batches (the last one may be short); batch_size larger than
/// the dataset is clamped to a full batch.
ModelParams sgd_train(ModelParams model, std::span<const Sample> data, const TrainConfig& cfg);

struct UltimateGradient {
  Matrix dU;               // [classes x penultimate]
  std::vector<double> db;  // [classes]
  ClientId client{};
  int round = 0;

  friend bool operator==(const UltimateGradient&, const UltimateGradient&) = default;
};

/// (after - before) / (-eta) on the ultimate weight and bias.
UltimateGradient extract_ultimate_gradient(const ModelParams& before, const ModelParams& after,
                                           double learning_rate, ClientId client = {},
                                           int round = 0);

/// Row sums of dU followed by db; length 2 * classes.
std::vector<double> by_class_gradient(const UltimateGradient& g);

/// Canonical byte encoding used for content hashing: a u32 layer count and
/// (out, in) per layer, then each layer's weights (row-major) and bias as
/// f64. Everything little-endian.
std::vector<std::uint8_t> serialize(const ModelParams& model);
ModelParams deserialize(std::span<const std::uint8_t> bytes);

}  // namespace fedblock
