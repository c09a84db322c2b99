#include "fedblock/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "fedblock/errors.hpp"
#include "fedblock/rng.hpp"

namespace fedblock {

namespace {

void require_same_architecture(const ModelParams& a, const ModelParams& b, const char* what) {
  if (!a.same_architecture(b)) throw ShapeError(std::string(what) + ": architecture mismatch");
}

// Pre-activations of every layer and post-activations feeding each layer.
struct Trace {
  std::vector<std::vector<double>> inputs;  // inputs[k] feeds layer k
  std::vector<double> logits;
};

void dense(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  out.assign(layer.out(), 0.0);
  for (std::size_t r = 0; r < layer.out(); ++r) {
    const double* row = &layer.weight.values[r * layer.in()];
    double acc = layer.bias[r];
    for (std::size_t c = 0; c < layer.in(); ++c) acc += row[c] * in[c];
    out[r] = acc;
  }
}

Trace run_forward(const ModelParams& model, std::span<const double> x) {
  if (model.layers().empty()) throw ShapeError("forward: empty model");
  if (x.size() != model.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(model.input_dim()));
  }
  Trace trace;
  const auto& layers = model.layers();
  trace.inputs.reserve(layers.size());
  trace.inputs.emplace_back(x.begin(), x.end());
  std::vector<double> z;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    dense(layers[k], trace.inputs[k], z);
    if (k + 1 < layers.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
      trace.inputs.push_back(z);
    }
  }
  trace.logits = std::move(z);
  return trace;
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return p;
}

template <typename Fn>
void for_each_param(ModelParams& m, Fn&& fn) {
  for (auto& layer : m.mutable_layers()) {
    for (double& v : layer.weight.values) fn(v);
    for (double& v : layer.bias) fn(v);
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ShapeError("deserialize: truncated model bytes");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ModelParams::ModelParams(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("model needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.weight.values.size() != layer.weight.rows * layer.weight.cols ||
        layer.bias.size() != layer.out() || layer.out() == 0 || layer.in() == 0) {
      throw ShapeError("layer " + std::to_string(k) + " has inconsistent dimensions");
    }
    if (k > 0 && layer.in() != layers_[k - 1].out()) {
      throw ShapeError("layer " + std::to_string(k) + " input does not match previous output");
    }
  }
}

std::size_t ModelParams::input_dim() const { return layers_.front().in(); }
std::size_t ModelParams::num_classes() const { return layers_.back().out(); }
std::size_t ModelParams::penultimate_dim() const { return layers_.back().in(); }

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.values.size() + layer.bias.size();
  return n;
}

bool ModelParams::same_architecture(const ModelParams& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].in() != other.layers_[k].in() || layers_[k].out() != other.layers_[k].out()) {
      return false;
    }
  }
  return true;
}

bool ModelParams::all_finite() const {
  for (const auto& layer : layers_) {
    for (double v : layer.weight.values)
      if (!std::isfinite(v)) return false;
    for (double v : layer.bias)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

ModelParams init_mlp(std::span<const std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) throw ShapeError("init_mlp: need at least input and output widths");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    DenseLayer layer{Matrix(widths[k + 1], widths[k]), std::vector<double>(widths[k + 1], 0.0)};
    const double scale = std::sqrt(2.0 / static_cast<double>(widths[k]));
    for (double& v : layer.weight.values) v = scale * rng.normal();
    layers.push_back(std::move(layer));
  }
  return ModelParams(std::move(layers));
}

ModelParams zeros_like(const ModelParams& model) {
  ModelParams z = model;
  for_each_param(z, [](double& v) { v = 0.0; });
  return z;
}

std::vector<double> flatten(const ModelParams& model) {
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (const auto& layer : model.layers()) {
    flat.insert(flat.end(), layer.weight.values.begin(), layer.weight.values.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

ModelParams unflatten_like(const ModelParams& shape, std::span<const double> flat) {
  if (flat.size() != shape.parameter_count()) throw ShapeError("unflatten: wrong parameter count");
  ModelParams m = shape;
  std::size_t i = 0;
  for_each_param(m, [&](double& v) { v = flat[i++]; });
  return m;
}

void add_scaled(ModelParams& target, const ModelParams& x, double scale) {
  require_same_architecture(target, x, "add_scaled");
  auto& tl = target.mutable_layers();
  const auto& xl = x.layers();
  for (std::size_t k = 0; k < tl.size(); ++k) {
    auto& tw = tl[k].weight.values;
    const auto& xw = xl[k].weight.values;
    for (std::size_t i = 0; i < tw.size(); ++i) tw[i] += scale * xw[i];
    for (std::size_t i = 0; i < tl[k].bias.size(); ++i) tl[k].bias[i] += scale * xl[k].bias[i];
  }
}

ModelParams difference(const ModelParams& a, const ModelParams& b) {
  require_same_architecture(a, b, "difference");
  ModelParams d = a;
  auto& dl = d.mutable_layers();
  for (std::size_t k = 0; k < dl.size(); ++k) {
    auto& dw = dl[k].weight.values;
    const auto& bw = b.layers()[k].weight.values;
    for (std::size_t i = 0; i < dw.size(); ++i) dw[i] -= bw[i];
    for (std::size_t i = 0; i < dl[k].bias.size(); ++i) dl[k].bias[i] -= b.layers()[k].bias[i];
  }
  return d;
}

double l2_norm(const ModelParams& model) {
  double s = 0.0;
  for (const auto& layer : model.layers()) {
    for (double v : layer.weight.values) s += v * v;
    for (double v : layer.bias) s += v * v;
  }
  return std::sqrt(s);
}

std::vector<double> forward(const ModelParams& model, std::span<const double> x) {
  return softmax(run_forward(model, x).logits);
}

int predict(const ModelParams& model, std::span<const double> x) {
  const auto logits = run_forward(model, x).logits;
  // max_element returns the first maximum, i.e. the lowest class index.
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double loss(const ModelParams& model, std::span<const Sample> data) {
  if (data.empty()) throw DomainError("loss: empty dataset");
  double total = 0.0;
  for (const auto& s : data) {
    const auto z = run_forward(model, s.x).logits;
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= z.size()) {
      throw DomainError("loss: label out of range");
    }
    total += log_sum_exp(z) - z[static_cast<std::size_t>(s.label)];
  }
  return total / static_cast<double>(data.size());
}

ModelParams loss_gradient(const ModelParams& model, std::span<const Sample> batch) {
  if (batch.empty()) throw DomainError("loss_gradient: empty batch");
  ModelParams grad = zeros_like(model);
  auto& gl = grad.mutable_layers();
  const auto& layers = model.layers();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  std::vector<double> delta, prev_delta;
  for (const auto& s : batch) {
    Trace trace = run_forward(model, s.x);
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= trace.logits.size()) {
      throw DomainError("loss_gradient: label out of range");
    }
    delta = softmax(trace.logits);
    delta[static_cast<std::size_t>(s.label)] -= 1.0;
    for (double& v : delta) v *= inv_n;

    for (std::size_t k = layers.size(); k-- > 0;) {
      const auto& in = trace.inputs[k];
      auto& gw = gl[k].weight;
      for (std::size_t r = 0; r < gw.rows; ++r) {
        double* row = &gw.values[r * gw.cols];
        for (std::size_t c = 0; c < gw.cols; ++c) row[c] += delta[r] * in[c];
        gl[k].bias[r] += delta[r];
      }
      if (k == 0) break;
      // Back through W^T and the ReLU that produced `in`.
      const auto& w = layers[k].weight;
      prev_delta.assign(w.cols, 0.0);
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double* row = &w.values[r * w.cols];
        for (std::size_t c = 0; c < w.cols; ++c) prev_delta[c] += row[c] * delta[r];
      }
      for (std::size_t c = 0; c < w.cols; ++c) {
        if (in[c] <= 0.0) prev_delta[c] = 0.0;
      }
      std::swap(delta, prev_delta);
    }
  }
  return grad;
}

ModelParams sgd_train(ModelParams model, std::span<const Sample> data, const TrainConfig& cfg) {
  if (data.empty()) throw DomainError("sgd_train: empty dataset");
  if (!(cfg.learning_rate >= 0.0) || cfg.batch_size == 0) {
    throw DomainError("sgd_train: invalid train config");
  }
  if (cfg.learning_rate == 0.0) return model;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch_size = std::min(cfg.batch_size, data.size());
  std::vector<Sample> batch;
  batch.reserve(batch_size);

  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0, step = 0; start < order.size(); start += batch_size, ++step) {
      const std::size_t end = std::min(start + batch_size, order.size());
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      const ModelParams grad = loss_gradient(model, batch);
      if (!grad.all_finite()) {
        throw NumericalError("sgd_train: non-finite gradient at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step));
      }
      add_scaled(model, grad, -cfg.learning_rate);
    }
  }
  if (!model.all_finite()) throw NumericalError("sgd_train: parameters diverged");
  return model;
}

UltimateGradient extract_ultimate_gradient(const ModelParams& before, const ModelParams& after,
                                           double learning_rate, ClientId client, int round) {
  require_same_architecture(before, after, "extract_ultimate_gradient");
  if (!(learning_rate > 0.0)) throw DomainError("extract_ultimate_gradient: learning rate must be > 0");
  const auto& ub = before.ultimate();
  const auto& ua = after.ultimate();
  UltimateGradient g{Matrix(ub.out(), ub.in()), std::vector<double>(ub.out()), client, round};
  for (std::size_t i = 0; i < g.dU.values.size(); ++i) {
    g.dU.values[i] = (ua.weight.values[i] - ub.weight.values[i]) / (-learning_rate);
  }
  for (std::size_t i = 0; i < g.db.size(); ++i) g.db[i] = (ua.bias[i] - ub.bias[i]) / (-learning_rate);
  return g;
}

std::vector<double> by_class_gradient(const UltimateGradient& g) {
  if (g.db.size() != g.dU.rows || g.dU.values.size() != g.dU.rows * g.dU.cols) {
    throw ShapeError("by_class_gradient: inconsistent gradient shapes");
  }
  const std::size_t classes = g.dU.rows;
  std::vector<double> mu(2 * classes, 0.0);
  for (std::size_t r = 0; r < classes; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < g.dU.cols; ++c) s += g.dU(r, c);
    mu[r] = s;
    mu[classes + r] = g.db[r];
  }
  return mu;
}

std::vector<std::uint8_t> serialize(const ModelParams& model) {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 8 * model.layers().size() + 8 * model.parameter_count());
  put_u32(out, static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& layer : model.layers()) {
    put_u32(out, static_cast<std::uint32_t>(layer.out()));
    put_u32(out, static_cast<std::uint32_t>(layer.in()));
  }
  for (const auto& layer : model.layers()) {
    for (double v : layer.weight.values) put_f64(out, v);
    for (double v : layer.bias) put_f64(out, v);
  }
  return out;
}

ModelParams deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader reader(bytes);
  const std::uint32_t count = reader.u32();
  if (count == 0 || count > 1024) throw ShapeError("deserialize: implausible layer count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims(count);
  std::uint64_t total = 0;
  for (auto& [out, in] : dims) {
    out = reader.u32();
    in = reader.u32();
    total += static_cast<std::uint64_t>(out) * in + out;
  }
  if (total * 8 != reader.remaining()) throw ShapeError("deserialize: payload size does not match header");
  std::vector<DenseLayer> layers(count);
  for (std::size_t k = 0; k < count; ++k) {
    layers[k].weight = Matrix(dims[k].first, dims[k].second);
    layers[k].bias.assign(dims[k].first, 0.0);
  }
  for (auto& layer : layers) {
    for (double& v : layer.weight.values) v = reader.f64();
    for (double& v : layer.bias) v = reader.f64();
  }
  if (!reader.done()) throw ShapeError("deserialize: trailing bytes");
  return ModelParams(std::move(layers));
}

}  // namespace fedblock
