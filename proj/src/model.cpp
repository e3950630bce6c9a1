#include "dpga/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "dpga/errors.hpp"

namespace dpga {

namespace {

struct LayerShape {
  std::size_t in;
  std::size_t out;
  std::size_t weight_offset;  // W[i * out + o]
  std::size_t bias_offset;
};

std::vector<LayerShape> layer_shapes(const ModelSpec& spec) {
  std::vector<std::size_t> widths{spec.input_dim};
  if (spec.kind == ModelKind::mlp) {
    widths.insert(widths.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  }
  widths.push_back(spec.num_classes);

  std::vector<LayerShape> shapes;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    LayerShape s{widths[l], widths[l + 1], offset, offset + widths[l] * widths[l + 1]};
    offset = s.bias_offset + s.out;
    shapes.push_back(s);
  }
  return shapes;
}

double activate(Activation a, double x) {
  return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

// Derivative expressed through the activation output y = act(x).
double activate_grad(Activation a, double y) {
  return a == Activation::relu ? (y > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

void check_shapes(const ParamVector& params, const Batch& batch,
                  const ModelSpec& spec) {
  if (params.size() != spec.dimension()) {
    throw ContractViolation("parameter vector has length " +
                            std::to_string(params.size()) + ", model needs " +
                            std::to_string(spec.dimension()));
  }
  if (batch.dim != spec.input_dim) {
    throw ContractViolation("batch feature width " + std::to_string(batch.dim) +
                            " does not match model input " +
                            std::to_string(spec.input_dim));
  }
  if (batch.features.size() != batch.size() * batch.dim) {
    throw ContractViolation("batch feature matrix is ragged");
  }
  for (auto y : batch.labels) {
    if (y >= spec.num_classes) {
      throw ContractViolation("label " + std::to_string(y) + " out of range");
    }
  }
}

/// Activations of every layer for one sample; acts[0] is the input.
class Forward {
 public:
  Forward(const ModelSpec& spec, std::span<const double> params)
      : spec_(spec), params_(params), shapes_(layer_shapes(spec)) {
    acts_.resize(shapes_.size() + 1);
    acts_[0].resize(spec.input_dim);
    for (std::size_t l = 0; l < shapes_.size(); ++l) acts_[l + 1].resize(shapes_[l].out);
  }

  const std::vector<LayerShape>& shapes() const { return shapes_; }
  std::vector<double>& act(std::size_t l) { return acts_[l]; }
  std::span<const double> logits() const { return acts_.back(); }

  void run(std::span<const double> x) {
    std::copy(x.begin(), x.end(), acts_[0].begin());
    for (std::size_t l = 0; l < shapes_.size(); ++l) {
      const auto& s = shapes_[l];
      const auto& in = acts_[l];
      auto& out = acts_[l + 1];
      for (std::size_t o = 0; o < s.out; ++o) out[o] = params_[s.bias_offset + o];
      for (std::size_t i = 0; i < s.in; ++i) {
        const double xi = in[i];
        const double* w = params_.data() + s.weight_offset + i * s.out;
        for (std::size_t o = 0; o < s.out; ++o) out[o] += xi * w[o];
      }
      if (l + 1 < shapes_.size()) {
        for (auto& v : out) v = activate(spec_.activation, v);
      }
    }
  }

  /// Cross-entropy of the current logits against label; fills softmax probabilities.
  double cross_entropy(std::uint32_t label, std::vector<double>& probs) const {
    const auto z = logits();
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    probs.resize(z.size());
    for (std::size_t c = 0; c < z.size(); ++c) {
      probs[c] = std::exp(z[c] - mx);
      sum += probs[c];
    }
    for (auto& p : probs) p /= sum;
    return mx + std::log(sum) - z[label];
  }

 private:
  const ModelSpec& spec_;
  std::span<const double> params_;
  std::vector<LayerShape> shapes_;
  std::vector<std::vector<double>> acts_;
};

}  // namespace

bool ParamVector::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool bitwise_equal(const ParamVector& a, const ParamVector& b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) {
      return false;
    }
  }
  return true;
}

ModelSpec ModelSpec::logistic(std::size_t input_dim, std::size_t num_classes) {
  ModelSpec s;
  s.kind = ModelKind::logistic_regression;
  s.input_dim = input_dim;
  s.num_classes = num_classes;
  return s;
}

ModelSpec ModelSpec::mlp(std::size_t input_dim, std::vector<std::size_t> hidden,
                         std::size_t num_classes, Activation activation) {
  ModelSpec s;
  s.kind = ModelKind::mlp;
  s.input_dim = input_dim;
  s.hidden_dims = std::move(hidden);
  s.num_classes = num_classes;
  s.activation = activation;
  return s;
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ConfigError("model input dimension must be positive");
  if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
  if (kind == ModelKind::mlp) {
    if (hidden_dims.empty()) throw ConfigError("mlp needs at least one hidden layer");
    for (auto h : hidden_dims) {
      if (h == 0) throw ConfigError("hidden layer width must be positive");
    }
  } else if (!hidden_dims.empty()) {
    throw ConfigError("logistic regression takes no hidden layers");
  }
}

std::size_t ModelSpec::dimension() const {
  std::size_t d = 0;
  for (const auto& s : layer_shapes(*this)) d += s.in * s.out + s.out;
  return d;
}

void Batch::push_back(std::span<const double> x, std::uint32_t label) {
  if (x.size() != dim) throw ContractViolation("sample width does not match batch");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

Batch Batch::gather(std::span<const std::size_t> rows) const {
  Batch out;
  out.dim = dim;
  out.features.reserve(rows.size() * dim);
  out.labels.reserve(rows.size());
  for (auto r : rows) {
    if (r >= size()) throw ContractViolation("row index out of range");
    out.push_back(row(r), labels[r]);
  }
  return out;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector params(spec.dimension());
  std::mt19937_64 rng(seed);
  for (const auto& s : layer_shapes(spec)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t k = 0; k < s.in * s.out; ++k) params[s.weight_offset + k] = dist(rng);
  }
  return params;
}

LossAndGradient loss_and_gradient(const ParamVector& params, const Batch& batch,
                                  const ModelSpec& spec) {
  check_shapes(params, batch, spec);
  if (batch.empty()) throw ContractViolation("empty batch");

  Forward fwd(spec, params.span());
  const auto& shapes = fwd.shapes();
  LossAndGradient out{0.0, ParamVector(params.size())};
  std::vector<double> delta, prev_delta, probs;

  for (std::size_t n = 0; n < batch.size(); ++n) {
    fwd.run(batch.row(n));
    out.loss += fwd.cross_entropy(batch.labels[n], probs);

    delta = probs;
    delta[batch.labels[n]] -= 1.0;
    for (std::size_t l = shapes.size(); l-- > 0;) {
      const auto& s = shapes[l];
      const auto& in = fwd.act(l);
      for (std::size_t i = 0; i < s.in; ++i) {
        double* g = out.grad.span().data() + s.weight_offset + i * s.out;
        for (std::size_t o = 0; o < s.out; ++o) g[o] += in[i] * delta[o];
      }
      for (std::size_t o = 0; o < s.out; ++o) out.grad[s.bias_offset + o] += delta[o];
      if (l == 0) break;

      prev_delta.assign(s.in, 0.0);
      for (std::size_t i = 0; i < s.in; ++i) {
        const double* w = params.span().data() + s.weight_offset + i * s.out;
        double acc = 0.0;
        for (std::size_t o = 0; o < s.out; ++o) acc += w[o] * delta[o];
        prev_delta[i] = acc * activate_grad(spec.activation, in[i]);
      }
      delta.swap(prev_delta);
    }
  }

  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  for (auto& g : out.grad) g *= scale;
  return out;
}

double batch_loss(const ParamVector& params, const Batch& batch,
                  const ModelSpec& spec) {
  check_shapes(params, batch, spec);
  if (batch.empty()) throw ContractViolation("empty batch");
  Forward fwd(spec, params.span());
  std::vector<double> probs;
  double loss = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    fwd.run(batch.row(n));
    loss += fwd.cross_entropy(batch.labels[n], probs);
  }
  return loss / static_cast<double>(batch.size());
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                     double eta) {
  if (params.size() != grad.size()) {
    throw ContractViolation("sgd_step: parameter and gradient lengths differ");
  }
  if (!(eta > 0.0)) throw ContractViolation("sgd_step: eta must be positive");
  ParamVector out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = params[i] - eta * grad[i];
  return out;
}

double finite_diff_check(const ParamVector& params, const Batch& batch,
                         const ModelSpec& spec, double h) {
  return finite_diff_check(params, batch, spec, h, loss_and_gradient);
}

double finite_diff_check(const ParamVector& params, const Batch& batch,
                         const ModelSpec& spec, double h,
                         const GradientFn& gradient) {
  if (!(h > 0.0)) throw ContractViolation("finite_diff_check: h must be positive");
  const auto analytic = gradient(params, batch, spec);
  ParamVector probe = params;
  double worst = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    probe[j] = params[j] + h;
    const double up = batch_loss(probe, batch, spec);
    probe[j] = params[j] - h;
    const double down = batch_loss(probe, batch, spec);
    probe[j] = params[j];
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.grad[j];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

std::uint32_t predict(const ParamVector& params, std::span<const double> x,
                      const ModelSpec& spec) {
  Forward fwd(spec, params.span());
  fwd.run(x);
  const auto z = fwd.logits();
  // max_element returns the first maximum, i.e. the lowest index on ties.
  return static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

Evaluation evaluate(const ParamVector& params, const Batch& dataset,
                    const ModelSpec& spec) {
  check_shapes(params, dataset, spec);
  if (dataset.empty()) throw ContractViolation("evaluate: empty dataset");
  Forward fwd(spec, params.span());
  std::vector<double> probs;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t n = 0; n < dataset.size(); ++n) {
    fwd.run(dataset.row(n));
    loss += fwd.cross_entropy(dataset.labels[n], probs);
    const auto z = fwd.logits();
    const auto best = std::max_element(z.begin(), z.end()) - z.begin();
    if (static_cast<std::uint32_t>(best) == dataset.labels[n]) ++correct;
  }
  const double n = static_cast<double>(dataset.size());
  return {loss / n, static_cast<double>(correct) / n};
}

}  // namespace dpga
