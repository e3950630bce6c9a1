#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace dpga {

/// Flat parameter / gradient vector of fixed dimension d.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dimension, double fill = 0.0)
      : values_(dimension, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool all_finite() const noexcept;

 private:
  std::vector<double> values_;
};

/// Bit-pattern equality; distinguishes -0.0 from 0.0.
bool bitwise_equal(const ParamVector& a, const ParamVector& b) noexcept;

enum class ModelKind { logistic_regression, mlp };
enum class Activation { relu, tanh };

struct ModelSpec {
  ModelKind kind = ModelKind::logistic_regression;
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims;
  std::size_t num_classes = 2;
  Activation activation = Activation::tanh;

  static ModelSpec logistic(std::size_t input_dim, std::size_t num_classes);
  static ModelSpec mlp(std::size_t input_dim, std::vector<std::size_t> hidden,
                       std::size_t num_classes,
                       Activation activation = Activation::tanh);

  /// Throws ConfigError when the shape is unusable.
  void validate() const;

  /// Sum over layers of in*out + out.
  std::size_t dimension() const;
};

/// Row-major samples with class labels.
struct Batch {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
  void push_back(std::span<const double> x, std::uint32_t label);
  Batch gather(std::span<const std::size_t> rows) const;
};

struct LossAndGradient {
  double loss = 0.0;
  ParamVector grad;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

using GradientFn = std::function<LossAndGradient(
    const ParamVector&, const Batch&, const ModelSpec&)>;

/// Glorot-uniform weights, zero biases. Deterministic in seed.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

/// Mean softmax cross-entropy over the batch and its exact gradient.
LossAndGradient loss_and_gradient(const ParamVector& params, const Batch& batch,
                                  const ModelSpec& spec);

/// Forward pass only.
double batch_loss(const ParamVector& params, const Batch& batch,
                  const ModelSpec& spec);

/// params - eta * grad.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad,
                     double eta);

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double finite_diff_check(const ParamVector& params, const Batch& batch,
                         const ModelSpec& spec, double h);
double finite_diff_check(const ParamVector& params, const Batch& batch,
                         const ModelSpec& spec, double h,
                         const GradientFn& gradient);

/// Argmax of the logits; ties go to the lowest class index.
std::uint32_t predict(const ParamVector& params, std::span<const double> x,
                      const ModelSpec& spec);

Evaluation evaluate(const ParamVector& params, const Batch& dataset,
                    const ModelSpec& spec);

}  // namespace dpga
