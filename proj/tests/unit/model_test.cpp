#include <cmath>
#include <random>

#include "doctest.h"
#include "dpga/errors.hpp"
#include "dpga/model.hpp"

using namespace dpga;

namespace {

Batch one_sample(std::vector<double> x, std::uint32_t label) {
  Batch b;
  b.dim = x.size();
  b.push_back(x, label);
  return b;
}

Batch random_batch(std::mt19937_64& rng, std::size_t dim, std::size_t classes,
                   std::size_t rows) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> label(0, static_cast<std::uint32_t>(classes - 1));
  Batch b;
  b.dim = dim;
  std::vector<double> x(dim);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : x) v = gauss(rng);
    b.push_back(x, label(rng));
  }
  return b;
}

ParamVector random_params(std::mt19937_64& rng, std::size_t d, double scale) {
  std::normal_distribution<double> gauss(0.0, scale);
  ParamVector w(d);
  for (auto& v : w) v = gauss(rng);
  return w;
}

// Independent logistic-regression evaluator: explicit logits per sample,
// softmax via long double, argmax with lowest-index ties.
Evaluation naive_logistic_eval(const ParamVector& w, const Batch& data, std::size_t classes) {
  const std::size_t dim = data.dim;
  long double loss = 0.0L;
  std::size_t correct = 0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    std::vector<long double> z(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      z[c] = w[dim * classes + c];
      for (std::size_t i = 0; i < dim; ++i) z[c] += data.row(n)[i] * w[i * classes + c];
    }
    long double norm = 0.0L;
    for (auto v : z) norm += std::exp(v);
    loss += std::log(norm) - z[data.labels[n]];
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (z[c] > z[best]) best = c;
    }
    correct += best == data.labels[n];
  }
  return {static_cast<double>(loss / data.size()),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("dimension follows the layer shapes") {
  CHECK(ModelSpec::logistic(3, 2).dimension() == 8);
  CHECK(ModelSpec::mlp(3, {4}, 2).dimension() == (3 * 4 + 4) + (4 * 2 + 2));
  CHECK(ModelSpec::mlp(5, {4, 3}, 2).dimension() == (5 * 4 + 4) + (4 * 3 + 3) + (3 * 2 + 2));
  CHECK(init_params(ModelSpec::logistic(3, 2), 1).size() == 8);
  CHECK(init_params(ModelSpec::mlp(3, {4}, 2), 1).size() == 26);
}

TEST_CASE("invalid shapes are configuration errors") {
  CHECK_THROWS_AS(ModelSpec::logistic(3, 1).validate(), ConfigError);
  CHECK_THROWS_AS(ModelSpec::logistic(0, 2).validate(), ConfigError);
  CHECK_THROWS_AS(ModelSpec::mlp(3, {}, 2).validate(), ConfigError);
  CHECK_THROWS_AS(ModelSpec::mlp(3, {4, 0}, 2).validate(), ConfigError);
  CHECK_THROWS_AS(init_params(ModelSpec::logistic(3, 1), 1), ConfigError);
}

TEST_CASE("initialization is deterministic, bounded and has zero biases") {
  const auto spec = ModelSpec::mlp(6, {5}, 3);
  const auto a = init_params(spec, 42);
  const auto b = init_params(spec, 42);
  const auto c = init_params(spec, 43);
  CHECK(bitwise_equal(a, b));
  CHECK_FALSE(bitwise_equal(a, c));

  const double bound1 = std::sqrt(6.0 / (6 + 5));
  const double bound2 = std::sqrt(6.0 / (5 + 3));
  for (std::size_t j = 0; j < 30; ++j) CHECK(std::abs(a[j]) <= bound1);
  for (std::size_t j = 30; j < 35; ++j) CHECK(a[j] == 0.0);
  for (std::size_t j = 35; j < 50; ++j) CHECK(std::abs(a[j]) <= bound2);
  for (std::size_t j = 50; j < 53; ++j) CHECK(a[j] == 0.0);
}

TEST_CASE("zero parameters give ln 2 on two classes") {
  const auto spec = ModelSpec::logistic(2, 2);
  const auto lg = loss_and_gradient(ParamVector(6), one_sample({0.3, -1.7}, 1), spec);
  CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("gradient at uniform softmax is (softmax - onehot) times x") {
  const auto spec = ModelSpec::logistic(2, 2);
  const auto g = loss_and_gradient(ParamVector(6), one_sample({1.0, 0.0}, 0), spec).grad;
  // W[i * classes + c], then the biases.
  CHECK(g[0] == -0.5);
  CHECK(g[1] == 0.5);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 0.0);
  CHECK(g[4] == -0.5);
  CHECK(g[5] == 0.5);
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 7), classes(2, 6), rows(1, 10), width(1, 6);

  SUBCASE("logistic regression") {
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
      const auto spec = ModelSpec::logistic(dim(rng), classes(rng));
      const auto w = random_params(rng, spec.dimension(), 0.7);
      worst = std::max(worst, finite_diff_check(w, random_batch(rng, spec.input_dim,
                                                                spec.num_classes, rows(rng)),
                                                spec, 1e-5));
    }
    CHECK(worst < 1e-5);
  }
  SUBCASE("mlp with tanh") {
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
      const auto spec = ModelSpec::mlp(dim(rng), {width(rng), width(rng)}, classes(rng),
                                       Activation::tanh);
      const auto w = random_params(rng, spec.dimension(), 0.7);
      worst = std::max(worst, finite_diff_check(w, random_batch(rng, spec.input_dim,
                                                                spec.num_classes, rows(rng)),
                                                spec, 1e-5));
    }
    CHECK(worst < 1e-4);
  }
  SUBCASE("mlp with relu") {
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
      const auto spec = ModelSpec::mlp(dim(rng), {width(rng)}, classes(rng), Activation::relu);
      const auto w = random_params(rng, spec.dimension(), 0.7);
      worst = std::max(worst, finite_diff_check(w, random_batch(rng, spec.input_dim,
                                                                spec.num_classes, rows(rng)),
                                                spec, 1e-6));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("a saturated fit has vanishing gradient and difference error") {
  const auto spec = ModelSpec::logistic(2, 3);
  ParamVector w(spec.dimension());
  w[6 + 2] = 60.0;  // class 2 bias dominates
  Batch b;
  b.dim = 2;
  for (int i = 0; i < 4; ++i) b.push_back(std::vector<double>{0.5, 0.5}, 2);
  const auto lg = loss_and_gradient(w, b, spec);
  for (double g : lg.grad) CHECK(std::abs(g) < 1e-20);
  CHECK(finite_diff_check(w, b, spec, 1e-5) < 1e-12);
}

TEST_CASE("a corrupted gradient is caught by the difference check") {
  std::mt19937_64 rng(5);
  const auto spec = ModelSpec::logistic(3, 3);
  const auto w = random_params(rng, spec.dimension(), 0.5);
  const auto b = random_batch(rng, 3, 3, 4);
  const GradientFn wrong = [](const ParamVector& p, const Batch& x, const ModelSpec& s) {
    auto lg = loss_and_gradient(p, x, s);
    lg.grad[1] += 1e-3;
    return lg;
  };
  CHECK(finite_diff_check(w, b, spec, 1e-5, wrong) > 1e-4);
}

TEST_CASE("shape mismatches are contract violations") {
  const auto spec = ModelSpec::logistic(2, 2);
  CHECK_THROWS_AS(loss_and_gradient(ParamVector(5), one_sample({1, 2}, 0), spec),
                  ContractViolation);
  CHECK_THROWS_AS(loss_and_gradient(ParamVector(6), one_sample({1, 2, 3}, 0), spec),
                  ContractViolation);
  CHECK_THROWS_AS(loss_and_gradient(ParamVector(6), one_sample({1, 2}, 2), spec),
                  ContractViolation);
}

TEST_CASE("sgd_step arithmetic") {
  const ParamVector w{1.0, 2.0};
  CHECK(bitwise_equal(sgd_step(w, ParamVector(2), 0.3), w));
  const auto s = sgd_step(w, ParamVector{10.0, -10.0}, 0.1);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 3.0);
  CHECK_THROWS_AS(sgd_step(w, ParamVector(3), 0.1), ContractViolation);
  CHECK_THROWS_AS(sgd_step(w, ParamVector(2), 0.0), ContractViolation);
}

TEST_CASE("two steps equal one step on the summed gradient") {
  // Dyadic values keep every intermediate exact.
  const ParamVector w{1.5, -2.25, 0.125};
  const ParamVector g1{0.5, 0.25, -1.0}, g2{-0.75, 2.0, 0.5};
  ParamVector sum(3);
  for (std::size_t j = 0; j < 3; ++j) sum[j] = g1[j] + g2[j];
  CHECK(bitwise_equal(sgd_step(sgd_step(w, g1, 0.5), g2, 0.5), sgd_step(w, sum, 0.5)));

  std::mt19937_64 rng(9);
  const auto a = random_params(rng, 50, 1.0), h1 = random_params(rng, 50, 1.0),
             h2 = random_params(rng, 50, 1.0);
  ParamVector hs(50);
  for (std::size_t j = 0; j < 50; ++j) hs[j] = h1[j] + h2[j];
  const auto two = sgd_step(sgd_step(a, h1, 0.1), h2, 0.1);
  const auto one = sgd_step(a, hs, 0.1);
  for (std::size_t j = 0; j < 50; ++j) CHECK(two[j] == doctest::Approx(one[j]).epsilon(1e-12));
}

TEST_CASE("evaluation") {
  const auto spec = ModelSpec::logistic(2, 2);

  SUBCASE("zero parameters predict class 0") {
    Batch b;
    b.dim = 2;
    b.push_back(std::vector<double>{1, 1}, 0);
    b.push_back(std::vector<double>{-1, 2}, 1);
    b.push_back(std::vector<double>{3, -1}, 1);
    b.push_back(std::vector<double>{0, 0}, 0);
    CHECK(predict(ParamVector(6), b.row(1), spec) == 0);
    CHECK(evaluate(ParamVector(6), b, spec).accuracy == 0.5);
  }

  SUBCASE("separable data is fitted perfectly") {
    Batch b;
    b.dim = 2;
    for (int i = 0; i < 10; ++i) {
      b.push_back(std::vector<double>{2.0 + 0.1 * i, 1.0}, 0);
      b.push_back(std::vector<double>{-2.0 - 0.1 * i, -1.0}, 1);
    }
    ParamVector w(6);
    for (int step = 0; step < 200; ++step) w = sgd_step(w, loss_and_gradient(w, b, spec).grad, 0.5);
    CHECK(evaluate(w, b, spec).accuracy == 1.0);
  }

  SUBCASE("matches a per-sample recomputation") {
    std::mt19937_64 rng(77);
    for (int c = 0; c < 20; ++c) {
      const auto s = ModelSpec::logistic(4, 5);
      const auto w = random_params(rng, s.dimension(), 1.0);
      const auto data = random_batch(rng, 4, 5, 30);
      const auto got = evaluate(w, data, s);
      const auto want = naive_logistic_eval(w, data, 5);
      CHECK(got.accuracy == want.accuracy);
      CHECK(got.loss == doctest::Approx(want.loss).epsilon(1e-12));
      CHECK(got.loss == doctest::Approx(batch_loss(w, data, s)).epsilon(1e-14));
    }
  }

  SUBCASE("empty dataset") {
    Batch empty;
    empty.dim = 2;
    CHECK_THROWS_AS(evaluate(ParamVector(6), empty, spec), ContractViolation);
  }
}

TEST_CASE("bitwise_equal separates signed zeros") {
  CHECK(bitwise_equal(ParamVector{0.0, 1.0}, ParamVector{0.0, 1.0}));
  CHECK_FALSE(bitwise_equal(ParamVector{0.0}, ParamVector{-0.0}));
  CHECK_FALSE(bitwise_equal(ParamVector{0.0}, ParamVector{0.0, 0.0}));
}

}  // TEST_SUITE
