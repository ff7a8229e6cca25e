#include "gradient_suite.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "gradcheck.hpp"
#include "imda/arch/network.hpp"

namespace imda::testing {

namespace {

void record(GradCheckResult& r, std::span<const double> analytic, std::span<const double> numeric) {
  r.worst = std::max(r.worst, relative_error(analytic, numeric));
}

struct ConvCase {
  Shape in;
  std::size_t out, kh, kw, stride, dilation;
  Padding padding;
};

struct PoolCase {
  Shape in;
  std::size_t window, stride;
  Padding padding;
};

}  // namespace

GradCheckResult check_conv_gradients(std::uint64_t seed) {
  const std::array<ConvCase, 6> cases{{
      {{1, 1, 5, 5}, 1, 3, 3, 1, 2, Padding::valid},
      {{2, 3, 6, 7}, 4, 3, 3, 1, 1, Padding::same},
      {{1, 2, 7, 6}, 3, 3, 3, 1, 2, Padding::same},
      {{2, 2, 8, 8}, 2, 3, 3, 2, 1, Padding::same},
      {{1, 3, 5, 5}, 2, 1, 1, 1, 1, Padding::same},
      {{2, 2, 9, 7}, 3, 2, 3, 2, 2, Padding::valid},
  }};
  GradCheckResult r{"conv2d", 0, 0.0};
  Rng rng(seed);
  for (const auto& c : cases) {
    auto spec = ConvSpec<double>::make(c.in.c, c.out, c.kh, c.kw, c.dilation, c.padding, c.stride);
    for (auto& v : spec.weights.data()) v = rng.uniform(-1, 1);
    for (auto& v : spec.bias) v = rng.uniform(-1, 1);
    Tensor<double> x = random_tensor(c.in, rng);
    Tensor<double> probe = random_tensor(conv2d(x, spec).shape(), rng);
    auto analytic = conv2d_grad(x, spec, probe);
    auto loss = [&] { return weighted_sum(conv2d(x, spec), probe); };
    record(r, analytic.grad_x.data(), numeric_gradient(x.data(), loss));
    record(r, analytic.grad_w.data(), numeric_gradient(spec.weights.data(), loss));
    record(r, analytic.grad_b, numeric_gradient(spec.bias, loss));
    ++r.shapes;
  }
  return r;
}

namespace {

GradCheckResult check_pool_gradients(PoolKind kind, std::uint64_t seed) {
  const std::array<PoolCase, 5> cases{{
      {{1, 1, 4, 4}, 2, 2, Padding::valid},
      {{2, 3, 5, 5}, 3, 1, Padding::same},
      {{1, 2, 6, 7}, 2, 2, Padding::same},
      {{2, 1, 7, 5}, 3, 2, Padding::valid},
      {{1, 2, 4, 6}, 3, 1, Padding::same},
  }};
  GradCheckResult r{kind == PoolKind::max ? "max_pool" : "avg_pool", 0, 0.0};
  Rng rng(seed);
  for (const auto& c : cases) {
    PoolSpec spec{kind, c.window, c.stride, c.padding};
    // Distinct values spaced 1e-2 apart keep every max away from a tie by
    // far more than the finite-difference step.
    Tensor<double> x = distinct_tensor(c.in, rng);
    Tensor<double> probe = random_tensor(pool2d(x, spec).shape(), rng);
    auto analytic = pool2d_grad(x, spec, probe);
    auto loss = [&] { return weighted_sum(pool2d(x, spec), probe); };
    record(r, analytic.data(), numeric_gradient(x.data(), loss));
    ++r.shapes;
  }
  return r;
}

}  // namespace

GradCheckResult check_avg_pool_gradients(std::uint64_t seed) { return check_pool_gradients(PoolKind::avg, seed); }
GradCheckResult check_max_pool_gradients(std::uint64_t seed) { return check_pool_gradients(PoolKind::max, seed); }

GradCheckResult check_batchnorm_gradients(std::uint64_t seed) {
  const std::array<Shape, 5> shapes{{{2, 3, 4, 4}, {4, 2, 3, 3}, {1, 4, 5, 5}, {3, 1, 2, 6}, {2, 2, 2, 1}}};
  GradCheckResult r{"batchnorm", 0, 0.0};
  Rng rng(seed);
  for (const auto& s : shapes) {
    auto spec = BatchNormSpec<double>::make(s.c);
    for (auto& v : spec.gamma) v = rng.uniform(0.5, 2.0);
    for (auto& v : spec.beta) v = rng.uniform(-1, 1);
    Tensor<double> x = random_tensor(s, rng, -2, 2);
    Tensor<double> probe = random_tensor(s, rng);
    auto analytic = batchnorm_grad(x, spec, probe);
    auto loss = [&] { return weighted_sum(batchnorm_train(x, spec).y, probe); };
    record(r, analytic.grad_x.data(), numeric_gradient(x.data(), loss));
    record(r, analytic.grad_gamma, numeric_gradient(spec.gamma, loss));
    record(r, analytic.grad_beta, numeric_gradient(spec.beta, loss));
    ++r.shapes;
  }
  return r;
}

GradCheckResult check_relu_gradients(std::uint64_t seed) {
  const std::array<Shape, 5> shapes{{{1, 1, 1, 3}, {2, 3, 4, 4}, {1, 2, 5, 3}, {3, 1, 2, 2}, {2, 4, 3, 3}}};
  GradCheckResult r{"relu", 0, 0.0};
  Rng rng(seed);
  for (const auto& s : shapes) {
    Tensor<double> x = off_kink_tensor(s, rng);
    Tensor<double> probe = random_tensor(s, rng);
    auto analytic = relu_grad(x, probe);
    auto loss = [&] { return weighted_sum(relu(x), probe); };
    record(r, analytic.data(), numeric_gradient(x.data(), loss));
    ++r.shapes;
  }
  return r;
}

GradCheckResult check_dense_gradients(std::uint64_t seed) {
  struct Case { std::size_t n, in, out; };
  const std::array<Case, 5> cases{{{1, 2, 1}, {3, 5, 2}, {4, 7, 3}, {2, 16, 2}, {5, 3, 4}}};
  GradCheckResult r{"dense", 0, 0.0};
  Rng rng(seed);
  for (const auto& c : cases) {
    auto spec = DenseSpec<double>::make(c.in, c.out);
    for (auto& v : spec.weights) v = rng.uniform(-1, 1);
    for (auto& v : spec.bias) v = rng.uniform(-1, 1);
    Tensor<double> x = random_tensor({c.n, c.in, 1, 1}, rng);
    Tensor<double> probe = random_tensor({c.n, c.out, 1, 1}, rng);
    auto analytic = dense_grad(x, spec, probe);
    auto loss = [&] { return weighted_sum(dense(x, spec), probe); };
    record(r, analytic.grad_x.data(), numeric_gradient(x.data(), loss));
    record(r, analytic.grad_w, numeric_gradient(spec.weights, loss));
    record(r, analytic.grad_b, numeric_gradient(spec.bias, loss));
    ++r.shapes;
  }
  return r;
}

GradCheckResult check_softmax_ce_gradients(std::uint64_t seed) {
  struct Case { std::size_t n, k; };
  const std::array<Case, 5> cases{{{1, 2}, {4, 2}, {3, 5}, {8, 2}, {2, 3}}};
  GradCheckResult r{"softmax_crossentropy", 0, 0.0};
  Rng rng(seed);
  for (const auto& c : cases) {
    Tensor<double> logits = random_tensor({c.n, c.k, 1, 1}, rng, -3, 3);
    std::vector<int> labels(c.n);
    for (auto& l : labels) l = static_cast<int>(rng.below(c.k));
    auto analytic = softmax_crossentropy<double>(logits, labels);
    auto loss = [&] { return softmax_crossentropy<double>(logits, labels).loss; };
    record(r, analytic.grad_logits.data(), numeric_gradient(logits.data(), loss));
    ++r.shapes;
  }
  return r;
}

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
  return {check_conv_gradients(seed),      check_avg_pool_gradients(seed + 1),
          check_max_pool_gradients(seed + 2), check_batchnorm_gradients(seed + 3),
          check_relu_gradients(seed + 4),  check_dense_gradients(seed + 5),
          check_softmax_ce_gradients(seed + 6)};
}

GradCheckResult check_network_gradients(std::uint64_t seed) {
  using namespace imda::arch;
  NetworkSpec spec;
  spec.input_h = 16;
  spec.input_w = 16;
  spec.stem = false;
  spec.stm_count = 1;
  spec.branch_width = 4;
  spec.squeeze_width = 2;
  auto net = build_imda<double>(spec);
  net.initialize(seed);

  Rng rng(seed ^ 0x5bd1e995);
  // Four samples with distinct values so max-pool windows have clear winners.
  Tensor<double> batch = distinct_tensor({4, 1, 16, 16}, rng, 1.0 / 1024.0);
  const std::vector<int> labels{0, 1, 1, 0};
  // Perturb gamma/beta away from their identity init so their gradients are
  // exercised in general position.
  net.for_each_param([&rng](ParamRef<double> p) {
    if (p.name.ends_with(".gamma")) for (auto& v : p.value) v = rng.uniform(0.5, 1.5);
    if (p.name.ends_with(".beta") || p.name.ends_with(".bias")) for (auto& v : p.value) v = rng.uniform(-0.2, 0.2);
  });

  auto loss = [&] {
    auto out = net.forward(batch, Mode::train);
    return softmax_crossentropy<double>(out.logits, labels).loss;
  };
  auto out = net.forward(batch, Mode::train);
  auto ce = softmax_crossentropy<double>(out.logits, labels);
  net.backward(ce.grad_logits);

  // Conv biases feeding batch norm have an exactly zero gradient, so tensors
  // whose gradients vanish on both routes are judged by the global error only.
  GradCheckResult r{"network (1 STM, 16x16)", 1, 0.0};
  std::vector<double> all_analytic, all_numeric;
  net.for_each_param([&](ParamRef<double> p) {
    std::vector<double> analytic(p.grad.begin(), p.grad.end());
    auto numeric = numeric_gradient(p.value, loss, 1e-6);
    all_analytic.insert(all_analytic.end(), analytic.begin(), analytic.end());
    all_numeric.insert(all_numeric.end(), numeric.begin(), numeric.end());
    double na = 0, nn = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      na = std::max(na, std::abs(analytic[i]));
      nn = std::max(nn, std::abs(numeric[i]));
    }
    if (std::max(na, nn) > 1e-8) r.worst = std::max(r.worst, relative_error(analytic, numeric));
  });
  r.worst = std::max(r.worst, relative_error(all_analytic, all_numeric));
  return r;
}

}  // namespace imda::testing
