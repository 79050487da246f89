#include <doctest.h>

#include <cmath>
#include <random>

#include "gvt/ops.hpp"
#include "gvt/params.hpp"

using namespace gvt::nn;

TEST_CASE("forward values of small graphs") {
  CHECK(Tensor::scalar(3.0).item() == 3.0);
  CHECK(sum(Tensor::zeros({4, 3})).item() == 0.0);
  Tensor x = Tensor::scalar(2.0), y = Tensor::scalar(5.0);
  CHECK(mul(x, y).item() == 10.0);
  CHECK(forward_eval(mul(x, y)) == std::vector<double>{10.0});
}

TEST_CASE("non-finite intermediate names the op") {
  Tensor x = Tensor::variable({1}, {800.0});
  try {
    (void)exp(x);
    FAIL("expected a NumericsError");
  } catch (const NumericsError& e) {
    CHECK(std::string(e.what()).find("exp") != std::string::npos);
  }
}

TEST_CASE("backward on hand-differentiable losses") {
  Tensor x = Tensor::variable({1}, {3.0});
  backward(square(x));
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));

  ParameterStore store;
  Tensor p = store.add("p", {2}, {1.0, -2.0});
  auto grads = backward_grad(Tensor::scalar(4.0), store);
  CHECK(grads.at("p") == std::vector<double>{0.0, 0.0});

  Tensor z = Tensor::variable({1}, {1.0});
  backward(exp(scale(square(z), -0.5)));
  CHECK(z.grad()[0] == doctest::Approx(-std::exp(-0.5)).epsilon(1e-14));
  CHECK(z.grad()[0] == doctest::Approx(-0.6065).epsilon(1e-4));
}

TEST_CASE("non-scalar loss is rejected") {
  Tensor x = Tensor::variable({2}, {1.0, 2.0});
  CHECK_THROWS_AS(backward(square(x)), NumericsError);
}

TEST_CASE("finite difference harness on trivial ops") {
  Tensor x = Tensor::variable({1}, {2.0});
  auto rep = finite_diff_check("square", [](const std::vector<Tensor>& in) { return square(in[0]); }, {x}, 1e-4, 1e-4);
  CHECK(rep.passed);
  CHECK(rep.max_rel_error < 1e-6);

  Tensor y = Tensor::variable({1}, {2.0});
  auto rep2 = finite_diff_check("constant", [](const std::vector<Tensor>&) { return Tensor::scalar(1.5); }, {y},
                                1e-4, 1e-4);
  CHECK(rep2.passed);
  CHECK(rep2.entries[0].analytic == 0.0);
  CHECK(rep2.entries[0].numeric == 0.0);
}

TEST_CASE("backward of a sum of losses is the sum of backwards") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(6);
  for (auto& e : v) e = n(rng);
  auto loss_a = [](const Tensor& x) { return sum(square(sigmoid(x))); };
  auto loss_b = [](const Tensor& x) { return mean(softplus(scale(x, 3.0))); };
  Tensor x1 = Tensor::variable({2, 3}, v), x2 = Tensor::variable({2, 3}, v), x3 = Tensor::variable({2, 3}, v);
  backward(add(loss_a(x1), loss_b(x1)));
  backward(loss_a(x2));
  backward(loss_b(x3));
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(x1.grad()[i] == doctest::Approx(x2.grad()[i] + x3.grad()[i]).epsilon(1e-14));
}

TEST_CASE("gradient accumulates across uses of the same tensor") {
  Tensor x = Tensor::variable({1}, {1.5});
  backward(add(mul(x, x), x));
  CHECK(x.grad()[0] == doctest::Approx(4.0));
}

namespace {

using Op = std::function<Tensor(const std::vector<Tensor>&)>;

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  Op op;
  double spread = 1.0;
};

std::vector<OpCase> op_cases() {
  return {
      {"add", {{2, 3}, {3}}, [](const auto& in) { return add(in[0], in[1]); }},
      {"sub", {{2, 3}, {2, 3}}, [](const auto& in) { return sub(in[0], in[1]); }},
      {"mul", {{2, 3}, {3}}, [](const auto& in) { return mul(in[0], in[1]); }},
      {"matmul", {{3, 4}, {4, 2}}, [](const auto& in) { return matmul(in[0], in[1]); }},
      {"linear", {{3, 4}, {4, 2}, {2}}, [](const auto& in) { return linear(in[0], in[1], in[2]); }},
      {"bmm", {{2, 3, 2}, {2, 2, 3}}, [](const auto& in) { return bmm(in[0], in[1]); }},
      {"bmm_nt", {{2, 3, 2}, {2, 4, 2}}, [](const auto& in) { return bmm_nt(in[0], in[1]); }},
      {"permute", {{2, 3, 4}}, [](const auto& in) { return permute(in[0], {2, 0, 1}); }},
      {"narrow", {{3, 4}}, [](const auto& in) { return narrow(in[0], 1, 1, 2); }},
      {"concat", {{2, 2}, {2, 3}}, [](const auto& in) { return concat({in[0], in[1]}, 1); }},
      {"index_select", {{4, 2}}, [](const auto& in) { return index_select(in[0], {3, 0, 3, 1}); }},
      {"tile_leading", {{2, 3}}, [](const auto& in) { return tile_leading(in[0], 3); }},
      {"sigmoid", {{5}}, [](const auto& in) { return sigmoid(in[0]); }, 3.0},
      {"softplus", {{5}}, [](const auto& in) { return softplus(in[0]); }, 3.0},
      {"exp", {{5}}, [](const auto& in) { return exp(in[0]); }},
      {"silu", {{5}}, [](const auto& in) { return silu(in[0]); }, 3.0},
      {"square", {{5}}, [](const auto& in) { return square(in[0]); }},
      {"softmax", {{3, 4}}, [](const auto& in) { return softmax_last(in[0]); }},
      {"layer_norm", {{3, 4}, {4}, {4}}, [](const auto& in) { return layer_norm(in[0], in[1], in[2]); }},
      {"mean", {{3, 4}}, [](const auto& in) { return mean(in[0]); }},
      {"mse", {{3, 4}, {3, 4}}, [](const auto& in) { return mse(in[0], in[1]); }},
      {"im2col3x3", {{2, 3, 3, 2}}, [](const auto& in) { return im2col3x3(in[0]); }},
  };
}

}  // namespace

TEST_CASE("every registered op matches central differences on random inputs") {
  std::mt19937_64 rng(11);
  for (const auto& oc : op_cases()) {
    std::normal_distribution<double> n(0.0, oc.spread);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Tensor> in;
      for (const auto& s : oc.shapes) {
        std::vector<double> v(numel(s));
        for (auto& e : v) e = n(rng);
        in.push_back(Tensor::variable(s, v));
      }
      auto rep = finite_diff_check(oc.name, oc.op, in, 1e-4, 1e-4, 100 + trial);
      worst = std::max(worst, rep.max_rel_error);
    }
    INFO(oc.name << " worst=" << worst);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("relu and straight-through forward and backward") {
  Tensor x = Tensor::variable({3}, {-1.0, 0.5, 2.0});
  backward(sum(relu(x)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  Tensor soft = Tensor::variable({2}, {0.3, 0.8});
  Tensor hard = straight_through(soft, {-0.3, 0.2});
  CHECK(hard.data()[0] == doctest::Approx(0.0));
  CHECK(hard.data()[1] == doctest::Approx(1.0));
  backward(sum(scale(hard, 2.0)));
  CHECK(soft.grad()[0] == 2.0);
  CHECK(soft.grad()[1] == 2.0);
}

TEST_CASE("detach stops the gradient") {
  Tensor x = Tensor::variable({1}, {2.0});
  backward(mul(x, detach(x)));
  CHECK(x.grad()[0] == 2.0);
}

TEST_CASE("shape errors are reported") {
  Tensor a = Tensor::variable({2, 3}, std::vector<double>(6, 1.0));
  Tensor b = Tensor::variable({4, 2}, std::vector<double>(8, 1.0));
  CHECK_THROWS_AS(matmul(a, b), NumericsError);
  CHECK_THROWS_AS(reshape(a, {5}), NumericsError);
  CHECK_THROWS_AS(Tensor::constant({2, 2}, {1.0}), NumericsError);
}

TEST_CASE("parameter names are unique") {
  ParameterStore store;
  store.add_constant("w", {2}, 0.0);
  CHECK_THROWS_AS(store.add_constant("w", {2}, 0.0), NumericsError);
  CHECK(store.total_size() == 2);
}

TEST_CASE("adam descends a quadratic and honours lr scaling") {
  ParameterStore store;
  Tensor a = store.add("a.w", {1}, {1.0});
  Tensor b = store.add("b.w", {1}, {1.0});
  Adam opt({0.1, 0.9, 0.999, 1e-8, 0.0, {{"b.", 0.0}}});
  for (int i = 0; i < 200; ++i) {
    store.zero_grad();
    backward(add(square(a), square(b)));
    opt.step(store);
  }
  CHECK(std::abs(a.data()[0]) < 0.05);
  CHECK(b.data()[0] == 1.0);
}
