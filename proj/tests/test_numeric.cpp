#include <doctest.h>

#include <cmath>
#include <numeric>

#include "popsyn/error.hpp"
#include "popsyn/kernels.hpp"
#include "popsyn/layer.hpp"
#include "popsyn/matrix.hpp"
#include "popsyn/mlp.hpp"
#include "popsyn/rng.hpp"
#include "support.hpp"

using namespace popsyn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.uniform() * 2 - 1;
  return m;
}

// Plain triple loop, written independently of the kernels.
Matrix naive_affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix out(x.rows(), w.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < w.rows(); ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < x.cols(); ++k) s += x(i, k) * w(j, k);
      out(i, j) = s;
    }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  return d;
}

}  // namespace

TEST_SUITE("numeric") {

TEST_CASE("matrix storage is rows times cols") {
  Matrix m(3, 4, 1.5);
  CHECK(m.size() == 12);
  CHECK(m.values().size() == m.rows() * m.cols());
  m(2, 3) = 7;
  CHECK(m.row(2)[3] == 7);
  CHECK(m.all_finite());
  m(0, 0) = std::nan("");
  CHECK_FALSE(m.all_finite());
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>(3)), ShapeError);
}

TEST_CASE("hconcat, column_slice and gather_rows") {
  const auto a = Matrix::from_rows({{1, 2}, {3, 4}});
  const auto b = Matrix::from_rows({{5}, {6}});
  const auto ab = hconcat(a, b);
  CHECK(ab == Matrix::from_rows({{1, 2, 5}, {3, 4, 6}}));
  CHECK(column_slice(ab, 1, 2) == Matrix::from_rows({{2, 5}, {4, 6}}));
  const std::vector<std::size_t> idx{1, 1, 0};
  CHECK(gather_rows(a, idx) == Matrix::from_rows({{3, 4}, {3, 4}, {1, 2}}));
  CHECK_THROWS_AS(hconcat(a, Matrix(3, 1)), ShapeError);
}

TEST_CASE("linear_forward hand cases") {
  DenseLayer id(Matrix::from_rows({{1, 0}, {0, 1}}), {0, 0}, Activation::identity);
  CHECK(linear_forward(id, Matrix::from_rows({{3, 4}})) == Matrix::from_rows({{3, 4}}));

  SeededRng rng(4);
  auto relu = DenseLayer::initialized(5, 3, Activation::relu, rng);
  CHECK(linear_forward(relu, Matrix(2, 5)) == Matrix(2, 3));

  DenseLayer w(Matrix::from_rows({{1, 2}, {3, 4}}), {0, 0}, Activation::identity);
  CHECK(linear_forward(w, Matrix::from_rows({{1, 1}})) == Matrix::from_rows({{3, 7}}));
  CHECK_THROWS_AS(linear_forward(w, Matrix(1, 3)), ShapeError);
}

TEST_CASE("elu") {
  CHECK(elu(0.0) == 0.0);
  CHECK(elu(2.5) == 2.5);
  CHECK(elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(elu(-1.0) == doctest::Approx(-0.6321).epsilon(1e-4));
}

TEST_CASE("softmax blocks normalize each block separately") {
  Matrix m = Matrix::from_rows({{1, 2, 1000, 1000, 1000}});
  const std::vector<std::size_t> blocks{2, 3};
  apply_activation(Activation::softmax_blocks, blocks, m);
  CHECK(m(0, 0) + m(0, 1) == doctest::Approx(1.0));
  CHECK(m(0, 1) == doctest::Approx(std::exp(2.0) / (std::exp(1.0) + std::exp(2.0))));
  for (std::size_t j = 2; j < 5; ++j) CHECK(m(0, j) == doctest::Approx(1.0 / 3));
  CHECK(m.all_finite());
  Matrix bad(1, 5);
  const std::vector<std::size_t> short_blocks{2, 2};
  CHECK_THROWS_AS(apply_activation(Activation::softmax_blocks, short_blocks, bad), ShapeError);
}

TEST_CASE("glorot initialization bounds and zero bias") {
  SeededRng rng(9);
  const auto l = DenseLayer::initialized(30, 20, Activation::elu, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  for (double w : l.weights.values()) CHECK(std::abs(w) <= limit);
  for (double b : l.bias) CHECK(b == 0.0);
  CHECK(l.grad_weights.rows() == 20);
  CHECK(l.grad_weights.cols() == 30);
}

TEST_CASE("serial and parallel kernels agree with a naive oracle") {
  SeededRng rng(21);
  for (auto [b, in, out] : {std::tuple{1, 1, 1}, std::tuple{7, 13, 5}, std::tuple{64, 300, 200},
                            std::tuple{256, 120, 1200}}) {
    const auto x = random_matrix(b, in, rng);
    const auto w = random_matrix(out, in, rng);
    std::vector<double> bias(out);
    for (auto& v : bias) v = rng.uniform();
    Matrix ys(b, out), yp(b, out);
    kernels::serial::affine(x, w, bias, ys);
    kernels::parallel::affine(x, w, bias, yp);
    const auto ref = naive_affine(x, w, bias);
    CHECK(max_abs_diff(ys, ref) < 1e-10);
    CHECK(max_abs_diff(yp, ref) < 1e-10);

    const auto g = random_matrix(b, out, rng);
    Matrix gs(b, in), gp(b, in);
    kernels::serial::backprop_input(g, w, gs);
    kernels::parallel::backprop_input(g, w, gp);
    CHECK(max_abs_diff(gs, gp) < 1e-10);

    Matrix ws(out, in), wp(out, in);
    std::vector<double> bs(out), bp(out);
    kernels::serial::accumulate_weight_grad(g, x, ws, bs);
    kernels::parallel::accumulate_weight_grad(g, x, wp, bp);
    CHECK(max_abs_diff(ws, wp) < 1e-10);
    for (int j = 0; j < out; ++j) CHECK(bs[j] == doctest::Approx(bp[j]).epsilon(1e-12));
  }
  Matrix bad(1, 1);
  CHECK_THROWS_AS(kernels::parallel::affine(Matrix(2, 3), Matrix(4, 2), std::vector<double>(4), bad), ShapeError);
}

TEST_CASE("backward on a single identity layer with loss = sum of outputs") {
  DenseLayer l(Matrix::from_rows({{0.5, -1}}), {0.25}, Activation::identity);
  const auto x = Matrix::from_rows({{2, 3}});
  l.forward(x);
  l.backward(Matrix::from_rows({{1}}));
  CHECK(l.grad_weights == x);
  CHECK(l.grad_bias == std::vector<double>{1.0});
}

TEST_CASE("backward with zero upstream gradient leaves zero buffers") {
  SeededRng rng(3);
  auto net = Mlp::initialized({4, {6, 5}, Activation::elu, 3, Activation::sigmoid, {}}, rng);
  net.forward(random_matrix(2, 4, rng));
  net.backward(Matrix(2, 3));
  for (double g : net.flat_gradients()) CHECK(g == 0.0);
}

TEST_CASE("backward without a forward pass is a state error") {
  SeededRng rng(3);
  auto l = DenseLayer::initialized(2, 2, Activation::relu, rng);
  CHECK_THROWS_AS(l.backward(Matrix(1, 2)), StateError);
  l.forward(Matrix(1, 2));
  CHECK(l.has_cache());
  l.backward(Matrix(1, 2));
  CHECK_FALSE(l.has_cache());
  CHECK_THROWS_AS(l.backward(Matrix(1, 2)), StateError);
}

TEST_CASE("two-layer network gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SeededRng rng(seed);
    for (auto out_act : {Activation::identity, Activation::sigmoid, Activation::softmax_blocks, Activation::elu}) {
      const std::vector<std::size_t> blocks = out_act == Activation::softmax_blocks ? std::vector<std::size_t>{2, 3}
                                                                                     : std::vector<std::size_t>{};
      auto net = Mlp::initialized({4, {7}, Activation::elu, 5, out_act, blocks}, rng);
      const auto x = random_matrix(3, 4, rng);
      const auto weight = random_matrix(3, 5, rng);
      auto loss = [&] {
        const auto y = net.predict(x);
        double s = 0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * weight.values()[i];
        return s;
      };
      net.zero_grad();
      net.forward(x);
      net.backward(weight);
      const auto analytic = net.flat_gradients();
      CHECK(testing::max_relative_error(analytic, testing::numeric_gradient(net, loss)) < 1e-4);
    }
  }
}

TEST_CASE("relu and sigmoid layers differentiate correctly") {
  SeededRng rng(77);
  for (auto act : {Activation::relu, Activation::sigmoid}) {
    auto net = Mlp::initialized({3, {6}, act, 2, Activation::identity, {}}, rng);
    const auto x = random_matrix(4, 3, rng);
    auto loss = [&] {
      const auto y = net.predict(x);
      return std::accumulate(y.values().begin(), y.values().end(), 0.0);
    };
    net.zero_grad();
    net.forward(x);
    net.backward(Matrix(4, 2, 1.0));
    CHECK(testing::max_relative_error(net.flat_gradients(), testing::numeric_gradient(net, loss)) < 1e-4);
  }
}

TEST_CASE("rmsprop scalar updates") {
  const RmsPropConfig cfg{0.001, 0.9, 1e-8};
  std::vector<double> p{0.0}, g{1.0}, acc{0.0};
  rmsprop_update(cfg, p, g, acc);
  // Oracle: acc = 0.1, step = -lr / (sqrt(0.1) + eps).
  CHECK(p[0] == doctest::Approx(-0.001 / (std::sqrt(0.1) + 1e-8)).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(-0.0031623).epsilon(1e-4));
  CHECK(g[0] == 0.0);
  g[0] = 1.0;
  const double before = p[0];
  rmsprop_update(cfg, p, g, acc);
  CHECK(acc[0] == doctest::Approx(0.19));
  CHECK(p[0] - before == doctest::Approx(-0.001 / (std::sqrt(0.19) + 1e-8)).epsilon(1e-12));
  CHECK(p[0] - before == doctest::Approx(-0.0022942).epsilon(1e-4));

  std::vector<double> q{0.3, -2.0}, zero{0.0, 0.0}, acc2{0.0, 0.0};
  rmsprop_update(cfg, q, zero, acc2);
  CHECK(q == std::vector<double>{0.3, -2.0});
}

TEST_CASE("rmsprop optimizer mirrors shapes, stays nonnegative and zeroes gradients") {
  SeededRng rng(5);
  auto net = Mlp::initialized({3, {4}, Activation::elu, 2, Activation::identity, {}}, rng);
  RmsProp opt(net, {});
  REQUIRE(opt.weight_accumulators().size() == net.layers().size());
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    CHECK(opt.weight_accumulators()[i].rows() == net.layers()[i].weights.rows());
    CHECK(opt.weight_accumulators()[i].cols() == net.layers()[i].weights.cols());
    CHECK(opt.bias_accumulators()[i].size() == net.layers()[i].bias.size());
  }
  for (int step = 0; step < 3; ++step) {
    net.forward(random_matrix(2, 3, rng));
    net.backward(random_matrix(2, 2, rng));
    opt.step(net);
    for (double g : net.flat_gradients()) CHECK(g == 0.0);
  }
  for (const auto& m : opt.weight_accumulators())
    for (double a : m.values()) CHECK(a >= 0.0);
}

TEST_CASE("flat parameters round trip") {
  SeededRng rng(8);
  auto net = Mlp::initialized({3, {4}, Activation::elu, 2, Activation::identity, {}}, rng);
  auto p = net.flat_parameters();
  CHECK(p.size() == net.parameter_count());
  CHECK(p.size() == 3 * 4 + 4 + 4 * 2 + 2);
  for (auto& v : p) v += 1;
  net.set_flat_parameters(p);
  CHECK(net.flat_parameters() == p);
  CHECK_THROWS_AS(net.set_flat_parameters(std::vector<double>(3)), ShapeError);
}

TEST_CASE("seeded rng is deterministic and forks independently") {
  SeededRng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  SeededRng c(123);
  CHECK(c.fork(1).next_u64() == SeededRng(123).fork(1).next_u64());
  CHECK(c.fork(1).next_u64() != c.fork(2).next_u64());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(a.below(7) < 7);
  }
}

TEST_CASE("categorical draws follow the weights") {
  SeededRng rng(11);
  const std::vector<double> w{0.2, 0.0, 0.5, 0.3};
  std::vector<double> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[rng.categorical(w)] += 1;
  CHECK(counts[1] == 0);
  for (int k = 0; k < 4; ++k) CHECK(counts[k] / n == doctest::Approx(w[k]).epsilon(0.02));
}

TEST_CASE("standard normal sampler") {
  SeededRng a(42), b(42);
  CHECK(sample_standard_normal(a, 50) == sample_standard_normal(b, 50));
  CHECK_THROWS_AS(sample_standard_normal(a, 0), std::invalid_argument);

  SeededRng rng(2024);
  const auto v = sample_standard_normal(rng, 100000);
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= v.size() - 1;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

}  // TEST_SUITE
