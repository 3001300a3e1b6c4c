// Times the serial and OpenMP kernels on the layer shapes used in training.
// Usage: kernels_bench [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "popsyn/kernels.hpp"
#include "popsyn/rng.hpp"

using namespace popsyn;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform() - 0.5;
  return m;
}

double seconds(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / repeats;
}

struct Shape {
  const char* name;
  std::size_t batch, in, out;
};

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 50;
  const Shape shapes[] = {
      {"cvae encoder", 32, 85, 50},
      {"cgan generator hidden", 64, 63, 1200},
      {"cgan generator head", 64, 1200, 45},
      {"large", 256, 1024, 1024},
  };
  std::printf("threads %d, %d repeats\n", kernels::max_threads(), repeats);
  std::printf("%-24s %-16s %12s %12s %8s\n", "shape", "kernel", "serial ms", "parallel ms", "speedup");
  SeededRng rng(7);
  for (const auto& s : shapes) {
    const Matrix input = random_matrix(s.batch, s.in, rng);
    const Matrix weights = random_matrix(s.out, s.in, rng);
    const Matrix grad_out = random_matrix(s.batch, s.out, rng);
    std::vector<double> bias(s.out, 0.1), grad_bias(s.out);
    Matrix out(s.batch, s.out), grad_input(s.batch, s.in), grad_weights(s.out, s.in);

    auto report = [&](const char* kernel, const std::function<void()>& serial, const std::function<void()>& parallel) {
      const double a = seconds(serial, repeats), b = seconds(parallel, repeats);
      std::printf("%-24s %-16s %12.4f %12.4f %7.2fx\n", s.name, kernel, a * 1e3, b * 1e3, a / b);
    };
    report("affine", [&] { kernels::serial::affine(input, weights, bias, out); },
           [&] { kernels::parallel::affine(input, weights, bias, out); });
    report("backprop_input", [&] { kernels::serial::backprop_input(grad_out, weights, grad_input); },
           [&] { kernels::parallel::backprop_input(grad_out, weights, grad_input); });
    report("weight_grad",
           [&] { kernels::serial::accumulate_weight_grad(grad_out, input, grad_weights, grad_bias); },
           [&] { kernels::parallel::accumulate_weight_grad(grad_out, input, grad_weights, grad_bias); });
  }
}
