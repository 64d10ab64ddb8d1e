// Throughput probe for the matmul kernel at the shapes the transformer
// actually uses. Prints GFLOP/s per shape.
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "gfv/tensor.hpp"

using Clock = std::chrono::steady_clock;

static double bench(int m, int k, int n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(static_cast<size_t>(m) * k), b(static_cast<size_t>(k) * n),
      c(static_cast<size_t>(m) * n);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng);
  const double flops = 2.0 * m * k * n;
  int reps = static_cast<int>(2e9 / flops) + 1;
  gfv::kernel::matmul_nn(a.data(), b.data(), c.data(), m, k, n);  // warm-up
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) gfv::kernel::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
  auto t1 = Clock::now();
  const double sec = std::chrono::duration<double>(t1 - t0).count();
  return flops * reps / sec / 1e9;
}

int main() {
  struct Shape {
    int m, k, n;
    const char* tag;
  };
  const Shape shapes[] = {
      {257, 128, 128, "proj d*d"},   {257, 128, 512, "mlp up"},
      {257, 512, 128, "mlp down"},   {257, 32, 257, "scores"},
      {257, 257, 32, "probs*v"},     {257, 128, 64, "head"},
      {1, 128, 128, "decode proj"},  {1, 32, 257, "decode scores"},
      {128, 128, 128, "square 128"}, {512, 512, 512, "square 512"},
  };
  for (const auto& s : shapes)
    std::printf("%-14s m=%-4d k=%-4d n=%-4d  %7.2f GF/s\n", s.tag, s.m, s.k, s.n,
                bench(s.m, s.k, s.n));
  return 0;
}
