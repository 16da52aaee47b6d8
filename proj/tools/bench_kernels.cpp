// Times the OpenMP kernels against their serial references and checks that
// the two produce bit-identical output. Run from anywhere; no arguments.

#include <array>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "mcunet/kernels.hpp"
#include "mcunet/rng.hpp"

using namespace mcu;
using namespace mcu::kernels;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

Tensor randn(Rng& rng, const std::vector<int>& shape) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal();
  return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

int main() {
  Rng rng(derive_seed(17, "bench"));
  int mismatches = 0;
  std::printf("%-34s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");
  for (auto [cin, cout, hw, k] : std::vector<std::array<int, 4>>{
           {2, 32, 64, 3}, {32, 32, 64, 3}, {16, 16, 128, 3}, {8, 8, 256, 1}}) {
    ConvShape s{cin, hw, hw, cout, k, k};
    Tensor in = randn(rng, {cin, hw, hw});
    Tensor w = randn(rng, {cout, cin, k, k});
    Tensor b = randn(rng, {cout});
    Tensor out_s({cout, hw, hw}), out_p({cout, hw, hw});

    char label[96];
    std::snprintf(label, sizeof label, "conv %dx%dx%d -> %d (k=%d)", cin, hw, hw, cout, k);
    double ts = time_ms([&] { conv2d_forward_serial(s, in.data(), w.data(), b.data(), out_s.data()); }, 3);
    double tp = time_ms([&] { conv2d_forward_omp(s, in.data(), w.data(), b.data(), out_p.data()); }, 3);
    if (!bitwise_equal(out_s, out_p)) ++mismatches;
    std::printf("%-34s %10.3f %10.3f %7.2fx\n", label, ts, tp, ts / tp);

    Tensor gout = randn(rng, {cout, hw, hw});
    Tensor gin_s = Tensor::zeros({cin, hw, hw}), gin_p = Tensor::zeros({cin, hw, hw});
    std::snprintf(label, sizeof label, "conv bwd-input %dx%dx%d (k=%d)", cin, hw, hw, k);
    ts = time_ms([&] { conv2d_backward_input_serial(s, w.data(), gout.data(), gin_s.data()); }, 3);
    tp = time_ms([&] { conv2d_backward_input_omp(s, w.data(), gout.data(), gin_p.data()); }, 3);
    if (!bitwise_equal(gin_s, gin_p)) ++mismatches;
    std::printf("%-34s %10.3f %10.3f %7.2fx\n", label, ts, tp, ts / tp);

    Tensor gw_s = Tensor::zeros({cout, cin, k, k}), gw_p = Tensor::zeros({cout, cin, k, k});
    Tensor gb_s = Tensor::zeros({cout}), gb_p = Tensor::zeros({cout});
    std::snprintf(label, sizeof label, "conv bwd-weights %dx%dx%d (k=%d)", cin, hw, hw, k);
    ts = time_ms([&] { conv2d_backward_weights_serial(s, in.data(), gout.data(), gw_s.data(), gb_s.data()); }, 3);
    tp = time_ms([&] { conv2d_backward_weights_omp(s, in.data(), gout.data(), gw_p.data(), gb_p.data()); }, 3);
    if (!bitwise_equal(gw_s, gw_p) || !bitwise_equal(gb_s, gb_p)) ++mismatches;
    std::printf("%-34s %10.3f %10.3f %7.2fx\n", label, ts, tp, ts / tp);
  }
  if (mismatches) {
    std::printf("FAIL: %d serial/omp mismatches\n", mismatches);
    return 1;
  }
  std::printf("all serial/omp outputs bit-identical\n");
  return 0;
}
