// Serial reference vs OpenMP kernels, plus one training-step batch at the
// default geometry.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "vxseg/kernels.hpp"
#include "vxseg/phantom.hpp"
#include "vxseg/rng.hpp"
#include "vxseg/train.hpp"

namespace {

double seconds(const std::function<void()>& f, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  vxseg::CounterRng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

}  // namespace

int main() {
  using namespace vxseg;
  const int hw = omp_get_num_procs();
  std::printf("hardware threads: %d\n\n", hw);

  struct Case {
    const char* name;
    std::size_t m, p, q;
  };
  const Case cases[] = {{"embed 27x512*512x96", 27, 512, 96},
                        {"ffn 27x96*96x384", 27, 96, 384},
                        {"square 256", 256, 256, 256}};
  std::printf("%-24s %12s %12s %12s\n", "gemm_nn", "reference", "omp(1)", "omp(all)");
  for (const auto& c : cases) {
    const auto a = random_buffer(c.m * c.p, 1), b = random_buffer(c.p * c.q, 2);
    std::vector<double> out(c.m * c.q);
    const int reps = c.m == 256 ? 5 : 200;
    const double ref = seconds([&] { kernels::reference::gemm_nn(a, b, out, c.m, c.p, c.q); }, reps);
    kernels::set_threads(1);
    const double one = seconds([&] { kernels::gemm_nn(a, b, out, c.m, c.p, c.q); }, reps);
    kernels::set_threads(hw);
    const double all = seconds([&] { kernels::gemm_nn(a, b, out, c.m, c.p, c.q); }, reps);
    std::printf("%-24s %10.3fms %10.3fms %10.3fms\n", c.name, ref * 1e3, one * 1e3, all * 1e3);
  }

  std::printf("\njoint-loss batch (8 blocks, default geometry)\n");
  const auto pair = generate_phantom(7, {48, 48, 48}, 4);
  ModelConfig model;
  JointLossConfig loss;
  loss.batch_size = 8;
  const auto params = init_model(model, 1);
  std::vector<ThinThickPair> pairs{pair};
  JointObjective objective(pairs, model, loss);
  CounterRng rng(3);
  const auto batch = objective.sample(rng);
  for (int t : {1, hw}) {
    kernels::set_threads(t);
    const double s = seconds([&] { objective.evaluate(params, batch, true); }, 3);
    std::printf("  threads=%d  %.3f s/step\n", t, s);
  }
  return 0;
}
