#include "doctest.h"
#include "test_support.hpp"
#include "vxseg/kernels.hpp"

using namespace vxseg;
using vxseg::testing::random_tensor;

namespace {

using Kernel = void (*)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                        std::size_t, std::size_t);

void compare(Kernel fast, Kernel ref, std::size_t m, std::size_t p, std::size_t q, std::uint64_t seed,
             bool a_is_pm) {
  const Tensor a = random_tensor(a_is_pm ? Shape{p, m} : Shape{m, p}, seed);
  const Tensor b = random_tensor(fast == &kernels::gemm_nt ? Shape{q, p} : Shape{p, q}, seed + 1);
  Tensor c0 = random_tensor({m, q}, seed + 2), c1 = c0;
  fast(a.data(), b.data(), c0.data(), m, p, q);
  ref(a.data(), b.data(), c1.data(), m, p, q);
  for (std::size_t i = 0; i < c0.size(); ++i) REQUIRE(c0[i] == doctest::Approx(c1[i]).epsilon(1e-12));
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
  const std::size_t sizes[][3] = {{1, 1, 1}, {3, 5, 2}, {27, 512, 96}, {64, 64, 64}, {130, 7, 33}};
  for (int threads : {1, 2, 4}) {
    kernels::set_threads(threads);
    std::uint64_t seed = 0;
    for (const auto& s : sizes) {
      compare(&kernels::gemm_nn, &kernels::reference::gemm_nn, s[0], s[1], s[2], seed += 3, false);
      compare(&kernels::gemm_nt, &kernels::reference::gemm_nt, s[0], s[1], s[2], seed += 3, false);
      compare(&kernels::gemm_tn, &kernels::reference::gemm_tn, s[0], s[1], s[2], seed += 3, true);
    }
  }
  kernels::set_threads(1);
}

TEST_CASE("kernel results do not depend on the thread count") {
  const Tensor a = random_tensor({200, 300}, 1), b = random_tensor({300, 150}, 2), bt = random_tensor({150, 300}, 3);
  Tensor serial({200, 150}), serial_nt({200, 150});
  kernels::set_threads(1);
  kernels::gemm_nn(a.data(), b.data(), serial.data(), 200, 300, 150);
  kernels::gemm_nt(a.data(), bt.data(), serial_nt.data(), 200, 300, 150);
  for (int threads : {2, 3, 8}) {
    kernels::set_threads(threads);
    Tensor par({200, 150}), par_nt({200, 150});
    kernels::gemm_nn(a.data(), b.data(), par.data(), 200, 300, 150);
    kernels::gemm_nt(a.data(), bt.data(), par_nt.data(), 200, 300, 150);
    CHECK(par == serial);
    CHECK(par_nt == serial_nt);
  }
  kernels::set_threads(1);
}

TEST_CASE("thread setting") {
  kernels::set_threads(3);
  CHECK(kernels::threads() == 3);
  CHECK_THROWS(kernels::set_threads(0));
  kernels::set_threads(1);
}
