#include <random>
#include <vector>

#include "doctest.h"
#include "personaprop/kernels.hpp"

using namespace personaprop;

namespace {

struct RandomCsr {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> indices;
};

RandomCsr random_csr(std::size_t n_rows, std::size_t n_cols, std::mt19937_64& rng) {
  RandomCsr csr;
  csr.offsets.push_back(0);
  std::uniform_int_distribution<std::size_t> len(0, 9);
  std::uniform_int_distribution<std::uint32_t> col(0, static_cast<std::uint32_t>(n_cols - 1));
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t k = len(rng);
    for (std::size_t i = 0; i < k; ++i) csr.indices.push_back(col(rng));
    csr.offsets.push_back(static_cast<std::uint32_t>(csr.indices.size()));
  }
  return csr;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar kernel basics") {
  const auto& ops = kernels::scalar();
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
  CHECK(ops.sum(x.data(), x.size()) == doctest::Approx(15.0));

  std::vector<double> y = {1.0, 1.0, 1.0, 1.0, 1.0};
  ops.axpy(2.0, x.data(), y.data(), x.size());
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[4] == doctest::Approx(11.0));

  ops.scale(0.5, y.data(), y.size());
  CHECK(y[4] == doctest::Approx(5.5));

  std::vector<double> z = {3.0, 2.0, 3.0, 4.0, 5.0};
  CHECK(ops.max_abs_diff(x.data(), z.data(), x.size()) == doctest::Approx(2.0));
  CHECK(ops.sum_abs_diff(x.data(), z.data(), x.size()) == doctest::Approx(2.0));

  // Two rows: mean of {x0,x2}, empty row.
  std::vector<std::uint32_t> offsets = {0, 2, 2};
  std::vector<std::uint32_t> indices = {0, 2};
  std::vector<double> out(2, -1.0);
  ops.csr_mean_gather(offsets.data(), indices.data(), x.data(), out.data(), 2);
  CHECK(out[0] == doctest::Approx(2.0));
  CHECK(out[1] == doctest::Approx(0.0));

  std::vector<double> w = {0.5, 1.0, 0.25, 1.0, 1.0};
  ops.csr_weighted_gather(offsets.data(), indices.data(), w.data(), x.data(), out.data(), 2);
  CHECK(out[0] == doctest::Approx(0.5 * 1.0 + 0.25 * 3.0));
  CHECK(out[1] == doctest::Approx(0.0));
}

TEST_CASE("avx2 kernels match the scalar reference") {
  const kernels::Ops* simd = kernels::avx2();
  if (!simd) return;  // nothing to compare on this CPU

  const auto& ref = kernels::scalar();
  std::mt19937_64 rng(17);
  for (std::size_t n : {0ul, 1ul, 3ul, 4ul, 7ul, 8ul, 33ul, 129ul, 1000ul}) {
    auto x = random_vec(n, rng);
    auto y = random_vec(n, rng);

    CHECK(simd->sum(x.data(), n) == doctest::Approx(ref.sum(x.data(), n)).epsilon(1e-12));
    CHECK(simd->max_abs_diff(x.data(), y.data(), n) ==
          doctest::Approx(ref.max_abs_diff(x.data(), y.data(), n)).epsilon(1e-12));
    CHECK(simd->sum_abs_diff(x.data(), y.data(), n) ==
          doctest::Approx(ref.sum_abs_diff(x.data(), y.data(), n)).epsilon(1e-12));

    auto y_ref = y;
    auto y_simd = y;
    ref.axpy(1.7, x.data(), y_ref.data(), n);
    simd->axpy(1.7, x.data(), y_simd.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y_simd[i] == doctest::Approx(y_ref[i]).epsilon(1e-12));

    auto x_ref = x;
    auto x_simd = x;
    ref.scale(-0.3, x_ref.data(), n);
    simd->scale(-0.3, x_simd.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(x_simd[i] == doctest::Approx(x_ref[i]).epsilon(1e-12));
  }

  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n_rows = 64, n_cols = 50;
    auto csr = random_csr(n_rows, n_cols, rng);
    auto x = random_vec(n_cols, rng);
    auto w = random_vec(n_cols, rng);
    std::vector<double> out_ref(n_rows), out_simd(n_rows);

    ref.csr_mean_gather(csr.offsets.data(), csr.indices.data(), x.data(), out_ref.data(), n_rows);
    simd->csr_mean_gather(csr.offsets.data(), csr.indices.data(), x.data(), out_simd.data(), n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
      CHECK(out_simd[r] == doctest::Approx(out_ref[r]).epsilon(1e-12));
    }

    ref.csr_weighted_gather(csr.offsets.data(), csr.indices.data(), w.data(), x.data(),
                            out_ref.data(), n_rows);
    simd->csr_weighted_gather(csr.offsets.data(), csr.indices.data(), w.data(), x.data(),
                              out_simd.data(), n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
      CHECK(out_simd[r] == doctest::Approx(out_ref[r]).epsilon(1e-12));
    }
  }
}

TEST_CASE("active backend is one of the two implementations") {
  const auto& chosen = kernels::active();
  const bool is_scalar = &chosen == &kernels::scalar();
  const bool is_avx2 = kernels::avx2() && &chosen == kernels::avx2();
  CHECK((is_scalar || is_avx2));
}
