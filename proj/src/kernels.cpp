#include "personaprop/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <string_view>

namespace personaprop::kernels {

namespace {

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double max_abs_diff_scalar(const double* x, const double* y, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i] - y[i]));
  return m;
}

double sum_abs_diff_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i] - y[i]);
  return acc;
}

void csr_mean_gather_scalar(const std::uint32_t* offsets, const std::uint32_t* indices,
                            const double* x, double* out, std::size_t n_rows) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::uint32_t begin = offsets[r];
    const std::uint32_t end = offsets[r + 1];
    if (begin == end) {
      out[r] = 0.0;
      continue;
    }
    double acc = 0.0;
    for (std::uint32_t k = begin; k < end; ++k) acc += x[indices[k]];
    out[r] = acc / static_cast<double>(end - begin);
  }
}

void csr_weighted_gather_scalar(const std::uint32_t* offsets, const std::uint32_t* indices,
                                const double* w, const double* x, double* out,
                                std::size_t n_rows) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    double acc = 0.0;
    for (std::uint32_t k = offsets[r]; k < offsets[r + 1]; ++k) {
      const std::uint32_t j = indices[k];
      acc += w[j] * x[j];
    }
    out[r] = acc;
  }
}

constexpr Ops kScalarOps = {
    "scalar",
    sum_scalar,
    axpy_scalar,
    scale_scalar,
    max_abs_diff_scalar,
    sum_abs_diff_scalar,
    csr_mean_gather_scalar,
    csr_weighted_gather_scalar,
};

}  // namespace

const Ops& scalar() { return kScalarOps; }

// Defined in kernels_avx2.cpp; nullptr off x86-64 or on CPUs without AVX2.
const Ops* avx2_ops();

const Ops* avx2() { return avx2_ops(); }

const Ops& active() {
  static const Ops* chosen = [] {
    if (const char* env = std::getenv("PERSONAPROP_KERNELS")) {
      if (std::string_view(env) == "scalar") return &kScalarOps;
    }
    if (const Ops* simd = avx2_ops()) return simd;
    return &kScalarOps;
  }();
  return *chosen;
}

}  // namespace personaprop::kernels
