#pragma once

#include <cstddef>
#include <cstdint>

// Dense/CSR arithmetic kernels behind the solvers. Every operation has a
// scalar reference implementation and (on x86-64) an AVX2 variant selected at
// runtime. The two are equivalence-tested; callers go through active().

namespace personaprop::kernels {

struct Ops {
  const char* name;

  // sum of x[0..n)
  double (*sum)(const double* x, std::size_t n);

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // x[i] *= a
  void (*scale)(double a, double* x, std::size_t n);

  // max_i |x[i] - y[i]|
  double (*max_abs_diff)(const double* x, const double* y, std::size_t n);

  // sum_i |x[i] - y[i]|
  double (*sum_abs_diff)(const double* x, const double* y, std::size_t n);

  // out[r] = mean of x over indices[offsets[r]..offsets[r+1]); 0 for empty rows.
  // This is one application of a uniform-transition row: the receiving node
  // averages its neighbors.
  void (*csr_mean_gather)(const std::uint32_t* offsets, const std::uint32_t* indices,
                          const double* x, double* out, std::size_t n_rows);

  // out[r] = sum over row r of w[indices[k]] * x[indices[k]].
  // Adjoint transition step: each gathered source contributes with its own
  // weight (1/degree of the source).
  void (*csr_weighted_gather)(const std::uint32_t* offsets, const std::uint32_t* indices,
                              const double* w, const double* x, double* out,
                              std::size_t n_rows);
};

// Scalar reference kernels; always available.
const Ops& scalar();

// AVX2 kernels, or nullptr when the binary or CPU does not support them.
const Ops* avx2();

// Preferred backend: AVX2 when available, scalar otherwise. Setting the
// environment variable PERSONAPROP_KERNELS=scalar forces the reference path.
const Ops& active();

}  // namespace personaprop::kernels
