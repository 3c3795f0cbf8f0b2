// Compiled with -mavx2 (and without -mfma). Only reached after a runtime CPU check.
#include <immintrin.h>

#include "cfcohort/kernels.hpp"

namespace cfcohort::kernels {

namespace {

inline double reduce_lanes(__m256d acc) {
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double s = reduce_lanes(acc);
  for (std::size_t i = body; i < n; ++i) s += a[i] * b[i];
  return s;
}

void affine_rows_avx2(const double* rows, std::size_t n_rows, std::size_t dim, const double* w, double bias,
                      double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot_avx2(rows + r * dim, w, dim) + bias;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, vy);
  }
  for (std::size_t i = body; i < n; ++i) y[i] += alpha * x[i];
}

void count_edges_le_avx2(const double* values, std::size_t n, const double* edges, std::size_t n_edges,
                         std::uint32_t* out) {
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d v = _mm256_loadu_pd(values + i);
    // compare masks are all-ones (== -1 as int64) where edge <= value
    __m256i count = _mm256_setzero_si256();
    for (std::size_t e = 0; e < n_edges; ++e) {
      const __m256d le = _mm256_cmp_pd(_mm256_set1_pd(edges[e]), v, _CMP_LE_OQ);
      count = _mm256_sub_epi64(count, _mm256_castpd_si256(le));
    }
    alignas(32) std::int64_t c[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(c), count);
    for (std::size_t k = 0; k < 4; ++k) out[i + k] = static_cast<std::uint32_t>(c[k]);
  }
  for (std::size_t i = body; i < n; ++i) {
    std::uint32_t c = 0;
    for (std::size_t e = 0; e < n_edges; ++e) c += edges[e] <= values[i] ? 1u : 0u;
    out[i] = c;
  }
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = reduce_lanes(acc);
  for (std::size_t i = body; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev_avx2(const double* x, std::size_t n, double mean) {
  const __m256d vm = _mm256_set1_pd(mean);
  __m256d acc = _mm256_setzero_pd();
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = reduce_lanes(acc);
  for (std::size_t i = body; i < n; ++i) {
    const double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

constexpr KernelTable kAvx2{
    Isa::Avx2, dot_avx2, affine_rows_avx2, axpy_avx2, count_edges_le_avx2, sum_avx2, sum_sq_dev_avx2,
};

}  // namespace

namespace detail {
const KernelTable* avx2_table() { return &kAvx2; }
}  // namespace detail

}  // namespace cfcohort::kernels
