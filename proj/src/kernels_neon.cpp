// AArch64 Advanced SIMD variant. Two float64x2 registers hold lanes {0,1} and
// {2,3} so the reduction order matches the scalar reference.
#include <arm_neon.h>

#include "cfcohort/kernels.hpp"

namespace cfcohort::kernels {

namespace {

inline double reduce_lanes(float64x2_t lo, float64x2_t hi) {
  return (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) + (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0), hi = vdupq_n_f64(0.0);
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double s = reduce_lanes(lo, hi);
  for (std::size_t i = body; i < n; ++i) s += a[i] * b[i];
  return s;
}

void affine_rows_neon(const double* rows, std::size_t n_rows, std::size_t dim, const double* w, double bias,
                      double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot_neon(rows + r * dim, w, dim) + bias;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const std::size_t body = n - n % 2;
  for (std::size_t i = 0; i < body; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (std::size_t i = body; i < n; ++i) y[i] += alpha * x[i];
}

void count_edges_le_neon(const double* values, std::size_t n, const double* edges, std::size_t n_edges,
                         std::uint32_t* out) {
  const std::size_t body = n - n % 2;
  for (std::size_t i = 0; i < body; i += 2) {
    const float64x2_t v = vld1q_f64(values + i);
    uint64x2_t count = vdupq_n_u64(0);
    for (std::size_t e = 0; e < n_edges; ++e) {
      const uint64x2_t le = vcleq_f64(vdupq_n_f64(edges[e]), v);
      count = vsubq_u64(count, le);  // all-ones mask == -1
    }
    out[i] = static_cast<std::uint32_t>(vgetq_lane_u64(count, 0));
    out[i + 1] = static_cast<std::uint32_t>(vgetq_lane_u64(count, 1));
  }
  for (std::size_t i = body; i < n; ++i) {
    std::uint32_t c = 0;
    for (std::size_t e = 0; e < n_edges; ++e) c += edges[e] <= values[i] ? 1u : 0u;
    out[i] = c;
  }
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0), hi = vdupq_n_f64(0.0);
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    lo = vaddq_f64(lo, vld1q_f64(x + i));
    hi = vaddq_f64(hi, vld1q_f64(x + i + 2));
  }
  double s = reduce_lanes(lo, hi);
  for (std::size_t i = body; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev_neon(const double* x, std::size_t n, double mean) {
  const float64x2_t vm = vdupq_n_f64(mean);
  float64x2_t lo = vdupq_n_f64(0.0), hi = vdupq_n_f64(0.0);
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(x + i), vm);
    const float64x2_t d1 = vsubq_f64(vld1q_f64(x + i + 2), vm);
    lo = vaddq_f64(lo, vmulq_f64(d0, d0));
    hi = vaddq_f64(hi, vmulq_f64(d1, d1));
  }
  double s = reduce_lanes(lo, hi);
  for (std::size_t i = body; i < n; ++i) {
    const double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

constexpr KernelTable kNeon{
    Isa::Neon, dot_neon, affine_rows_neon, axpy_neon, count_edges_le_neon, sum_neon, sum_sq_dev_neon,
};

}  // namespace

namespace detail {
const KernelTable* neon_table() { return &kNeon; }
}  // namespace detail

}  // namespace cfcohort::kernels
