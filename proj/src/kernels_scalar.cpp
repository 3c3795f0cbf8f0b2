#include "cfcohort/kernels.hpp"

namespace cfcohort::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    acc[0] += a[i] * b[i];
    acc[1] += a[i + 1] * b[i + 1];
    acc[2] += a[i + 2] * b[i + 2];
    acc[3] += a[i + 3] * b[i + 3];
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (std::size_t i = body; i < n; ++i) s += a[i] * b[i];
  return s;
}

void affine_rows_scalar(const double* rows, std::size_t n_rows, std::size_t dim, const double* w, double bias,
                        double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = dot_scalar(rows + r * dim, w, dim) + bias;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void count_edges_le_scalar(const double* values, std::size_t n, const double* edges, std::size_t n_edges,
                           std::uint32_t* out) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t c = 0;
    for (std::size_t e = 0; e < n_edges; ++e) c += edges[e] <= values[i] ? 1u : 0u;
    out[i] = c;
  }
}

double sum_scalar(const double* x, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    acc[0] += x[i];
    acc[1] += x[i + 1];
    acc[2] += x[i + 2];
    acc[3] += x[i + 3];
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (std::size_t i = body; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev_scalar(const double* x, std::size_t n, double mean) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t body = n - n % 4;
  for (std::size_t i = 0; i < body; i += 4) {
    for (std::size_t k = 0; k < 4; ++k) {
      const double d = x[i + k] - mean;
      acc[k] += d * d;
    }
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (std::size_t i = body; i < n; ++i) {
    const double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

constexpr KernelTable kScalar{
    Isa::Scalar, dot_scalar, affine_rows_scalar, axpy_scalar, count_edges_le_scalar, sum_scalar, sum_sq_dev_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace cfcohort::kernels
