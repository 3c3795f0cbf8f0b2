#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

// Data-parallel inner loops used by the predictor, trainer and discretizer.
//
// Every reduction follows one fixed evaluation order so that all ISA variants
// return bit-identical results:
//   * four partial sums, lane k accumulating elements i with i % 4 == k over the
//     largest multiple-of-4 prefix;
//   * combined as (lane0 + lane1) + (lane2 + lane3);
//   * the remaining 0..3 tail elements added left to right.
// No fused multiply-add is used anywhere (the library builds with
// -ffp-contract=off), so products round exactly as in the scalar code.

namespace cfcohort::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// out[r] = dot(rows + r*dim, w, dim) + bias
  void (*affine_rows)(const double* rows, std::size_t n_rows, std::size_t dim, const double* w, double bias,
                      double* out);
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out[i] = number of edges e with e <= values[i]; edges sorted ascending.
  void (*count_edges_le)(const double* values, std::size_t n, const double* edges, std::size_t n_edges,
                         std::uint32_t* out);
  double (*sum)(const double* x, std::size_t n);
  /// sum of (x[i] - mean)^2
  double (*sum_sq_dev)(const double* x, std::size_t n, double mean);
};

const KernelTable& scalar_table();
bool isa_available(Isa isa);
/// Throws std::invalid_argument when the ISA is not compiled in or not supported by the CPU.
const KernelTable& table_for(Isa isa);

/// The table used by the library. Chosen once at first use: the widest ISA the
/// CPU supports, unless CFCOHORT_ISA=scalar|avx2|neon is set in the environment.
const KernelTable& active();
/// Override the active table (tests and benchmarks).
void set_active(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void affine_rows(std::span<const double> rows, std::size_t dim, std::span<const double> w, double bias,
                        std::span<double> out) {
  active().affine_rows(rows.data(), out.size(), dim, w.data(), bias, out.data());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void count_edges_le(std::span<const double> values, std::span<const double> edges,
                           std::span<std::uint32_t> out) {
  active().count_edges_le(values.data(), values.size(), edges.data(), edges.size(), out.data());
}
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline double sum_sq_dev(std::span<const double> x, double mean) {
  return active().sum_sq_dev(x.data(), x.size(), mean);
}

namespace detail {
const KernelTable* avx2_table();  // nullptr when not compiled in
const KernelTable* neon_table();
}  // namespace detail

}  // namespace cfcohort::kernels
