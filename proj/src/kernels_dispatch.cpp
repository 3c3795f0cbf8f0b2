#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "cfcohort/kernels.hpp"

namespace cfcohort::kernels {

#if !defined(CFCOHORT_HAVE_AVX2)
namespace detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace detail
#endif
#if !defined(CFCOHORT_HAVE_NEON)
namespace detail {
const KernelTable* neon_table() { return nullptr; }
}  // namespace detail
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(CFCOHORT_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return detail::avx2_table() != nullptr && __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::Neon:
      // Advanced SIMD is mandatory on AArch64.
      return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  if (!isa_available(isa)) throw std::invalid_argument("kernel ISA not available: " + std::string(to_string(isa)));
  switch (isa) {
    case Isa::Avx2: return *detail::avx2_table();
    case Isa::Neon: return *detail::neon_table();
    case Isa::Scalar: break;
  }
  return scalar_table();
}

namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("CFCOHORT_ISA")) {
    const std::string want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
      if (want == to_string(isa) && isa_available(isa)) return &table_for(isa);
  }
  if (isa_available(Isa::Avx2)) return detail::avx2_table();
  if (isa_available(Isa::Neon)) return detail::neon_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) { slot().store(&table_for(isa), std::memory_order_release); }

}  // namespace cfcohort::kernels
