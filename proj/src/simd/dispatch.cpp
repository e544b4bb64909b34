#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "perturbopt/simd/kernels.hpp"

namespace perturbopt::simd {
namespace {

Isa detect() {
  if (const char* env = std::getenv("PERTURBOPT_SIMD")) {
    if (std::string_view(env) == "scalar") return Isa::Scalar;
  }
  return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

void check_shape(std::size_t rows_size, std::size_t dim, std::size_t x_size,
                 std::size_t n_out) {
  if (x_size != dim || rows_size < n_out * dim) {
    throw std::invalid_argument("simd kernel: row buffer does not match output size");
  }
}

}  // namespace

bool avx2_available() {
#if defined(PERTURBOPT_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_available()) return;
  current().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void dot_rows(std::span<const double> rows, std::size_t dim, std::span<const double> x,
              std::span<double> out) {
  check_shape(rows.size(), dim, x.size(), out.size());
#if defined(PERTURBOPT_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    avx2::dot_rows(rows.data(), out.size(), dim, x.data(), out.data());
    return;
  }
#endif
  scalar::dot_rows(rows.data(), out.size(), dim, x.data(), out.data());
}

void sqdist_rows(std::span<const double> rows, std::size_t dim, std::span<const double> x,
                 std::span<double> out) {
  check_shape(rows.size(), dim, x.size(), out.size());
#if defined(PERTURBOPT_HAVE_AVX2)
  if (active_isa() == Isa::Avx2) {
    avx2::sqdist_rows(rows.data(), out.size(), dim, x.data(), out.data());
    return;
  }
#endif
  scalar::sqdist_rows(rows.data(), out.size(), dim, x.data(), out.data());
}

}  // namespace perturbopt::simd
