#pragma once

// Row-wise dense kernels used by the brute-force oracle, the normal-cone
// geometry and the kernel Gram builder. Every kernel has a scalar reference
// and, when the target supports it, an AVX2/FMA variant picked at runtime.

#include <cstddef>
#include <span>

namespace perturbopt::simd {

enum class Isa { Scalar, Avx2 };

/// Instruction set used by the dispatching entry points. Resolved on first
/// use from the CPU; `PERTURBOPT_SIMD=scalar` in the environment pins the
/// scalar reference.
Isa active_isa();

/// Overrides the dispatch target. Requesting Avx2 on a CPU without it is
/// ignored. Intended for equivalence tests and benchmarks.
void force_isa(Isa isa);

bool avx2_available();

const char* isa_name(Isa isa);

// `rows` is row-major with `dim` columns; out.size() rows are processed.

/// out[r] = <rows[r, :], x>
void dot_rows(std::span<const double> rows, std::size_t dim, std::span<const double> x,
              std::span<double> out);

/// out[r] = ||rows[r, :] - x||^2
void sqdist_rows(std::span<const double> rows, std::size_t dim, std::span<const double> x,
                 std::span<double> out);

namespace scalar {
void dot_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
              double* out);
void sqdist_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
                 double* out);
}  // namespace scalar

namespace avx2 {
void dot_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
              double* out);
void sqdist_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
                 double* out);
}  // namespace avx2

}  // namespace perturbopt::simd
