#include "perturbopt/simd/kernels.hpp"

namespace perturbopt::simd::scalar {

void dot_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
              double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* row = rows + r * dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += row[j] * x[j];
    out[r] = acc;
  }
}

void sqdist_rows(const double* rows, std::size_t n_rows, std::size_t dim, const double* x,
                 double* out) {
  for (std::size_t r = 0; r < n_rows; ++r) {
    const double* row = rows + r * dim;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = row[j] - x[j];
      acc += diff * diff;
    }
    out[r] = acc;
  }
}

}  // namespace perturbopt::simd::scalar
