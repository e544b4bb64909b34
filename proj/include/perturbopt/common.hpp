#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace perturbopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Largest vertex set the oracle module will enumerate.
inline constexpr std::size_t kEnumerationCap = 10'000;

/// Absolute tolerance on <y, theta> gaps below which two vertices tie.
inline constexpr double kTieTolerance = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when an exact geometric quantity is requested on a polytope whose
/// vertex set exceeds the enumeration cap.
class EnumerationUnavailable : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace perturbopt
