#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sparsepair {

// Embeddings are stored one per row; row-major keeps rows contiguous for I/O.
using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;
using ClassId = std::uint32_t;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ZeroRowError : Error {
  using Error::Error;
};
struct EmptyInputError : Error {
  using Error::Error;
};
struct TooFewClassesError : Error {
  using Error::Error;
};
struct NoNegativesError : Error {
  using Error::Error;
};
struct SingletonClassError : Error {
  using Error::Error;
};
struct NoUsableClassesError : Error {
  using Error::Error;
};
struct MPNoValidPositiveError : Error {
  using Error::Error;
};
struct LabelOutOfRangeError : Error {
  using Error::Error;
};
struct ShapeMismatchError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};

}  // namespace sparsepair
