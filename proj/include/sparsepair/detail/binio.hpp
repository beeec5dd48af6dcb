#pragma once

#include <bit>
#include <istream>
#include <ostream>

#include "sparsepair/types.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

namespace sparsepair::detail {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("file truncated");
  return v;
}

inline void write_matrix(std::ostream& os, const RealMatrix& m) {
  write_raw(os, static_cast<std::uint32_t>(m.rows()));
  write_raw(os, static_cast<std::uint32_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double)) * m.size());
}

inline RealMatrix read_matrix(std::istream& is) {
  const auto rows = read_raw<std::uint32_t>(is);
  const auto cols = read_raw<std::uint32_t>(is);
  RealMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double)) * m.size());
  if (!is) throw FormatError("file truncated");
  return m;
}

inline void write_vector(std::ostream& os, const RealVector& v) {
  write_raw(os, static_cast<std::uint32_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double)) * v.size());
}

inline RealVector read_vector(std::istream& is) {
  const auto n = read_raw<std::uint32_t>(is);
  RealVector v(static_cast<Index>(n));
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double)) * v.size());
  if (!is) throw FormatError("file truncated");
  return v;
}

}  // namespace sparsepair::detail
