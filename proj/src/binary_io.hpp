// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include "glyco/error.hpp"

// Little-endian scalar and array encoding shared by the model file formats.
namespace glyco::detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated model file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& out, double d) {
  auto bits = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("truncated model file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

/// u32 rows | u32 cols | column-major f64 entries.
inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_u32(out, static_cast<std::uint32_t>(m.rows()));
  write_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) write_f64(out, m.data()[i]);
}

inline Eigen::MatrixXd read_matrix(std::istream& in) {
  auto rows = read_u32(in);
  auto cols = read_u32(in);
  if (static_cast<std::uint64_t>(rows) * cols > (std::uint64_t{1} << 32))
    throw Error("implausible matrix size in model file");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = read_f64(in);
  return m;
}

}  // namespace glyco::detail
