#pragma once

#include "spmm/common.hpp"
#include "spmm/csr.hpp"
#include "spmm/matrix_market.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace spmm {

// Binary CSR cache: magic "CSR1", then little-endian u64 n_rows, n_cols, nnz,
// then row_ptr as u32, col_ind as u32, vals as f32, in that order.

namespace detail {

inline void put_u64_le(std::ostream& out, u64 v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_u32_le(std::ostream& out, u32 v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u64_le(std::istream& in, u64& v) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

inline bool get_u32_le(std::istream& in, u32& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return true;
}

}  // namespace detail

inline void write_csr_cache(std::ostream& out, const CsrMatrix& m) {
  out.write("CSR1", 4);
  detail::put_u64_le(out, m.n_rows);
  detail::put_u64_le(out, m.n_cols);
  detail::put_u64_le(out, m.nnz());
  for (u32 v : m.row_ptr) detail::put_u32_le(out, v);
  for (u32 v : m.col_ind) detail::put_u32_le(out, v);
  for (float f : m.vals) {
    u32 bits;
    std::memcpy(&bits, &f, 4);
    detail::put_u32_le(out, bits);
  }
  if (!out) throw Error("csr cache: write failed");
}

inline CsrMatrix read_csr_cache(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CSR1", 4) != 0)
    throw Error("csr cache: bad magic (expected CSR1)");
  u64 rows, cols, nnz;
  if (!detail::get_u64_le(in, rows) || !detail::get_u64_le(in, cols) ||
      !detail::get_u64_le(in, nnz))
    throw Error("csr cache: truncated header");
  if (rows > 0xffffffffull || cols > 0xffffffffull || nnz > 0xffffffffull)
    throw Error("csr cache: dimensions exceed 32-bit range");

  CsrMatrix m(static_cast<u32>(rows), static_cast<u32>(cols));
  m.row_ptr.resize(rows + 1);
  m.col_ind.resize(nnz);
  m.vals.resize(nnz);
  for (auto& v : m.row_ptr)
    if (!detail::get_u32_le(in, v)) throw Error("csr cache: truncated row_ptr");
  for (auto& v : m.col_ind)
    if (!detail::get_u32_le(in, v)) throw Error("csr cache: truncated col_ind");
  for (auto& f : m.vals) {
    u32 bits;
    if (!detail::get_u32_le(in, bits)) throw Error("csr cache: truncated vals");
    std::memcpy(&f, &bits, 4);
  }
  return m;
}

inline void save_csr_cache(const std::filesystem::path& path, const CsrMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_csr_cache(out, m);
}

/// Loads a matrix by extension: .mtx parses Matrix Market (canonicalized with
/// duplicate summation), .csr reads the binary cache. Both paths validate.
inline CsrMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");

  CsrMatrix m;
  const auto ext = path.extension().string();
  if (ext == ".mtx") {
    m = from_coo(parse_matrix_market(in), DedupPolicy::Sum);
  } else if (ext == ".csr") {
    m = read_csr_cache(in);
  } else {
    throw Error("unknown matrix extension '" + ext + "' (expected .mtx or .csr)");
  }
  require_canonical(m, "load_matrix");
  return m;
}

}  // namespace spmm
