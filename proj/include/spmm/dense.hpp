#pragma once

#include "spmm/common.hpp"

#include <cstring>
#include <random>
#include <vector>

namespace spmm {

/// Row-major dense matrix of 32-bit reals. Element (r, c) lives at byte
/// offset 4 * (r * n_cols + c) from the array base; the execution engines
/// place the base at an address that is a multiple of base_alignment.
struct DenseMatrix {
  u32 n_rows = 0;
  u32 n_cols = 0;
  std::vector<float> data;
  u32 base_alignment = 128;  // power of two

  DenseMatrix() = default;
  DenseMatrix(u32 rows, u32 cols, float fill = 0.0f)
      : n_rows(rows), n_cols(cols), data(static_cast<size_t>(rows) * cols, fill) {}

  float& at(u32 r, u32 c) { return data[static_cast<size_t>(r) * n_cols + c]; }
  float at(u32 r, u32 c) const { return data[static_cast<size_t>(r) * n_cols + c]; }

  size_t size() const { return data.size(); }

  bool same_shape(const DenseMatrix& o) const {
    return n_rows == o.n_rows && n_cols == o.n_cols;
  }

  bool bitwise_equal(const DenseMatrix& o) const {
    return same_shape(o) &&
           (data.empty() ||
            std::memcmp(data.data(), o.data.data(), data.size() * sizeof(float)) == 0);
  }
};

inline void check_dense_valid(const DenseMatrix& m) {
  if (m.data.size() != static_cast<size_t>(m.n_rows) * m.n_cols)
    throw Error("dense matrix: data length does not match n_rows * n_cols");
  if (m.base_alignment == 0 || (m.base_alignment & (m.base_alignment - 1)) != 0 ||
      m.base_alignment > 4096)
    throw Error("dense matrix: base_alignment must be a power of two <= 4096");
}

/// Deterministic pseudo-random fill in [-1, 1). The mapping from RNG output
/// to float is exact integer arithmetic, so results match bit-for-bit across
/// platforms for a fixed seed.
inline DenseMatrix make_random_dense(u32 rows, u32 cols, u64 seed) {
  DenseMatrix m(rows, cols);
  std::mt19937_64 rng(seed);
  for (auto& x : m.data) {
    const u32 bits = static_cast<u32>(rng() >> 40);  // 24 bits
    x = static_cast<float>(bits) * 0x1p-23f - 1.0f;
  }
  return m;
}

/// FNV-1a over the raw element bytes; used as the cross-run output checksum.
inline u64 checksum(const DenseMatrix& m) {
  u64 h = 1469598103934665603ull;
  const auto* p = reinterpret_cast<const unsigned char*>(m.data.data());
  const size_t n = m.data.size() * sizeof(float);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  h ^= (static_cast<u64>(m.n_rows) << 32) ^ m.n_cols;
  return h;
}

}  // namespace spmm
