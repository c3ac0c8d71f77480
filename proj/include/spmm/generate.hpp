#pragma once

#include "spmm/common.hpp"
#include "spmm/csr.hpp"

#include <random>
#include <unordered_set>
#include <vector>

namespace spmm {

/// Synthetic square random graph: exactly nnz_target distinct (row, col)
/// positions drawn uniformly, all values 1.0.
struct GraphGenSpec {
  u32 n_rows = 0;
  u64 nnz_target = 0;
  u64 seed = 0;
  bool self_loops = false;

  u64 max_feasible_nnz() const {
    const u64 m = n_rows;
    return self_loops ? m * m : m * (m - 1);
  }
};

namespace detail {

// Fixed-point multiply keeps the draw independent of library distribution
// internals, so outputs are reproducible across standard libraries.
inline u32 bounded(std::mt19937_64& rng, u32 bound) {
  return static_cast<u32>((static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

}  // namespace detail

/// Uniform sampling without replacement via seeded rejection. Deterministic
/// for a fixed spec: accepted positions are recorded in draw order and
/// canonicalized through from_coo.
inline CsrMatrix gen_uniform_random(const GraphGenSpec& spec) {
  if (spec.n_rows == 0) {
    if (spec.nnz_target > 0) throw Error("graph gen: nnz_target > 0 with zero rows");
    return CsrMatrix(0, 0);
  }
  if (spec.nnz_target > spec.max_feasible_nnz())
    throw Error("graph gen: nnz_target " + std::to_string(spec.nnz_target) +
                " exceeds feasible maximum " + std::to_string(spec.max_feasible_nnz()) +
                (spec.self_loops ? "" : " (self loops excluded)"));

  std::mt19937_64 rng(spec.seed);
  std::unordered_set<u64> taken;
  taken.reserve(spec.nnz_target * 2);
  std::vector<CooEntry> accepted;
  accepted.reserve(spec.nnz_target);

  const u64 m = spec.n_rows;
  while (accepted.size() < spec.nnz_target) {
    const u32 r = detail::bounded(rng, spec.n_rows);
    const u32 c = detail::bounded(rng, spec.n_rows);
    if (!spec.self_loops && r == c) continue;
    const u64 key = static_cast<u64>(r) * m + c;
    if (taken.insert(key).second) accepted.push_back({r, c, 1.0f});
  }

  CooEntries coo;
  coo.n_rows = spec.n_rows;
  coo.n_cols = spec.n_rows;
  coo.entries = std::move(accepted);
  return from_coo(coo, DedupPolicy::Sum);
}

/// Replaces the unit values of a generated matrix with deterministic nonzero
/// pseudo-random values; handy for exercising real multiplication in tests.
inline void randomize_values(CsrMatrix& m, u64 seed) {
  std::mt19937_64 rng(seed);
  for (auto& v : m.vals) {
    const u32 bits = static_cast<u32>(rng() >> 44) + 1;  // 1 .. 2^20, never zero
    v = static_cast<float>(bits) * 0x1p-19f;             // (0, 2]
    if (rng() & 1) v = -v;
  }
}

}  // namespace spmm
