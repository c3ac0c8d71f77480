#pragma once

#include "spmm/common.hpp"
#include "spmm/csr.hpp"
#include "spmm/dense.hpp"
#include "spmm/reduce_op.hpp"

#include <array>
#include <string>

namespace spmm {

// =============================================================================
// Kernel programs.
//
// The three SpMM kernels are expressed as warp-level procedures over an
// abstract memory interface `Mem`. A warp of warp_size lanes executes in
// lockstep; loop trip counts depend only on the sparse row shared by the
// warp, and boundary conditions appear purely as lane masks. Every global
// access goes through `Mem`, which either dereferences directly (native
// backend) or additionally meters transactions (simulator backend). Both
// backends therefore run the identical arithmetic sequence and produce
// bitwise-identical output.
//
// Mem interface (T is u32 or float; IdxFn maps lane -> element index):
//   T    load_uniform<T>(ArrayId, u64 elem, LaneMask active);
//   void load_lanes<T>(ArrayId, LaneMask active, IdxFn, T* out);
//   void store_lanes<T>(ArrayId, LaneMask active, IdxFn, const T* src);
//   void shared_store(u32 n);   // staging-buffer write instructions
//   void shared_load(u32 n);    // staging-buffer read instructions
// =============================================================================

inline constexpr u32 kMaxWarpSize = 64;
inline constexpr u32 kMaxCoarsening = 8;

using LaneMask = u64;

inline LaneMask prefix_mask(u32 count) {
  return count >= 64 ? ~0ull : ((1ull << count) - 1);
}
inline bool lane_on(LaneMask m, u32 lane) { return (m >> lane) & 1; }
inline u32 mask_count(LaneMask m) { return static_cast<u32>(__builtin_popcountll(m)); }

enum class KernelKind : u8 { Naive, Crc, CrcCwm };

/// Which kernel to run; cf is the coarsening factor (outputs per thread) and
/// is meaningful only for CrcCwm.
struct KernelVariant {
  KernelKind kind = KernelKind::Naive;
  u32 cf = 1;

  static KernelVariant naive() { return {KernelKind::Naive, 1}; }
  static KernelVariant crc() { return {KernelKind::Crc, 1}; }
  static KernelVariant crc_cwm(u32 cf) { return {KernelKind::CrcCwm, cf}; }

  u32 cf_effective() const { return kind == KernelKind::CrcCwm ? cf : 1; }

  std::string name() const {
    switch (kind) {
      case KernelKind::Naive: return "naive";
      case KernelKind::Crc: return "crc";
      case KernelKind::CrcCwm: return "crc-cwm";
    }
    return "?";
  }

  bool operator==(const KernelVariant&) const = default;
};

inline KernelVariant variant_by_name(const std::string& name, u32 cf = 2) {
  if (name == "naive") return KernelVariant::naive();
  if (name == "crc") return KernelVariant::crc();
  if (name == "crc-cwm") return KernelVariant::crc_cwm(cf);
  throw Error("unknown kernel variant '" + name + "' (naive, crc, crc-cwm)");
}

struct KernelConfig {
  u32 warp_size = 32;
  u32 warps_per_block = 8;
  KernelVariant variant = KernelVariant::naive();
};

inline void check_config(const KernelConfig& cfg) {
  const u32 ws = cfg.warp_size;
  if (ws < 4 || ws > kMaxWarpSize || (ws & (ws - 1)) != 0)
    throw Error("warp_size must be a power of two in [4, " + std::to_string(kMaxWarpSize) + "]");
  if (cfg.warps_per_block < 1) throw Error("warps_per_block must be >= 1");
  if (cfg.variant.kind == KernelKind::CrcCwm) {
    const u32 cf = cfg.variant.cf;
    if (cf != 2 && cf != 4 && cf != 8) throw Error("coarsening factor must be 2, 4 or 8");
  }
}

/// N <= warp_size keeps the plain two-phase kernel; wider outputs get the
/// merged-warp kernel with coarsening factor 2, the best overall default.
inline KernelVariant select_variant(u32 n) {
  return n <= 32 ? KernelVariant::crc() : KernelVariant::crc_cwm(2);
}

// -----------------------------------------------------------------------------
// Launch geometry: warps are assigned (row, column-tile) pairs row-major.
// A warp covers warp_size * cf_effective consecutive output columns; lane
// `l` of a CrcCwm warp owns columns tile_base + l + k * warp_size for
// k in [0, cf), so each individual B access stays a unit-stride warp load.
// -----------------------------------------------------------------------------

struct LaunchGeometry {
  u64 grid_rows = 0;
  u64 grid_col_tiles = 0;
  u32 threads_per_block = 0;
  u32 warp_size = 32;
  u32 cf_effective = 1;
  u32 warps_per_block = 8;

  u64 total_warps() const { return grid_rows * grid_col_tiles; }
  u64 total_blocks() const {
    return (total_warps() + warps_per_block - 1) / warps_per_block;
  }
  u32 warp_row(u64 warp_id) const { return static_cast<u32>(warp_id / grid_col_tiles); }
  u32 warp_tile(u64 warp_id) const { return static_cast<u32>(warp_id % grid_col_tiles); }
  u32 tile_width() const { return warp_size * cf_effective; }
  u32 warp_col_base(u64 warp_id) const { return warp_tile(warp_id) * tile_width(); }
};

inline LaunchGeometry launch_geometry(u32 m, u32 n, const KernelConfig& cfg) {
  check_config(cfg);
  if (n < 1) throw Error("launch geometry requires N >= 1");
  LaunchGeometry g;
  g.warp_size = cfg.warp_size;
  g.cf_effective = cfg.variant.cf_effective();
  g.warps_per_block = cfg.warps_per_block;
  g.grid_rows = m;
  g.grid_col_tiles = (n + g.tile_width() - 1) / g.tile_width();
  g.threads_per_block = cfg.warp_size * cfg.warps_per_block;
  return g;
}

/// Per-thread identity within a launch; accumulator storage lives in the
/// warp-level programs below (one slot per owned column).
struct ThreadCtx {
  u32 row = 0;
  u32 col = 0;  // first owned output column
  u32 lane_id = 0;
  u32 warp_in_block = 0;
  u64 warp_global_id = 0;
  bool active = false;  // col < N
};

inline ThreadCtx thread_ctx(const LaunchGeometry& g, u32 n, u64 warp_id, u32 lane) {
  ThreadCtx t;
  t.row = g.warp_row(warp_id);
  t.col = g.warp_col_base(warp_id) + lane;
  t.lane_id = lane;
  t.warp_in_block = static_cast<u32>(warp_id % g.warps_per_block);
  t.warp_global_id = warp_id;
  t.active = t.col < n;
  return t;
}

/// Per-warp staging buffers for one tile of sparse row data. Written only by
/// the owning warp in phase 1, read after the warp-level sync in phase 2.
struct SharedTile {
  std::array<u32, kMaxWarpSize> cols{};
  std::array<float, kMaxWarpSize> vals{};
};

/// Fault injection for negative tests: SkipTail drops each row's final
/// sparse tile (or the whole row when it has a single tile).
enum class FaultMode : u8 { None, SkipTail };

struct ExecOptions {
  FaultMode fault = FaultMode::None;
};

namespace detail {

inline u32 faulted_row_end(u32 row_start, u32 row_end, u32 ws, FaultMode fault) {
  if (fault != FaultMode::SkipTail || row_end <= row_start) return row_end;
  const u32 len = row_end - row_start;
  const u32 tiles = (len + ws - 1) / ws;
  return row_start + (tiles - 1) * ws;
}

}  // namespace detail

struct WarpWork {
  u32 row = 0;
  u32 col_base = 0;
  u64 warp_global_id = 0;
};

// -----------------------------------------------------------------------------
// Kernel 1: straightforward row-parallel SpMM. The warp walks the row's
// nonzeros one by one; column index and value reads are warp-uniform
// (broadcast) accesses, B reads are unit-stride across lanes.
// -----------------------------------------------------------------------------
template <class Mem>
void kernel_naive(Mem& mem, const WarpWork& w, u32 n, u32 ws, const ReduceOp& op,
                  FaultMode fault = FaultMode::None) {
  const u32 active_cols = n - w.col_base < ws ? n - w.col_base : ws;
  const LaneMask active = prefix_mask(active_cols);

  const u32 row_start = mem.template load_uniform<u32>(ArrayId::RowPtr, w.row, active);
  const u32 row_end = mem.template load_uniform<u32>(ArrayId::RowPtr, w.row + 1, active);
  const u32 end = detail::faulted_row_end(row_start, row_end, ws, fault);

  std::array<float, kMaxWarpSize> acc;
  acc.fill(op.init);

  std::array<float, kMaxWarpSize> b_row;
  for (u32 p = row_start; p < end; ++p) {
    const u32 k = mem.template load_uniform<u32>(ArrayId::ColInd, p, active);
    const float v = mem.template load_uniform<float>(ArrayId::Val, p, active);
    mem.template load_lanes<float>(
        ArrayId::B, active, [&](u32 lane) { return static_cast<u64>(k) * n + w.col_base + lane; },
        b_row.data());
    for (u32 lane = 0; lane < active_cols; ++lane)
      acc[lane] = op.fold(acc[lane], v * b_row[lane]);
  }

  mem.template store_lanes<float>(
      ArrayId::C, active, [&](u32 lane) { return static_cast<u64>(w.row) * n + w.col_base + lane; },
      acc.data());
}

// -----------------------------------------------------------------------------
// Kernel 2: coalesced row caching. Two phases per tile of warp_size nonzeros:
// phase 1 stages column indices and values into the warp's SharedTile with
// one unit-stride load per array (lanes past the row end are masked off);
// phase 2 consumes the staged elements sequentially so B reads stay row-
// uniform. Numerical result and accumulation order match kernel_naive.
// Lanes whose output column exceeds N still help with phase-1 staging.
// -----------------------------------------------------------------------------
template <class Mem>
void kernel_crc(Mem& mem, const WarpWork& w, u32 n, u32 ws, const ReduceOp& op,
                FaultMode fault = FaultMode::None) {
  const u32 active_cols = n - w.col_base < ws ? n - w.col_base : ws;
  const LaneMask col_mask = prefix_mask(active_cols);
  const LaneMask full = prefix_mask(ws);

  const u32 row_start = mem.template load_uniform<u32>(ArrayId::RowPtr, w.row, full);
  const u32 row_end = mem.template load_uniform<u32>(ArrayId::RowPtr, w.row + 1, full);
  const u32 end = detail::faulted_row_end(row_start, row_end, ws, fault);

  std::array<float, kMaxWarpSize> acc;
  acc.fill(op.init);

  SharedTile tile;
  std::array<float, kMaxWarpSize> b_row;
  for (u32 ptr = row_start; ptr < end; ptr += ws) {
    const u32 tile_n = end - ptr < ws ? end - ptr : ws;
    const LaneMask load_mask = prefix_mask(tile_n);

    mem.template load_lanes<u32>(
        ArrayId::ColInd, load_mask, [&](u32 lane) { return static_cast<u64>(ptr) + lane; },
        tile.cols.data());
    mem.template load_lanes<float>(
        ArrayId::Val, load_mask, [&](u32 lane) { return static_cast<u64>(ptr) + lane; },
        tile.vals.data());
    mem.shared_store(2);
    // warp-level sync separates the phases

    for (u32 kk = 0; kk < tile_n; ++kk) {
      const u32 k = tile.cols[kk];
      const float v = tile.vals[kk];
      mem.shared_load(2);
      mem.template load_lanes<float>(
          ArrayId::B, col_mask,
          [&](u32 lane) { return static_cast<u64>(k) * n + w.col_base + lane; }, b_row.data());
      for (u32 lane = 0; lane < active_cols; ++lane)
        acc[lane] = op.fold(acc[lane], v * b_row[lane]);
    }
  }

  mem.template store_lanes<float>(
      ArrayId::C, col_mask,
      [&](u32 lane) { return static_cast<u64>(w.row) * n + w.col_base + lane; }, acc.data());
}

// -----------------------------------------------------------------------------
// Kernel 3: row caching plus coarse-grained warp merging. Each lane owns cf
// output columns strided by warp_size, so a staged sparse element feeds cf
// accumulators and the B loads for different column slices are independent
// instructions. Sparse-row traffic drops by ~cf while per-column arithmetic
// stays identical to kernel_naive.
// -----------------------------------------------------------------------------
template <class Mem>
void kernel_crc_cwm(Mem& mem, const WarpWork& w, u32 n, u32 ws, u32 cf, const ReduceOp& op,
                    FaultMode fault = FaultMode::None) {
  const LaneMask full = prefix_mask(ws);

  // active lane count for column slice c: columns col_base + c*ws + lane
  std::array<u32, kMaxCoarsening> slice_cols{};
  for (u32 c = 0; c < cf; ++c) {
    const u32 base = w.col_base + c * ws;
    slice_cols[c] = base >= n ? 0 : (n - base < ws ? n - base : ws);
  }

  const u32 row_start = mem.template load_uniform<u32>(ArrayId::RowPtr, w.row, full);
  const u32 row_end = mem.template load_uniform<u32>(ArrayId::RowPtr, w.row + 1, full);
  const u32 end = detail::faulted_row_end(row_start, row_end, ws, fault);

  std::array<std::array<float, kMaxWarpSize>, kMaxCoarsening> acc;
  for (u32 c = 0; c < cf; ++c) acc[c].fill(op.init);

  SharedTile tile;
  std::array<float, kMaxWarpSize> b_row;
  for (u32 ptr = row_start; ptr < end; ptr += ws) {
    const u32 tile_n = end - ptr < ws ? end - ptr : ws;
    const LaneMask load_mask = prefix_mask(tile_n);

    mem.template load_lanes<u32>(
        ArrayId::ColInd, load_mask, [&](u32 lane) { return static_cast<u64>(ptr) + lane; },
        tile.cols.data());
    mem.template load_lanes<float>(
        ArrayId::Val, load_mask, [&](u32 lane) { return static_cast<u64>(ptr) + lane; },
        tile.vals.data());
    mem.shared_store(2);

    for (u32 kk = 0; kk < tile_n; ++kk) {
      const u32 k = tile.cols[kk];
      const float v = tile.vals[kk];
      mem.shared_load(2);
      for (u32 c = 0; c < cf; ++c) {
        if (slice_cols[c] == 0) continue;
        const u32 col0 = w.col_base + c * ws;
        mem.template load_lanes<float>(
            ArrayId::B, prefix_mask(slice_cols[c]),
            [&](u32 lane) { return static_cast<u64>(k) * n + col0 + lane; }, b_row.data());
        for (u32 lane = 0; lane < slice_cols[c]; ++lane)
          acc[c][lane] = op.fold(acc[c][lane], v * b_row[lane]);
      }
    }
  }

  for (u32 c = 0; c < cf; ++c) {
    if (slice_cols[c] == 0) continue;
    const u32 col0 = w.col_base + c * ws;
    mem.template store_lanes<float>(
        ArrayId::C, prefix_mask(slice_cols[c]),
        [&](u32 lane) { return static_cast<u64>(w.row) * n + col0 + lane; }, acc[c].data());
  }
}

/// Runs one warp of the launch under `cfg`, dispatching to the variant.
template <class Mem>
void run_warp(Mem& mem, const LaunchGeometry& g, const KernelConfig& cfg, u32 n,
              const ReduceOp& op, u64 warp_id, FaultMode fault = FaultMode::None) {
  WarpWork w{g.warp_row(warp_id), g.warp_col_base(warp_id), warp_id};
  switch (cfg.variant.kind) {
    case KernelKind::Naive:
      kernel_naive(mem, w, n, cfg.warp_size, op, fault);
      break;
    case KernelKind::Crc:
      kernel_crc(mem, w, n, cfg.warp_size, op, fault);
      break;
    case KernelKind::CrcCwm:
      kernel_crc_cwm(mem, w, n, cfg.warp_size, cfg.variant.cf, op, fault);
      break;
  }
}

}  // namespace spmm
