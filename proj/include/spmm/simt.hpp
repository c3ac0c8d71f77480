#pragma once

#include "spmm/common.hpp"
#include "spmm/csr.hpp"
#include "spmm/dense.hpp"
#include "spmm/kernel.hpp"
#include "spmm/reduce_op.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <future>
#include <ostream>
#include <thread>
#include <vector>

namespace spmm {

// =============================================================================
// Deterministic lockstep-warp executor with a global-memory coalescing model.
//
// Memory model contract:
//   - A transaction moves one 32-byte aligned segment. A warp access counts
//     the distinct segments covered by the union of its active lanes' 4-byte
//     ranges.
//   - Requested bytes are the size of that union: each distinct byte counts
//     once no matter how many lanes touch it. gld_efficiency is requested
//     over transferred (32 bytes per transaction), load side only.
//   - Arrays live at non-overlapping virtual base addresses aligned far
//     beyond any base_alignment, so metrics do not depend on host allocator
//     behavior. Element (array, i) sits at base(array) + 4*i.
//   - No cache model, no shared-memory bank model; staging-buffer traffic is
//     counted as plain instruction counts.
// =============================================================================

inline constexpr u64 kTransactionBytes = 32;

inline constexpr u64 array_base(ArrayId id) {
  return (static_cast<u64>(id) + 1) << 40;  // 128-byte aligned by construction
}

/// One warp-wide global access: the active lanes' byte addresses (4-byte
/// element width), packed in lane order.
struct WarpAccess {
  ArrayId array = ArrayId::B;
  AccessKind kind = AccessKind::Load;
  u32 width = 4;
  u32 count = 0;
  std::array<u64, kMaxWarpSize> addr{};
};

struct CoalesceResult {
  u64 transactions = 0;
  u64 requested_bytes = 0;
  bool operator==(const CoalesceResult&) const = default;
};

/// Counts 32-byte segments and unique requested bytes for one warp access.
/// Zero active lanes cost nothing.
inline CoalesceResult coalesce(const WarpAccess& a) {
  if (a.count == 0) return {};
  const u64* addrs = a.addr.data();
  std::array<u64, kMaxWarpSize> sorted;
  bool ascending = true;
  for (u32 i = 1; i < a.count; ++i)
    if (a.addr[i] < a.addr[i - 1]) {
      ascending = false;
      break;
    }
  if (!ascending) {
    std::copy(a.addr.begin(), a.addr.begin() + a.count, sorted.begin());
    std::sort(sorted.begin(), sorted.begin() + a.count);
    addrs = sorted.data();
  }

  const u64 w = a.width;
  CoalesceResult r;
  u64 cover_end = 0;   // first byte not yet covered (valid after first lane)
  bool any = false;
  u64 last_seg = 0;
  for (u32 i = 0; i < a.count; ++i) {
    const u64 lo = addrs[i];
    const u64 hi = lo + w;  // exclusive
    const u64 seg_lo = lo / kTransactionBytes;
    const u64 seg_hi = (hi - 1) / kTransactionBytes;
    if (!any) {
      r.requested_bytes += w;
      r.transactions += seg_hi - seg_lo + 1;
      cover_end = hi;
      last_seg = seg_hi;
      any = true;
      continue;
    }
    if (hi > cover_end) {
      r.requested_bytes += hi - std::max(lo, cover_end);
      cover_end = hi;
    }
    if (seg_hi > last_seg) {
      r.transactions += seg_hi - std::max(seg_lo, last_seg + 1) + 1;
      last_seg = seg_hi;
    }
  }
  return r;
}

// -----------------------------------------------------------------------------
// Metrics
// -----------------------------------------------------------------------------

struct ArrayCounters {
  u64 transactions = 0;
  u64 requested_bytes = 0;
  u64 transferred_bytes = 0;
  bool operator==(const ArrayCounters&) const = default;
};

struct SimMetrics {
  u64 gld_transactions = 0;
  u64 gst_transactions = 0;
  u64 requested_load_bytes = 0;
  u64 transferred_load_bytes = 0;
  u64 requested_store_bytes = 0;
  u64 transferred_store_bytes = 0;
  std::array<ArrayCounters, kArrayCount> load_by_array{};
  std::array<ArrayCounters, kArrayCount> store_by_array{};
  u64 shared_loads = 0;
  u64 shared_stores = 0;

  double gld_efficiency() const {
    return transferred_load_bytes == 0
               ? 0.0
               : double(requested_load_bytes) / double(transferred_load_bytes);
  }

  const ArrayCounters& loads(ArrayId id) const { return load_by_array[size_t(id)]; }
  const ArrayCounters& stores(ArrayId id) const { return store_by_array[size_t(id)]; }

  u64 sparse_load_transactions() const {
    return loads(ArrayId::ColInd).transactions + loads(ArrayId::Val).transactions;
  }

  void merge(const SimMetrics& o) {
    gld_transactions += o.gld_transactions;
    gst_transactions += o.gst_transactions;
    requested_load_bytes += o.requested_load_bytes;
    transferred_load_bytes += o.transferred_load_bytes;
    requested_store_bytes += o.requested_store_bytes;
    transferred_store_bytes += o.transferred_store_bytes;
    for (int i = 0; i < kArrayCount; ++i) {
      load_by_array[i].transactions += o.load_by_array[i].transactions;
      load_by_array[i].requested_bytes += o.load_by_array[i].requested_bytes;
      load_by_array[i].transferred_bytes += o.load_by_array[i].transferred_bytes;
      store_by_array[i].transactions += o.store_by_array[i].transactions;
      store_by_array[i].requested_bytes += o.store_by_array[i].requested_bytes;
      store_by_array[i].transferred_bytes += o.store_by_array[i].transferred_bytes;
    }
    shared_loads += o.shared_loads;
    shared_stores += o.shared_stores;
  }

  bool operator==(const SimMetrics&) const = default;
};

/// Flat, serializable view of SimMetrics with derived ratios and an internal
/// consistency flag (per-array sums match totals, transferred = 32 * count).
struct MetricsReport {
  SimMetrics metrics;
  double gld_efficiency = 0.0;
  double gst_efficiency = 0.0;
  bool consistent = true;
};

inline MetricsReport metrics_report(const SimMetrics& m) {
  MetricsReport r;
  r.metrics = m;
  r.gld_efficiency = m.gld_efficiency();
  r.gst_efficiency = m.transferred_store_bytes == 0
                         ? 0.0
                         : double(m.requested_store_bytes) / double(m.transferred_store_bytes);
  u64 load_sum = 0, store_sum = 0;
  for (int i = 0; i < kArrayCount; ++i) {
    load_sum += m.load_by_array[i].transactions;
    store_sum += m.store_by_array[i].transactions;
  }
  r.consistent = load_sum == m.gld_transactions && store_sum == m.gst_transactions &&
                 m.transferred_load_bytes == kTransactionBytes * m.gld_transactions &&
                 m.transferred_store_bytes == kTransactionBytes * m.gst_transactions &&
                 r.gld_efficiency <= 1.0 && r.gst_efficiency <= 1.0;
  return r;
}

// -----------------------------------------------------------------------------
// Trace
// -----------------------------------------------------------------------------

struct TraceRecord {
  u64 warp_id = 0;
  ArrayId array = ArrayId::B;
  AccessKind kind = AccessKind::Load;
  u64 segments = 0;
  u64 requested_bytes = 0;
  const u64* lane_addr = nullptr;  // active lanes only, lane order
  u32 lane_count = 0;
};

using TraceSink = std::function<void(const TraceRecord&)>;

/// Line format, one record per access:
///   warp=<id> array=<name> kind=<load|store> segments=<n> requested=<bytes>
/// with an additional ` lanes=<a0,a1,...>` field in verbose mode (decimal
/// absolute byte addresses of the active lanes).
inline TraceSink text_trace_sink(std::ostream& out, bool verbose) {
  return [&out, verbose](const TraceRecord& t) {
    out << "warp=" << t.warp_id << " array=" << array_name(t.array)
        << " kind=" << (t.kind == AccessKind::Load ? "load" : "store")
        << " segments=" << t.segments << " requested=" << t.requested_bytes;
    if (verbose) {
      out << " lanes=";
      for (u32 i = 0; i < t.lane_count; ++i) {
        if (i) out << ',';
        out << t.lane_addr[i];
      }
    }
    out << '\n';
  };
}

// -----------------------------------------------------------------------------
// Metering memory interface
// -----------------------------------------------------------------------------

class SimMem {
 public:
  SimMem(const CsrMatrix& a, const DenseMatrix& b, DenseMatrix& c, SimMetrics& metrics,
         const TraceSink* trace = nullptr)
      : row_ptr_(a.row_ptr.data()),
        col_ind_(a.col_ind.data()),
        vals_(a.vals.data()),
        b_(b.data.data()),
        c_(c.data.data()),
        metrics_(&metrics),
        trace_(trace) {}

  void set_warp(u64 id) { warp_id_ = id; }

  template <class T>
  T load_uniform(ArrayId id, u64 elem, LaneMask active) {
    // All active lanes request the same 4-byte word: one segment, 4 bytes.
    const u64 addr = array_base(id) + 4 * elem;
    count_access(id, AccessKind::Load, 1, 4);
    if (trace_) emit_uniform(id, addr, active, 1, 4);
    return value_at<T>(id, elem);
  }

  template <class T, class IdxFn>
  void load_lanes(ArrayId id, LaneMask active, IdxFn idx, T* out) {
    WarpAccess acc;
    acc.array = id;
    acc.kind = AccessKind::Load;
    LaneMask m = active;
    while (m) {
      const u32 lane = static_cast<u32>(__builtin_ctzll(m));
      m &= m - 1;
      const u64 e = idx(lane);
      out[lane] = value_at<T>(id, e);
      acc.addr[acc.count++] = array_base(id) + 4 * e;
    }
    finish(acc);
  }

  template <class T, class IdxFn>
  void store_lanes(ArrayId id, LaneMask active, IdxFn idx, const T* src) {
    WarpAccess acc;
    acc.array = id;
    acc.kind = AccessKind::Store;
    LaneMask m = active;
    while (m) {
      const u32 lane = static_cast<u32>(__builtin_ctzll(m));
      m &= m - 1;
      const u64 e = idx(lane);
      value_at_mut<T>(id, e) = src[lane];
      acc.addr[acc.count++] = array_base(id) + 4 * e;
    }
    finish(acc);
  }

  void shared_store(u32 n) { metrics_->shared_stores += n; }
  void shared_load(u32 n) { metrics_->shared_loads += n; }

 private:
  template <class T>
  T value_at(ArrayId id, u64 e) const {
    if constexpr (std::is_same_v<T, u32>) {
      return id == ArrayId::RowPtr ? row_ptr_[e] : col_ind_[e];
    } else {
      switch (id) {
        case ArrayId::Val: return vals_[e];
        case ArrayId::B: return b_[e];
        default: return c_[e];
      }
    }
  }

  template <class T>
  T& value_at_mut(ArrayId, u64 e) {
    static_assert(std::is_same_v<T, float>, "only C is writable");
    return c_[e];
  }

  void count_access(ArrayId id, AccessKind kind, u64 transactions, u64 requested) {
    const u64 transferred = transactions * kTransactionBytes;
    if (kind == AccessKind::Load) {
      metrics_->gld_transactions += transactions;
      metrics_->requested_load_bytes += requested;
      metrics_->transferred_load_bytes += transferred;
      auto& a = metrics_->load_by_array[size_t(id)];
      a.transactions += transactions;
      a.requested_bytes += requested;
      a.transferred_bytes += transferred;
    } else {
      metrics_->gst_transactions += transactions;
      metrics_->requested_store_bytes += requested;
      metrics_->transferred_store_bytes += transferred;
      auto& a = metrics_->store_by_array[size_t(id)];
      a.transactions += transactions;
      a.requested_bytes += requested;
      a.transferred_bytes += transferred;
    }
  }

  void finish(const WarpAccess& acc) {
    if (acc.count == 0) return;
    const CoalesceResult r = coalesce(acc);
    count_access(acc.array, acc.kind, r.transactions, r.requested_bytes);
    if (trace_)
      (*trace_)({warp_id_, acc.array, acc.kind, r.transactions, r.requested_bytes,
                 acc.addr.data(), acc.count});
  }

  void emit_uniform(ArrayId id, u64 addr, LaneMask active, u64 segments, u64 requested) {
    std::array<u64, kMaxWarpSize> addrs;
    const u32 n = mask_count(active);
    addrs.fill(addr);
    (*trace_)({warp_id_, id, AccessKind::Load, segments, requested, addrs.data(), n});
  }

  const u32* row_ptr_;
  const u32* col_ind_;
  const float* vals_;
  const float* b_;
  float* c_;
  SimMetrics* metrics_;
  const TraceSink* trace_;
  u64 warp_id_ = 0;
};

// -----------------------------------------------------------------------------
// Kernel execution under the model
// -----------------------------------------------------------------------------

struct SimOptions {
  bool parallel = false;          // evaluate blocks concurrently (same result)
  FaultMode fault = FaultMode::None;
  const TraceSink* trace = nullptr;  // forces sequential evaluation
};

struct SimResult {
  DenseMatrix c;
  SimMetrics metrics;
  LaunchGeometry geometry;
};

inline void check_spmm_inputs(const CsrMatrix& a, const DenseMatrix& b, const char* who) {
  check_dense_valid(b);
  if (a.n_cols != b.n_rows)
    throw Error(std::string(who) + ": dimension mismatch: A is " + std::to_string(a.n_rows) +
                "x" + std::to_string(a.n_cols) + " but B has " + std::to_string(b.n_rows) +
                " rows");
  require_canonical(a, who);
}

inline SimResult run_kernel(const CsrMatrix& a, const DenseMatrix& b, const KernelConfig& cfg,
                            const ReduceOp& op, const SimOptions& opts = {}) {
  check_spmm_inputs(a, b, "run_kernel");
  check_config(cfg);

  SimResult res;
  res.c = DenseMatrix(a.n_rows, b.n_cols);
  if (a.n_rows == 0) return res;
  if (b.n_cols == 0) throw Error("run_kernel: N must be >= 1");

  const LaunchGeometry g = launch_geometry(a.n_rows, b.n_cols, cfg);
  res.geometry = g;
  const u64 total = g.total_warps();

  const bool sequential = !opts.parallel || opts.trace != nullptr;
  if (sequential) {
    SimMem mem(a, b, res.c, res.metrics, opts.trace);
    for (u64 w = 0; w < total; ++w) {
      mem.set_warp(w);
      run_warp(mem, g, cfg, b.n_cols, op, w, opts.fault);
    }
    return res;
  }

  // Parallel evaluation over block-aligned chunks. Metrics are integer
  // counters merged in chunk order; C writes are disjoint, so the result is
  // identical to the sequential run.
  const u64 total_blocks = g.total_blocks();
  const u32 hw = std::max(1u, std::thread::hardware_concurrency());
  const u64 n_chunks = std::min<u64>(total_blocks, u64(hw) * 4);
  const u64 blocks_per_chunk = (total_blocks + n_chunks - 1) / n_chunks;

  std::vector<std::future<SimMetrics>> parts;
  parts.reserve(n_chunks);
  for (u64 chunk = 0; chunk < n_chunks; ++chunk) {
    const u64 wb = chunk * blocks_per_chunk * cfg.warps_per_block;
    const u64 we = std::min(total, (chunk + 1) * blocks_per_chunk * cfg.warps_per_block);
    if (wb >= we) break;
    parts.push_back(std::async(std::launch::async, [&, wb, we]() {
      SimMetrics local;
      SimMem mem(a, b, res.c, local, nullptr);
      for (u64 w = wb; w < we; ++w) {
        mem.set_warp(w);
        run_warp(mem, g, cfg, b.n_cols, op, w, opts.fault);
      }
      return local;
    }));
  }
  for (auto& f : parts) res.metrics.merge(f.get());
  return res;
}

}  // namespace spmm
