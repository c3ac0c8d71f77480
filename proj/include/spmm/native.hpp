#pragma once

#include "spmm/common.hpp"
#include "spmm/csr.hpp"
#include "spmm/dense.hpp"
#include "spmm/kernel.hpp"
#include "spmm/simt.hpp"  // check_spmm_inputs

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

namespace spmm {

// =============================================================================
// Native multi-core backend. Runs the same warp programs as the simulator
// through a direct (unmetered) memory interface. Work items are the launch
// geometry's (row, column-tile) warps; tasks own disjoint output slices, so
// no write ever races and the output is independent of scheduling.
// =============================================================================

class DirectMem {
 public:
  DirectMem(const CsrMatrix& a, const DenseMatrix& b, DenseMatrix& c)
      : row_ptr_(a.row_ptr.data()),
        col_ind_(a.col_ind.data()),
        vals_(a.vals.data()),
        b_(b.data.data()),
        c_(c.data.data()) {}

  template <class T>
  T load_uniform(ArrayId id, u64 elem, LaneMask) const {
    if constexpr (std::is_same_v<T, u32>) {
      return id == ArrayId::RowPtr ? row_ptr_[elem] : col_ind_[elem];
    } else {
      return id == ArrayId::Val ? vals_[elem] : b_[elem];
    }
  }

  template <class T, class IdxFn>
  void load_lanes(ArrayId id, LaneMask active, IdxFn idx, T* out) const {
    LaneMask m = active;
    while (m) {
      const u32 lane = static_cast<u32>(__builtin_ctzll(m));
      m &= m - 1;
      if constexpr (std::is_same_v<T, u32>) {
        out[lane] = col_ind_[idx(lane)];
      } else {
        out[lane] = (id == ArrayId::Val ? vals_ : b_)[idx(lane)];
      }
    }
  }

  template <class T, class IdxFn>
  void store_lanes(ArrayId, LaneMask active, IdxFn idx, const T* src) {
    LaneMask m = active;
    while (m) {
      const u32 lane = static_cast<u32>(__builtin_ctzll(m));
      m &= m - 1;
      c_[idx(lane)] = src[lane];
    }
  }

  void shared_store(u32) const {}
  void shared_load(u32) const {}

 private:
  const u32* row_ptr_;
  const u32* col_ind_;
  const float* vals_;
  const float* b_;
  float* c_;
};

/// Partition of the warp index space into contiguous task ranges. Each range
/// is a task; its warps are the (row, column-tile) work items.
struct ExecPlan {
  KernelVariant variant;
  u32 workers = 1;
  LaunchGeometry geometry;
  std::vector<std::pair<u64, u64>> tasks;  // [begin, end) warp ids
};

inline ExecPlan make_exec_plan(u32 m, u32 n, const KernelConfig& cfg, u32 workers) {
  ExecPlan plan;
  plan.variant = cfg.variant;
  plan.workers = std::max(1u, workers);
  plan.geometry = launch_geometry(m, n, cfg);
  const u64 total = plan.geometry.total_warps();
  // Enough tasks per worker that uneven rows balance out.
  const u64 want = std::min<u64>(total, u64(plan.workers) * 16);
  const u64 per = want == 0 ? 0 : (total + want - 1) / want;
  for (u64 b = 0; b < total; b += per) plan.tasks.emplace_back(b, std::min(total, b + per));
  return plan;
}

/// SpMM / SpMM-like on the native backend. Bitwise-identical to the
/// simulator output for the same variant and op, for any worker count.
inline DenseMatrix native_spmm(const CsrMatrix& a, const DenseMatrix& b, KernelVariant variant,
                        const ReduceOp& op, u32 workers = 0, ExecOptions exec = {}) {
  check_spmm_inputs(a, b, "spmm");
  KernelConfig cfg;
  cfg.variant = variant;
  check_config(cfg);

  DenseMatrix c(a.n_rows, b.n_cols);
  if (a.n_rows == 0) return c;
  if (b.n_cols == 0) throw Error("native_spmm: N must be >= 1");

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  const ExecPlan plan = make_exec_plan(a.n_rows, b.n_cols, cfg, workers);
  const LaunchGeometry& g = plan.geometry;
  const u32 n = b.n_cols;

  auto run_task = [&](DirectMem& mem, u64 begin, u64 end) {
    for (u64 w = begin; w < end; ++w) run_warp(mem, g, cfg, n, op, w, exec.fault);
  };

  if (plan.workers == 1 || plan.tasks.size() <= 1) {
    DirectMem mem(a, b, c);
    for (const auto& [tb, te] : plan.tasks) run_task(mem, tb, te);
    return c;
  }

  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  const u32 n_threads = std::min<u32>(plan.workers, static_cast<u32>(plan.tasks.size()));
  pool.reserve(n_threads);
  for (u32 t = 0; t < n_threads; ++t) {
    pool.emplace_back([&]() {
      DirectMem mem(a, b, c);
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= plan.tasks.size()) return;
        run_task(mem, plan.tasks[i].first, plan.tasks[i].second);
      }
    });
  }
  for (auto& th : pool) th.join();
  return c;
}

/// Wall-clock throughput: flops are theoretical (2 * nnz * N), never
/// measured; elapsed is the median of `repeats` runs (mean also kept).
struct ThroughputReport {
  double elapsed_s = 0.0;       // median
  double elapsed_mean_s = 0.0;
  u32 repeats = 0;
  u64 flops = 0;
  double gflops = 0.0;
  u64 output_checksum = 0;
};

inline ThroughputReport bench(const CsrMatrix& a, const DenseMatrix& b, KernelVariant variant,
                              const ReduceOp& op, u32 workers = 0, u32 repeats = 9) {
  if (repeats < 1) throw Error("bench: repeats must be >= 1");
  ThroughputReport rep;
  rep.repeats = repeats;
  rep.flops = 2ull * a.nnz() * b.n_cols;

  std::vector<double> times;
  times.reserve(repeats);
  for (u32 r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    DenseMatrix c = native_spmm(a, b, variant, op, workers);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
    rep.output_checksum = checksum(c);  // outside the timed window
  }

  std::sort(times.begin(), times.end());
  rep.elapsed_s = times[(times.size() - 1) / 2];
  double total = 0.0;
  for (double t : times) total += t;
  rep.elapsed_mean_s = total / double(times.size());
  rep.gflops = rep.elapsed_s > 0.0 ? double(rep.flops) / rep.elapsed_s / 1e9 : 0.0;
  return rep;
}

}  // namespace spmm
