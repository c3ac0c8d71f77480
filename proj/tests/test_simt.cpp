#include "spmm/generate.hpp"
#include "spmm/oracle.hpp"
#include "spmm/simt.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>
#include <sstream>

using namespace spmm;

namespace {


// Brute-force cross-check used only by this test file.
CoalesceResult slow_coalesce(const WarpAccess& a) {
  std::set<u64> bytes;
  for (u32 i = 0; i < a.count; ++i)
    for (u64 off = 0; off < a.width; ++off) bytes.insert(a.addr[i] + off);
  std::set<u64> segs;
  for (u64 b : bytes) segs.insert(b / 32);
  return {segs.size(), bytes.size()};
}

KernelConfig config_for(KernelVariant v) { return {32, 8, v}; }

}  // namespace

TEST_CASE("coalesce: fully coalesced aligned warp load is four transactions") {
  WarpAccess a;
  const u64 base = 1 << 20;  // 32-byte aligned
  for (u32 lane = 0; lane < 32; ++lane) a.addr[a.count++] = base + 4 * lane;
  const auto r = coalesce(a);
  CHECK(r.transactions == 4);
  CHECK(r.requested_bytes == 128);
}

TEST_CASE("coalesce: broadcast collapses to one transaction of four bytes") {
  WarpAccess a;
  for (u32 lane = 0; lane < 32; ++lane) a.addr[a.count++] = 4096;
  const auto r = coalesce(a);
  CHECK(r.transactions == 1);
  CHECK(r.requested_bytes == 4);
}

TEST_CASE("coalesce: a four-byte misalignment costs a fifth segment") {
  WarpAccess a;
  const u64 base = 1 << 20;
  for (u32 lane = 0; lane < 32; ++lane) a.addr[a.count++] = base + 4 + 4 * lane;
  const auto r = coalesce(a);
  CHECK(r.transactions == 5);  // bytes [4, 132) span segments 0..4
  CHECK(r.requested_bytes == 128);
}

TEST_CASE("coalesce: zero active lanes cost nothing") {
  WarpAccess a;
  CHECK(coalesce(a) == CoalesceResult{0, 0});
}

TEST_CASE("coalesce agrees with per-byte enumeration on random accesses") {
  std::mt19937_64 rng(5150);
  for (int it = 0; it < 2000; ++it) {
    WarpAccess a;
    const u32 lanes = 1 + u32(rng() % 32);
    const u64 base = (rng() % 1024) * 4;
    for (u32 i = 0; i < lanes; ++i) {
      u64 addr = base + 4 * (rng() % 64);
      if (it % 3 == 0) addr += rng() % 3;  // unaligned words too
      a.addr[a.count++] = addr;
    }
    const auto fast = coalesce(a);
    const auto slow = slow_coalesce(a);
    CAPTURE(it, lanes);
    REQUIRE(fast == slow);
  }
}

TEST_CASE("one-element kernel issues a single ColInd transaction") {
  CooEntries coo{1, 1, {{0, 0, 3.0f}}};
  const CsrMatrix a = from_coo(coo);
  DenseMatrix b(1, 1);
  b.at(0, 0) = 5.0f;

  const auto res = run_kernel(a, b, config_for(KernelVariant::naive()), ops::sum());
  CHECK(res.c.at(0, 0) == 15.0f);
  CHECK(res.metrics.loads(ArrayId::ColInd).transactions == 1);
  CHECK(res.metrics.loads(ArrayId::Val).transactions == 1);
  CHECK(res.metrics.loads(ArrayId::RowPtr).transactions == 2);
  CHECK(res.metrics.loads(ArrayId::B).transactions == 1);
  CHECK(res.metrics.gst_transactions == 1);
}

TEST_CASE("broadcast law: warp-uniform loads cost one transaction, four bytes") {
  const CsrMatrix a = gen_uniform_random({32, 256, 9, false});
  const DenseMatrix b = make_random_dense(32, 64, 1);
  const auto res = run_kernel(a, b, config_for(KernelVariant::naive()), ops::sum());

  const u64 warps = res.geometry.total_warps();
  // naive: every ColInd/Val read is a broadcast, one per nonzero per covering warp
  const u64 covering = warps / a.n_rows;
  CHECK(res.metrics.loads(ArrayId::ColInd).transactions == u64(a.nnz()) * covering);
  CHECK(res.metrics.loads(ArrayId::ColInd).requested_bytes == u64(a.nnz()) * covering * 4);
  CHECK(res.metrics.loads(ArrayId::RowPtr).transactions == 2 * warps);
  CHECK(res.metrics.loads(ArrayId::RowPtr).requested_bytes == 8 * warps);
}

TEST_CASE("metrics invariants hold on a random run") {
  std::mt19937_64 rng(12);
  for (const auto& v : {KernelVariant::naive(), KernelVariant::crc(), KernelVariant::crc_cwm(4)}) {
    CsrMatrix a = gen_uniform_random({100, 1200, rng(), false});
    randomize_values(a, rng());
    const DenseMatrix b = make_random_dense(100, 65, rng());
    const auto res = run_kernel(a, b, config_for(v), ops::sum());
    const auto& m = res.metrics;

    CHECK(m.transferred_load_bytes == kTransactionBytes * m.gld_transactions);
    CHECK(m.transferred_store_bytes == kTransactionBytes * m.gst_transactions);
    const double eff = m.gld_efficiency();
    CHECK(eff > 0.0);
    CHECK(eff <= 1.0);
    u64 load_sum = 0, store_sum = 0;
    for (int i = 0; i < kArrayCount; ++i) {
      load_sum += m.load_by_array[i].transactions;
      store_sum += m.store_by_array[i].transactions;
    }
    CHECK(load_sum == m.gld_transactions);
    CHECK(store_sum == m.gst_transactions);
    CHECK(metrics_report(m).consistent);
  }
}

TEST_CASE("parallel block evaluation returns the sequential result") {
  CsrMatrix a = gen_uniform_random({300, 3000, 77, false});
  randomize_values(a, 78);
  const DenseMatrix b = make_random_dense(300, 96, 79);

  for (const auto& v : {KernelVariant::naive(), KernelVariant::crc_cwm(2)}) {
    const auto seq = run_kernel(a, b, config_for(v), ops::sum(), {});
    SimOptions par;
    par.parallel = true;
    const auto con = run_kernel(a, b, config_for(v), ops::sum(), par);
    CHECK(seq.metrics == con.metrics);
    CHECK(seq.c.bitwise_equal(con.c));
  }
}

TEST_CASE("determinism: repeated runs produce identical metrics and output") {
  CsrMatrix a = gen_uniform_random({128, 1500, 3, false});
  const DenseMatrix b = make_random_dense(128, 33, 4);
  const auto r1 = run_kernel(a, b, config_for(KernelVariant::crc()), ops::max());
  const auto r2 = run_kernel(a, b, config_for(KernelVariant::crc()), ops::max());
  CHECK(r1.metrics == r2.metrics);
  CHECK(r1.c.bitwise_equal(r2.c));
}

TEST_CASE("transactions grow linearly in N") {
  const CsrMatrix a = gen_uniform_random({512, 5120, 21, false});
  for (const auto& v : {KernelVariant::naive(), KernelVariant::crc(), KernelVariant::crc_cwm(2),
                        KernelVariant::crc_cwm(4)}) {
    const DenseMatrix b128 = make_random_dense(512, 128, 5);
    const DenseMatrix b256 = make_random_dense(512, 256, 5);
    const u64 t128 = run_kernel(a, b128, config_for(v), ops::sum()).metrics.gld_transactions;
    const u64 t256 = run_kernel(a, b256, config_for(v), ops::sum()).metrics.gld_transactions;
    const double ratio = double(t256) / double(t128);
    CAPTURE(v.name(), v.cf);
    CHECK(ratio > 1.9);
    CHECK(ratio < 2.1);
  }
}

TEST_CASE("row caching reduces sparse-array transactions per the model") {
  // Mean degree 10: the transaction model predicts a sparse-load ratio of
  // 8*L/(L+7) ~= 4.7 between the plain and row-caching kernels.
  const CsrMatrix deg10 = gen_uniform_random({4096, 40960, 2, false});
  const DenseMatrix b10 = make_random_dense(4096, 64, 6);
  const u64 naive10 =
      run_kernel(deg10, b10, config_for(KernelVariant::naive()), ops::sum()).metrics.sparse_load_transactions();
  const u64 crc10 =
      run_kernel(deg10, b10, config_for(KernelVariant::crc()), ops::sum()).metrics.sparse_load_transactions();
  const double ratio10 = double(naive10) / double(crc10);
  CHECK(ratio10 > 4.4);
  CHECK(ratio10 < 5.0);

  // Long rows amortize the per-tile segment overhead; at mean degree 128 the
  // asymptotic bound (64/9.75 ~= 6.56) is approached and the reduction
  // clears 6x.
  const CsrMatrix deg128 = gen_uniform_random({1024, 131072, 2, false});
  const DenseMatrix b128 = make_random_dense(1024, 64, 6);
  const u64 naive128 =
      run_kernel(deg128, b128, config_for(KernelVariant::naive()), ops::sum()).metrics.sparse_load_transactions();
  const u64 crc128 =
      run_kernel(deg128, b128, config_for(KernelVariant::crc()), ops::sum()).metrics.sparse_load_transactions();
  CHECK(double(naive128) / double(crc128) >= 6.0);
}

TEST_CASE("warp merging scales sparse loads by cf and leaves B untouched") {
  const CsrMatrix a = gen_uniform_random({1024, 10240, 15, false});
  const DenseMatrix b = make_random_dense(1024, 512, 3);  // 32*cf divides 512 for cf in {2,4,8}

  const auto crc = run_kernel(a, b, config_for(KernelVariant::crc()), ops::sum()).metrics;
  for (u32 cf : {2u, 4u, 8u}) {
    const auto cwm = run_kernel(a, b, config_for(KernelVariant::crc_cwm(cf)), ops::sum()).metrics;
    CHECK(cwm.sparse_load_transactions() * cf == crc.sparse_load_transactions());
    CHECK(cwm.loads(ArrayId::B).transactions == crc.loads(ArrayId::B).transactions);
  }
}

TEST_CASE("total transactions decrease with diminishing returns as cf grows") {
  const CsrMatrix a = gen_uniform_random({4096, 40960, 1, false});
  const DenseMatrix b = make_random_dense(4096, 512, 42);

  std::vector<u64> glt;
  for (const auto& v : {KernelVariant::crc(), KernelVariant::crc_cwm(2), KernelVariant::crc_cwm(4),
                        KernelVariant::crc_cwm(8)})
    glt.push_back(run_kernel(a, b, config_for(v), ops::sum()).metrics.gld_transactions);

  CHECK(glt[0] > glt[1]);
  CHECK(glt[1] > glt[2]);
  CHECK(glt[2] > glt[3]);
  CHECK(glt[0] - glt[1] > glt[1] - glt[2]);
  CHECK(glt[1] - glt[2] > glt[2] - glt[3]);
}

TEST_CASE("metrics_report derives ratios and flags consistency") {
  SimMetrics m;
  m.gld_transactions = 10;
  m.requested_load_bytes = 256;
  m.transferred_load_bytes = 320;
  m.load_by_array[size_t(ArrayId::B)].transactions = 10;
  const MetricsReport rep = metrics_report(m);
  CHECK(rep.gld_efficiency == 0.8);
  CHECK(rep.consistent);

  SimMetrics bad = m;
  bad.load_by_array[size_t(ArrayId::B)].transactions = 9;  // sums no longer match
  CHECK_FALSE(metrics_report(bad).consistent);
}

TEST_CASE("empty launch produces an all-zero report") {
  const CsrMatrix a(0, 0);
  DenseMatrix b(0, 16);
  const auto res = run_kernel(a, b, config_for(KernelVariant::crc()), ops::sum());
  CHECK(res.metrics == SimMetrics{});
  CHECK(res.c.size() == 0);
  CHECK(metrics_report(res.metrics).gld_efficiency == 0.0);
}

TEST_CASE("run_kernel rejects bad inputs") {
  const CsrMatrix a = gen_uniform_random({4, 6, 0, false});
  CHECK_THROWS_WITH(run_kernel(a, DenseMatrix(5, 4), config_for(KernelVariant::crc()), ops::sum()),
                    Catch::Matchers::ContainsSubstring("dimension mismatch"));

  CsrMatrix broken = a;
  broken.col_ind[0] = 99;
  CHECK_THROWS_WITH(run_kernel(broken, DenseMatrix(4, 4), config_for(KernelVariant::crc()), ops::sum()),
                    Catch::Matchers::ContainsSubstring("not canonical"));
}

TEST_CASE("trace records reproduce engine totals through the recount oracle") {
  std::mt19937_64 rng(2);
  for (const auto& v : {KernelVariant::naive(), KernelVariant::crc(), KernelVariant::crc_cwm(2)}) {
    CsrMatrix a = gen_uniform_random({64, u64(64) * 8, rng(), false});
    randomize_values(a, rng());
    const DenseMatrix b = make_random_dense(64, 64, rng());

    std::ostringstream trace;
    TraceSink sink = text_trace_sink(trace, true);
    SimOptions opts;
    opts.trace = &sink;
    const auto res = run_kernel(a, b, config_for(v), ops::sum(), opts);

    const TraceTotals totals = recount_trace(trace.str());
    CHECK(totals.total_load_transactions() == res.metrics.gld_transactions);
    CHECK(totals.total_store_transactions() == res.metrics.gst_transactions);
    CHECK(totals.total_load_requested() == res.metrics.requested_load_bytes);
    for (int i = 0; i < kArrayCount; ++i) {
      const auto id = static_cast<ArrayId>(i);
      CHECK(totals.load_transactions[i] == res.metrics.loads(id).transactions);
      CHECK(totals.load_requested_bytes[i] == res.metrics.loads(id).requested_bytes);
      CHECK(totals.store_transactions[i] == res.metrics.stores(id).transactions);
    }
  }
}
