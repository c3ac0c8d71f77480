#include "spmm/generate.hpp"
#include "spmm/native.hpp"
#include "spmm/oracle.hpp"
#include "spmm/simt.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace spmm;

TEST_CASE("native spmm matches the hand-computed small case") {
  // rows: {0: 1.0, 2: 2.0} and {1: 3.0}; B = 3x2 ones
  CooEntries coo{2, 3, {{0, 0, 1.0f}, {0, 2, 2.0f}, {1, 1, 3.0f}}};
  const CsrMatrix a = from_coo(coo);
  const DenseMatrix b(3, 2, 1.0f);

  const DenseMatrix want = dense_reference(a, b, ops::sum());
  REQUIRE(want.at(0, 0) == 3.0f);
  REQUIRE(want.at(0, 1) == 3.0f);
  REQUIRE(want.at(1, 0) == 3.0f);
  REQUIRE(want.at(1, 1) == 3.0f);

  CHECK(native_spmm(a, b, KernelVariant::crc(), ops::sum(), 1).bitwise_equal(want));
}

TEST_CASE("output is independent of worker count") {
  std::mt19937_64 rng(6);
  CsrMatrix a = gen_uniform_random({257, 4000, rng(), false});
  randomize_values(a, rng());
  const DenseMatrix b = make_random_dense(257, 65, rng());

  for (const auto& v :
       {KernelVariant::naive(), KernelVariant::crc(), KernelVariant::crc_cwm(2)}) {
    const DenseMatrix one = native_spmm(a, b, v, ops::sum(), 1);
    const DenseMatrix eight = native_spmm(a, b, v, ops::sum(), 8);
    CHECK(one.bitwise_equal(eight));
  }
}

TEST_CASE("native output equals simulator output bitwise") {
  std::mt19937_64 rng(60);
  for (int it = 0; it < 10; ++it) {
    const u32 rows = 1 + u32(rng() % 150);
    CsrMatrix a = gen_uniform_random({rows, rng() % (u64(rows) * (rows - 1) / 2 + 1), rng(), false});
    randomize_values(a, rng());
    const u32 n = 1 + u32(rng() % 100);
    const DenseMatrix b = make_random_dense(rows, n, rng());
    const ReduceOp op = (it & 1) ? ops::max() : ops::sum();

    for (const auto& v :
         {KernelVariant::naive(), KernelVariant::crc(), KernelVariant::crc_cwm(8)}) {
      KernelConfig cfg{32, 8, v};
      CAPTURE(rows, n, op.name, v.name());
      REQUIRE(native_spmm(a, b, v, op, 4).bitwise_equal(run_kernel(a, b, cfg, op).c));
    }
  }
}

TEST_CASE("exec plan partitions the warp space") {
  KernelConfig cfg{32, 8, KernelVariant::crc_cwm(2)};
  const ExecPlan plan = make_exec_plan(500, 300, cfg, 4);
  const u64 total = plan.geometry.total_warps();
  u64 covered = 0;
  u64 prev_end = 0;
  for (const auto& [b, e] : plan.tasks) {
    CHECK(b == prev_end);
    CHECK(e > b);
    covered += e - b;
    prev_end = e;
  }
  CHECK(covered == total);
}

TEST_CASE("throughput report uses theoretical flops") {
  CsrMatrix a = gen_uniform_random({1000, 650000 / 250, 3, true});
  // craft the documented flop example: nnz=650000 would need a big matrix;
  // check the formula directly on this one instead
  const DenseMatrix b = make_random_dense(1000, 16, 4);
  const ThroughputReport rep = bench(a, b, KernelVariant::crc(), ops::sum(), 2, 3);
  CHECK(rep.flops == 2ull * a.nnz() * 16);
  CHECK(rep.gflops > 0.0);
  CHECK(rep.repeats == 3);
  CHECK(rep.elapsed_s > 0.0);

  // formula example at the reference scale
  CHECK(2ull * 650000 * 512 == 665600000ull);
}

TEST_CASE("bench with a single repeat reports that measurement") {
  const CsrMatrix a = gen_uniform_random({64, 512, 9, false});
  const DenseMatrix b = make_random_dense(64, 32, 2);
  const ThroughputReport rep = bench(a, b, KernelVariant::naive(), ops::sum(), 1, 1);
  CHECK(rep.repeats == 1);
  CHECK(rep.elapsed_s == rep.elapsed_mean_s);
  CHECK_THROWS_AS(bench(a, b, KernelVariant::naive(), ops::sum(), 1, 0), Error);
}

TEST_CASE("bench checksum is stable across runs") {
  CsrMatrix a = gen_uniform_random({128, 2000, 8, false});
  randomize_values(a, 9);
  const DenseMatrix b = make_random_dense(128, 48, 10);
  const auto r1 = bench(a, b, KernelVariant::crc_cwm(2), ops::sum(), 4, 2);
  const auto r2 = bench(a, b, KernelVariant::crc_cwm(2), ops::sum(), 1, 2);
  CHECK(r1.output_checksum == r2.output_checksum);
}
