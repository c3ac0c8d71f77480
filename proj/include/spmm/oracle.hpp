#pragma once

#include "spmm/common.hpp"
#include "spmm/csr.hpp"
#include "spmm/dense.hpp"
#include "spmm/reduce_op.hpp"

#include <array>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace spmm {

// =============================================================================
// Independent brute-force references. Nothing here shares logic with the
// kernel programs or the engine's coalescer; that independence is the point.
// =============================================================================

inline constexpr u64 kDensifyCapElements = u64(1) << 24;

/// Densified copy of A: explicit zeros, row-major M x K.
inline std::vector<float> densify(const CsrMatrix& a) {
  const u64 total = u64(a.n_rows) * a.n_cols;
  if (total > kDensifyCapElements)
    throw Error("oracle: " + std::to_string(a.n_rows) + "x" + std::to_string(a.n_cols) +
                " exceeds densification cap of 2^24 elements");
  std::vector<float> dense(total, 0.0f);
  for (u32 r = 0; r < a.n_rows; ++r)
    for (u32 p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p)
      dense[u64(r) * a.n_cols + a.col_ind[p]] = a.vals[p];
  return dense;
}

/// Reference SpMM-like over the densified matrix:
/// C[i][j] folds op.combine over { A[i][k] * B[k][j] : A[i][k] != 0 },
/// k ascending, seeded with op.init. Ascending k matches canonical CSR's
/// ascending column order, so for op=sum the result is bitwise comparable
/// with every kernel variant (assuming no explicitly stored zeros).
inline DenseMatrix dense_reference(const CsrMatrix& a, const DenseMatrix& b,
                                   const ReduceOp& op) {
  if (a.n_cols != b.n_rows) throw Error("oracle: dimension mismatch");
  const std::vector<float> dense = densify(a);
  const u32 n = b.n_cols;

  DenseMatrix c(a.n_rows, n, op.init);
  for (u32 i = 0; i < a.n_rows; ++i) {
    for (u32 k = 0; k < a.n_cols; ++k) {
      const float v = dense[u64(i) * a.n_cols + k];
      if (v == 0.0f) continue;
      for (u32 j = 0; j < n; ++j) c.at(i, j) = op.fold(c.at(i, j), v * b.at(k, j));
    }
  }
  return c;
}

// -----------------------------------------------------------------------------
// Trace recount: recomputes transaction and requested-byte totals from the
// raw lane addresses of a verbose trace, by explicit per-byte segment-set
// enumeration. Deliberately naive.
// -----------------------------------------------------------------------------

struct TraceTotals {
  std::array<u64, kArrayCount> load_transactions{};
  std::array<u64, kArrayCount> load_requested_bytes{};
  std::array<u64, kArrayCount> store_transactions{};
  std::array<u64, kArrayCount> store_requested_bytes{};
  u64 records = 0;

  u64 total_load_transactions() const {
    u64 s = 0;
    for (u64 v : load_transactions) s += v;
    return s;
  }
  u64 total_store_transactions() const {
    u64 s = 0;
    for (u64 v : store_transactions) s += v;
    return s;
  }
  u64 total_load_requested() const {
    u64 s = 0;
    for (u64 v : load_requested_bytes) s += v;
    return s;
  }
};

class TraceParseError : public Error {
 public:
  TraceParseError(size_t line, const std::string& what)
      : Error("trace: line " + std::to_string(line) + ": " + what) {}
};

inline TraceTotals recount_trace(std::istream& in) {
  TraceTotals totals;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;

    std::string array_s, kind_s, lanes_s;
    bool have_lanes = false;
    std::istringstream fields(line);
    std::string tok;
    while (fields >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw TraceParseError(lineno, "expected key=value, got '" + tok + "'");
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      if (key == "array") array_s = val;
      else if (key == "kind") kind_s = val;
      else if (key == "lanes") { lanes_s = val; have_lanes = true; }
      else if (key != "warp" && key != "segments" && key != "requested")
        throw TraceParseError(lineno, "unknown field '" + key + "'");
    }

    ArrayId array;
    if (!parse_array_name(array_s, array))
      throw TraceParseError(lineno, "bad array name '" + array_s + "'");
    if (kind_s != "load" && kind_s != "store")
      throw TraceParseError(lineno, "bad kind '" + kind_s + "'");
    if (!have_lanes)
      throw TraceParseError(lineno, "missing lanes field (verbose trace required)");

    std::set<u64> bytes;
    std::istringstream ls(lanes_s);
    std::string a;
    while (std::getline(ls, a, ',')) {
      if (a.empty()) continue;
      u64 addr = 0;
      try {
        size_t pos = 0;
        addr = std::stoull(a, &pos);
        if (pos != a.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw TraceParseError(lineno, "bad lane address '" + a + "'");
      }
      for (u64 off = 0; off < 4; ++off) bytes.insert(addr + off);
    }

    std::set<u64> segments;
    for (u64 byte : bytes) segments.insert(byte / 32);

    const auto i = size_t(array);
    if (kind_s == "load") {
      totals.load_transactions[i] += segments.size();
      totals.load_requested_bytes[i] += bytes.size();
    } else {
      totals.store_transactions[i] += segments.size();
      totals.store_requested_bytes[i] += bytes.size();
    }
    ++totals.records;
  }
  return totals;
}

inline TraceTotals recount_trace(const std::string& text) {
  std::istringstream is(text);
  return recount_trace(is);
}

}  // namespace spmm
