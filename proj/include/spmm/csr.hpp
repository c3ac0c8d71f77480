#pragma once

#include "spmm/common.hpp"

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

namespace spmm {

// =============================================================================
// Sparse matrix data model.
//
// CsrMatrix is kept canonical at all times: row_ptr[0] == 0, row_ptr is
// non-decreasing with row_ptr[n_rows] == nnz, and column indices are strictly
// increasing within each row. Canonical form fixes the accumulation order of
// every kernel (ascending position within a row), which is what makes bitwise
// comparison between kernel variants and the dense reference meaningful.
// =============================================================================

struct CsrMatrix {
  u32 n_rows = 0;
  u32 n_cols = 0;
  std::vector<u32> row_ptr;  // length n_rows + 1
  std::vector<u32> col_ind;  // length nnz
  std::vector<float> vals;   // length nnz

  CsrMatrix() : row_ptr(1, 0) {}
  CsrMatrix(u32 rows, u32 cols) : n_rows(rows), n_cols(cols), row_ptr(rows + 1, 0) {}

  u32 nnz() const { return static_cast<u32>(col_ind.size()); }
  u32 row_len(u32 r) const { return row_ptr[r + 1] - row_ptr[r]; }
  double mean_degree() const { return n_rows == 0 ? 0.0 : double(nnz()) / n_rows; }
};

struct CooEntry {
  u32 row = 0;
  u32 col = 0;
  float val = 0.0f;
  bool operator==(const CooEntry&) const = default;
};

/// Unordered triple list with declared dimensions; the ingestion intermediate.
/// Duplicates are permitted until canonicalization by from_coo.
struct CooEntries {
  u32 n_rows = 0;
  u32 n_cols = 0;
  std::vector<CooEntry> entries;
};

enum class DedupPolicy { Sum, Last };

/// Builds a canonical CsrMatrix from COO triples. Entries are ordered by
/// (row, col); duplicates collapse per policy. The stable sort keeps the
/// input order inside each duplicate run, so Sum accumulates in input order
/// and Last keeps the final occurrence. Deterministic for a given input.
inline CsrMatrix from_coo(const CooEntries& coo, DedupPolicy policy = DedupPolicy::Sum) {
  for (const auto& e : coo.entries) {
    if (e.row >= coo.n_rows || e.col >= coo.n_cols) {
      std::ostringstream os;
      os << "coo entry (" << e.row << ", " << e.col << ", " << e.val
         << ") outside declared " << coo.n_rows << "x" << coo.n_cols << " bounds";
      throw Error(os.str());
    }
  }

  std::vector<CooEntry> sorted = coo.entries;
  std::stable_sort(sorted.begin(), sorted.end(), [](const CooEntry& a, const CooEntry& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  CsrMatrix m(coo.n_rows, coo.n_cols);
  m.col_ind.reserve(sorted.size());
  m.vals.reserve(sorted.size());

  size_t i = 0;
  for (u32 r = 0; r < coo.n_rows; ++r) {
    while (i < sorted.size() && sorted[i].row == r) {
      const u32 c = sorted[i].col;
      float v = sorted[i].val;
      ++i;
      while (i < sorted.size() && sorted[i].row == r && sorted[i].col == c) {
        v = (policy == DedupPolicy::Sum) ? v + sorted[i].val : sorted[i].val;
        ++i;
      }
      m.col_ind.push_back(c);
      m.vals.push_back(v);
    }
    m.row_ptr[r + 1] = static_cast<u32>(m.col_ind.size());
  }
  return m;
}

inline CooEntries to_coo(const CsrMatrix& m) {
  CooEntries coo;
  coo.n_rows = m.n_rows;
  coo.n_cols = m.n_cols;
  coo.entries.reserve(m.nnz());
  for (u32 r = 0; r < m.n_rows; ++r)
    for (u32 p = m.row_ptr[r]; p < m.row_ptr[r + 1]; ++p)
      coo.entries.push_back({r, m.col_ind[p], m.vals[p]});
  return coo;
}

/// Non-throwing invariant check; one message per violation, empty iff canonical.
struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate(const CsrMatrix& m) {
  ValidationReport rep;
  auto fail = [&rep](const std::string& s) { rep.violations.push_back(s); };

  if (m.row_ptr.size() != static_cast<size_t>(m.n_rows) + 1) {
    fail("row_ptr length is " + std::to_string(m.row_ptr.size()) + ", expected n_rows+1 = " +
         std::to_string(m.n_rows + 1));
    return rep;  // offsets unusable, skip dependent checks
  }
  if (m.col_ind.size() != m.vals.size())
    fail("col_ind length " + std::to_string(m.col_ind.size()) + " != vals length " +
         std::to_string(m.vals.size()));
  if (!m.row_ptr.empty() && m.row_ptr[0] != 0)
    fail("row_ptr[0] = " + std::to_string(m.row_ptr[0]) + ", expected 0");
  for (size_t i = 1; i < m.row_ptr.size(); ++i) {
    if (m.row_ptr[i] < m.row_ptr[i - 1]) {
      fail("row_ptr non-decreasing violated at index " + std::to_string(i));
      return rep;
    }
  }
  if (m.row_ptr[m.n_rows] != m.col_ind.size())
    fail("row_ptr[n_rows] = " + std::to_string(m.row_ptr[m.n_rows]) + " != nnz = " +
         std::to_string(m.col_ind.size()));

  const u32 usable_nnz = std::min<u32>(m.row_ptr[m.n_rows], static_cast<u32>(m.col_ind.size()));
  for (u32 r = 0; r < m.n_rows; ++r) {
    u32 prev = 0;
    bool first = true;
    for (u32 p = m.row_ptr[r]; p < m.row_ptr[r + 1] && p < usable_nnz; ++p) {
      const u32 c = m.col_ind[p];
      if (c >= m.n_cols)
        fail("col_ind[" + std::to_string(p) + "] = " + std::to_string(c) +
             " out of bounds (n_cols = " + std::to_string(m.n_cols) + ")");
      if (!first && c <= prev)
        fail("columns not strictly increasing in row " + std::to_string(r) + " at position " +
             std::to_string(p));
      prev = c;
      first = false;
    }
  }
  return rep;
}

inline void require_canonical(const CsrMatrix& m, const char* who) {
  const auto rep = validate(m);
  if (!rep.ok()) throw Error(std::string(who) + ": matrix is not canonical CSR: " + rep.violations.front());
}

}  // namespace spmm
