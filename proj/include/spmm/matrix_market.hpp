#pragma once

#include "spmm/common.hpp"
#include "spmm/csr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace spmm {

/// Parse error carrying the 1-based source line.
class MmParseError : public Error {
 public:
  MmParseError(size_t line, const std::string& what)
      : Error("matrix market: line " + std::to_string(line) + ": " + what), line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline bool parse_u64(const std::string& s, u64& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

inline bool parse_f64(const std::string& s, double& out) {
  // from_chars for double is available on this toolchain, but strtod keeps
  // the accepted syntax identical to the reference scanners ("1e3", "+.5").
  const char* b = s.c_str();
  char* end = nullptr;
  out = std::strtod(b, &end);
  return end == b + s.size() && !s.empty();
}

}  // namespace detail

/// Reads Matrix Market coordinate data into COO triples.
///
/// Accepted header: "%%MatrixMarket matrix coordinate <field> <symmetry>"
/// with field in {real, integer, pattern} and symmetry in {general,
/// symmetric}. Pattern entries take value 1.0. Symmetric entries are
/// mirrored across the diagonal; diagonal entries are not duplicated.
/// Indices are 1-based in the file and 0-based in the result.
inline CooEntries parse_matrix_market(std::istream& in) {
  std::string line;
  size_t lineno = 0;

  if (!std::getline(in, line)) throw MmParseError(1, "empty input");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = detail::split_ws(detail::lower(line));
  if (header.size() < 2 || header[0] != "%%matrixmarket" || header[1] != "matrix")
    throw MmParseError(lineno, "expected header '%%MatrixMarket matrix coordinate ...'");
  if (header.size() < 3 || header[2] != "coordinate") {
    if (header.size() >= 3 && header[2] == "array")
      throw MmParseError(lineno, "'array' (dense) files are not supported, only 'coordinate'");
    throw MmParseError(lineno, "expected 'coordinate' format in header");
  }
  std::string field = header.size() > 3 ? header[3] : "real";
  std::string symmetry = header.size() > 4 ? header[4] : "general";
  if (field != "real" && field != "integer" && field != "pattern")
    throw MmParseError(lineno, "unsupported field '" + field + "' (want real, integer or pattern)");
  if (symmetry != "general" && symmetry != "symmetric")
    throw MmParseError(lineno, "unsupported symmetry '" + symmetry + "' (want general or symmetric)");
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";

  // Size line: first non-comment, non-blank line.
  u64 rows = 0, cols = 0, declared_nnz = 0;
  for (;;) {
    if (!std::getline(in, line)) throw MmParseError(lineno + 1, "missing size line");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '%') continue;
    auto tok = detail::split_ws(line);
    if (tok.size() != 3 || !detail::parse_u64(tok[0], rows) || !detail::parse_u64(tok[1], cols) ||
        !detail::parse_u64(tok[2], declared_nnz))
      throw MmParseError(lineno, "size line must be '<rows> <cols> <nnz>'");
    break;
  }
  if (rows > 0xffffffffull || cols > 0xffffffffull)
    throw MmParseError(lineno, "dimensions exceed 32-bit index range");

  CooEntries coo;
  coo.n_rows = static_cast<u32>(rows);
  coo.n_cols = static_cast<u32>(cols);
  // cap the up-front reservation; a lying header must not pre-allocate
  coo.entries.reserve(std::min<u64>(symmetric ? 2 * declared_nnz : declared_nnz, u64(1) << 22));

  u64 seen = 0;
  while (seen < declared_nnz) {
    if (!std::getline(in, line))
      throw MmParseError(lineno + 1, "unexpected end of file: got " + std::to_string(seen) +
                                         " of " + std::to_string(declared_nnz) + " entries");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '%') continue;
    auto tok = detail::split_ws(line);
    const size_t want = pattern ? 2 : 3;
    if (tok.size() != want)
      throw MmParseError(lineno, "expected " + std::to_string(want) + " fields, got " +
                                     std::to_string(tok.size()));
    u64 r1 = 0, c1 = 0;
    if (!detail::parse_u64(tok[0], r1) || !detail::parse_u64(tok[1], c1))
      throw MmParseError(lineno, "non-numeric index");
    double v = 1.0;
    if (!pattern && !detail::parse_f64(tok[2], v)) throw MmParseError(lineno, "non-numeric value");
    if (r1 < 1 || r1 > rows || c1 < 1 || c1 > cols)
      throw MmParseError(lineno, "index (" + tok[0] + ", " + tok[1] + ") outside declared " +
                                     std::to_string(rows) + "x" + std::to_string(cols));
    const u32 r = static_cast<u32>(r1 - 1);
    const u32 c = static_cast<u32>(c1 - 1);
    coo.entries.push_back({r, c, static_cast<float>(v)});
    if (symmetric && r != c) coo.entries.push_back({c, r, static_cast<float>(v)});
    ++seen;
  }
  return coo;
}

inline CooEntries parse_matrix_market(const std::string& text) {
  std::istringstream is(text);
  return parse_matrix_market(is);
}

/// Writes general real coordinate format, 1-based. Values use max_digits10
/// precision so a parse of the output recovers every float exactly.
inline void write_matrix_market(std::ostream& out, const CooEntries& coo) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << coo.n_rows << " " << coo.n_cols << " " << coo.entries.size() << "\n";
  char buf[64];
  for (const auto& e : coo.entries) {
    std::snprintf(buf, sizeof(buf), "%u %u %.9g\n", e.row + 1, e.col + 1, double(e.val));
    out << buf;
  }
}

inline void write_matrix_market(std::ostream& out, const CsrMatrix& m) {
  write_matrix_market(out, to_coo(m));
}

}  // namespace spmm
