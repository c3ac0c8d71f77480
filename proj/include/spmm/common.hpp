#pragma once

#include <cstdint>
#include <string>
#include <stdexcept>

namespace spmm {

inline constexpr const char* kToolName = "spmm-lab";
inline constexpr const char* kToolVersion = "0.1.0";

using u8 = std::uint8_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

/// Error type for all recoverable failures (parsing, validation, bad specs).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// The five global arrays a kernel can touch. Used for per-array metric
/// breakdowns and trace records.
enum class ArrayId : u8 { RowPtr = 0, ColInd = 1, Val = 2, B = 3, C = 4 };
inline constexpr int kArrayCount = 5;

enum class AccessKind : u8 { Load, Store };

inline const char* array_name(ArrayId id) {
  switch (id) {
    case ArrayId::RowPtr: return "RowPtr";
    case ArrayId::ColInd: return "ColInd";
    case ArrayId::Val:    return "Val";
    case ArrayId::B:      return "B";
    case ArrayId::C:      return "C";
  }
  return "?";
}

inline bool parse_array_name(const std::string& s, ArrayId& out) {
  for (int i = 0; i < kArrayCount; ++i) {
    if (s == array_name(static_cast<ArrayId>(i))) {
      out = static_cast<ArrayId>(i);
      return true;
    }
  }
  return false;
}

}  // namespace spmm
