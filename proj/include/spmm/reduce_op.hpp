#pragma once

#include "spmm/common.hpp"

#include <limits>
#include <string>

namespace spmm {

/// A reduction over 32-bit reals: an accumulator seed plus an associative,
/// commutative combine. The multiply (sparse value times dense element) is
/// fixed; only the reduction is user-definable. SpMM proper is `sum`;
/// neighbor max-pooling is `max`.
struct ReduceOp {
  std::string name;
  float init = 0.0f;
  float (*combine)(float, float) = nullptr;

  float fold(float acc, float x) const { return combine(acc, x); }
};

namespace ops {

inline float add_f32(float a, float b) { return a + b; }
inline float max_f32(float a, float b) { return a < b ? b : a; }

inline ReduceOp sum() { return {"sum", 0.0f, &add_f32}; }
inline ReduceOp max() { return {"max", std::numeric_limits<float>::lowest(), &max_f32}; }

}  // namespace ops

inline ReduceOp reduce_op_by_name(const std::string& name) {
  if (name == "sum") return ops::sum();
  if (name == "max") return ops::max();
  throw Error("unknown reduce op '" + name + "' (built-ins: sum, max)");
}

}  // namespace spmm
