#pragma once

// Umbrella header.

#include "spmm/common.hpp"
#include "spmm/csr.hpp"
#include "spmm/dense.hpp"
#include "spmm/generate.hpp"
#include "spmm/io.hpp"
#include "spmm/kernel.hpp"
#include "spmm/matrix_market.hpp"
#include "spmm/native.hpp"
#include "spmm/oracle.hpp"
#include "spmm/reduce_op.hpp"
#include "spmm/simt.hpp"
#include "spmm/stats.hpp"
