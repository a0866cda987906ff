#pragma once

#include <string>

#include "tsfactor/dense_matrix.hpp"
#include "tsfactor/runtime.hpp"

namespace tsf {

// TSMA container: "TSMA" magic, u32 version (1), u64 rows, u64 cols, u8 dtype
// (0 = real64), all little-endian, followed by rows*cols row-major real64
// values. Total length is exactly 25 + 8*rows*cols bytes.

void write_matrix(const std::string& path, const DenseMatrix& m);

/// Exact inverse of write_matrix. Rejects bad magic/version/dtype (format
/// error), truncated or oversized payloads (length error), and non-finite
/// values (data error).
DenseMatrix read_matrix(const std::string& path);

/// Streaming ingestion: reads each partition's row range directly into its
/// block, so the full matrix never lives in one buffer. Block sizes match
/// partition(read_matrix(path), partitions) exactly.
DistMatrix read_matrix_partitioned(const std::string& path, std::size_t partitions);

/// Rectangular numeric CSV. Ragged rows and unparseable fields raise a parse
/// error with the 1-based line number; non-finite values are rejected.
DenseMatrix read_csv(const std::string& path, char delimiter = ',');

void write_csv(const std::string& path, const DenseMatrix& m, char delimiter = ',');

}  // namespace tsf
