#pragma once

#include <string>
#include <vector>

#include "sketchchain/common.hpp"

namespace skch {

// Matrix Market I/O. Writes dense "array real general" files; reads both
// array and coordinate format (coordinate is densified). Throws numeric_error
// on malformed input, which the CLI maps to its I/O exit code.
void write_matrix_market(const std::string& path, const DenseMatrix& a);
void write_matrix_market(const std::string& path, const Vector& v);
DenseMatrix read_matrix_market(const std::string& path);
Vector read_matrix_market_vector(const std::string& path);

// Sidecar spectrum files: one value per line, non-increasing order.
void write_spectrum(const std::string& path, const std::vector<double>& sigma);
std::vector<double> read_spectrum(const std::string& path);

}  // namespace skch
