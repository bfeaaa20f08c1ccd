#pragma once

#include <string>
#include <string_view>

#include "lsat/errors.hpp"
#include "lsat/types.hpp"

namespace lsat {

std::string shape_str(const Matrix& m);

// Throws NumericError if any entry of m is NaN/Inf. Every public
// operation in this module runs its result through this check; a
// non-finite value is an error, never a silent output.
void ensure_finite(const Matrix& m, std::string_view context);

// Checked product a*b. Shape mismatch raises DimensionError carrying
// both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

}  // namespace lsat
