#include "lsat/linalg.hpp"

namespace lsat {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void ensure_finite(const Matrix& m, std::string_view context) {
  if (!m.allFinite())
    throw NumericError("non-finite entries in " + std::string(context));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul shape mismatch: " + shape_str(a) + " * " + shape_str(b));
  Matrix r = a * b;
  ensure_finite(r, "matmul result");
  return r;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + " shape mismatch: " + shape_str(a) + " vs " +
                         shape_str(b));
}

}  // namespace

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix r = a + b;
  ensure_finite(r, "add result");
  return r;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix r = a - b;
  ensure_finite(r, "sub result");
  return r;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix r = a.cwiseProduct(b);
  ensure_finite(r, "hadamard result");
  return r;
}

Matrix scale(const Matrix& a, double c) {
  Matrix r = a * c;
  ensure_finite(r, "scale result");
  return r;
}

}  // namespace lsat
