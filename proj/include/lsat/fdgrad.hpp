#pragma once

#include <cmath>
#include <string>

#include "lsat/errors.hpp"
#include "lsat/types.hpp"

namespace lsat {

// Central-difference gradient of a scalar loss with respect to one
// parameter matrix: (L(p + h*e_ij) - L(p - h*e_ij)) / 2h per entry.
// Used as the independent oracle for every hand-derived backward pass.
template <typename LossFn>
Matrix finite_diff_grad(LossFn&& loss_fn, const Matrix& param, double h) {
  if (!(h > 0.0)) throw UsageError("finite_diff_grad: h must be positive");
  Matrix grad(param.rows(), param.cols());
  Matrix probe = param;
  for (Index i = 0; i < param.rows(); ++i) {
    for (Index j = 0; j < param.cols(); ++j) {
      const double saved = probe(i, j);
      probe(i, j) = saved + h;
      const double up = loss_fn(probe);
      probe(i, j) = saved - h;
      const double down = loss_fn(probe);
      probe(i, j) = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_diff_grad: non-finite loss at entry (" + std::to_string(i) +
                           "," + std::to_string(j) + ")");
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

}  // namespace lsat
