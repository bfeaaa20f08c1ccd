#include "lsat/adam.hpp"

#include <cmath>

#include "lsat/errors.hpp"
#include "lsat/linalg.hpp"

namespace lsat {

AdamState::AdamState(std::string param_name, Index rows, Index cols, AdamOptions options)
    : name_(std::move(param_name)),
      options_(options),
      m_(Matrix::Zero(rows, cols)),
      v_(Matrix::Zero(rows, cols)) {}

void AdamState::update(Matrix& param, const Matrix& grad) {
  if (param.rows() != m_.rows() || param.cols() != m_.cols() || grad.rows() != m_.rows() ||
      grad.cols() != m_.cols())
    throw DimensionError("adam '" + name_ + "': param " + shape_str(param) + ", grad " +
                         shape_str(grad) + ", state " + shape_str(m_));
  if (!grad.allFinite())
    throw NumericError("adam '" + name_ + "': non-finite gradient");

  ++step_;
  const AdamOptions& o = options_;
  if (o.weight_decay != 0.0) param -= (o.learning_rate * o.weight_decay) * param;

  m_ = o.beta1 * m_ + (1.0 - o.beta1) * grad;
  v_ = o.beta2 * v_ + (1.0 - o.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step_));
  // param -= lr * mhat / (sqrt(vhat) + eps)
  param.array() -= o.learning_rate * (m_.array() / bc1) /
                   ((v_.array() / bc2).sqrt() + o.epsilon);
  ensure_finite(param, "adam '" + name_ + "' updated parameter");
}

}  // namespace lsat
