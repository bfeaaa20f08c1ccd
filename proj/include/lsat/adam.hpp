#pragma once

#include <cstdint>
#include <string>

#include "lsat/types.hpp"

namespace lsat {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled weight decay: param <- param - lr*wd*param is applied
  // before the Adam delta, so wd is independent of the gradient scale.
  double weight_decay = 0.0;
};

// Per-parameter Adam state with bias correction. Moments always match
// the parameter shape; the step counter increases by one per update.
class AdamState {
 public:
  AdamState(std::string param_name, Index rows, Index cols, AdamOptions options = {});

  // One optimizer step in place. Non-finite gradient entries raise
  // NumericError naming the parameter.
  void update(Matrix& param, const Matrix& grad);

  std::int64_t step() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const std::string& name() const { return name_; }
  const Matrix& first_moment() const { return m_; }
  const Matrix& second_moment() const { return v_; }

 private:
  std::string name_;
  AdamOptions options_;
  Matrix m_;
  Matrix v_;
  std::int64_t step_ = 0;
};

}  // namespace lsat
