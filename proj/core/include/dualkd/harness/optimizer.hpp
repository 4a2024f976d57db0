#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dualkd/diffcore/serialize.hpp"
#include "dualkd/harness/config.hpp"

namespace dualkd::harness {

using diff::Tensor;

struct ParamGroup {
  std::vector<diff::NamedTensor> params;
  double lr = 0.0;
};

// StableAdamW with an optional AMSGrad accumulator. Per parameter tensor at
// step t (1-based):
//
//   m  = b1 m + (1 - b1) g
//   v  = b2 v + (1 - b2) g^2
//   u  = amsgrad ? max(u, v) : v
//   m_hat = m / (1 - b1^t),  v_hat = u / (1 - b2^t)
//   rms = sqrt(mean(g^2 / max(v_hat, eps^2)))
//   lr_t = update_clamp ? lr / max(1, rms) : lr
//   p -= lr_t * (wd * p + m_hat / (sqrt(v_hat) + eps))
class StableAdamW {
 public:
  StableAdamW(std::vector<ParamGroup> groups, const OptimizerConfig& config);

  // Reads the gradient slot of every parameter (missing = zero). Returns
  // false and leaves all state untouched if any gradient is non-finite.
  bool step();
  void zero_grad();

  std::size_t steps() const { return steps_; }
  std::size_t skipped() const { return skipped_; }

  // Moments as named tensors "opt.m.<name>", "opt.v.<name>", "opt.u.<name>"
  // plus "opt.step" and "opt.skipped".
  std::vector<diff::NamedTensor> state() const;
  void load_state(const std::vector<diff::NamedTensor>& entries);

 private:
  struct Slot {
    diff::NamedTensor param;
    double lr = 0.0;
    std::vector<double> m;
    std::vector<double> v;
    std::vector<double> u;
  };

  OptimizerConfig config_;
  std::vector<Slot> slots_;
  std::size_t steps_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace dualkd::harness
