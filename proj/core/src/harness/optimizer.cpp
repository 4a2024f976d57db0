#include "dualkd/harness/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dualkd/errors.hpp"

namespace dualkd::harness {

StableAdamW::StableAdamW(std::vector<ParamGroup> groups, const OptimizerConfig& config)
    : config_(config) {
  config_.validate();
  for (ParamGroup& g : groups) {
    for (diff::NamedTensor& p : g.params) {
      const std::size_t n = p.tensor.numel();
      slots_.push_back({p, g.lr, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                        std::vector<double>(n, 0.0)});
    }
  }
}

bool StableAdamW::step() {
  for (const Slot& s : slots_) {
    if (!s.param.tensor.has_grad()) continue;
    for (double g : s.param.tensor.grad()) {
      if (!std::isfinite(g)) {
        ++skipped_;
        return false;
      }
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);
  const double eps = config_.eps;
  for (Slot& s : slots_) {
    Tensor& p = s.param.tensor;
    const std::size_t n = p.numel();
    const bool has = p.has_grad();
    const std::span<const double> grad = has ? p.grad() : std::span<const double>{};
    double ratio_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = has ? grad[i] : 0.0;
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * g;
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * g * g;
      s.u[i] = config_.amsgrad ? std::max(s.u[i], s.v[i]) : s.v[i];
      const double v_hat = s.u[i] / bc2;
      ratio_sum += g * g / std::max(v_hat, eps * eps);
    }
    double lr = s.lr;
    if (config_.update_clamp && n > 0) {
      const double rms = std::sqrt(ratio_sum / static_cast<double>(n));
      lr /= std::max(1.0, rms);
    }
    std::span<double> w = p.mutable_values();
    for (std::size_t i = 0; i < n; ++i) {
      const double m_hat = s.m[i] / bc1;
      const double v_hat = s.u[i] / bc2;
      w[i] -= lr * (config_.weight_decay * w[i] + m_hat / (std::sqrt(v_hat) + eps));
    }
  }
  return true;
}

void StableAdamW::zero_grad() {
  for (Slot& s : slots_) s.param.tensor.clear_grad();
}

std::vector<diff::NamedTensor> StableAdamW::state() const {
  std::vector<diff::NamedTensor> out;
  out.push_back({"opt.step", Tensor::scalar(static_cast<double>(steps_))});
  out.push_back({"opt.skipped", Tensor::scalar(static_cast<double>(skipped_))});
  for (const Slot& s : slots_) {
    const diff::Shape& shape = s.param.tensor.shape();
    out.push_back({"opt.m." + s.param.name, Tensor::from(shape, s.m)});
    out.push_back({"opt.v." + s.param.name, Tensor::from(shape, s.v)});
    out.push_back({"opt.u." + s.param.name, Tensor::from(shape, s.u)});
  }
  return out;
}

void StableAdamW::load_state(const std::vector<diff::NamedTensor>& entries) {
  std::map<std::string, const Tensor*> by_name;
  for (const diff::NamedTensor& e : entries) by_name[e.name] = &e.tensor;
  const auto fetch = [&](const std::string& name, std::size_t n) -> std::vector<double> {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("optimizer state lacks " + name);
    if (it->second->numel() != n) throw DataError("optimizer state " + name + " has wrong size");
    const auto v = it->second->values();
    return {v.begin(), v.end()};
  };
  steps_ = static_cast<std::size_t>(fetch("opt.step", 1)[0]);
  skipped_ = static_cast<std::size_t>(fetch("opt.skipped", 1)[0]);
  for (Slot& s : slots_) {
    const std::size_t n = s.param.tensor.numel();
    s.m = fetch("opt.m." + s.param.name, n);
    s.v = fetch("opt.v." + s.param.name, n);
    s.u = fetch("opt.u." + s.param.name, n);
  }
}

}  // namespace dualkd::harness
