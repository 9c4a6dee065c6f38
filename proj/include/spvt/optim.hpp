#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spvt/errors.hpp"
#include "spvt/tensor.hpp"

namespace spvt {

// lr_end + 0.5 * (lr_start - lr_end) * (1 + cos(pi * step / total)),
// with step clamped into [0, total].
inline double cosine_lr(uint64_t step, uint64_t total, double lr_start, double lr_end) {
  if (total < 1) total = 1;
  if (step > total) step = total;
  double frac = static_cast<double>(step) / static_cast<double>(total);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(3.141592653589793 * frac));
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Owns first/second moment buffers shaped like
// the parameters; the step counter increases by exactly one per update.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  uint64_t step_count() const { return t_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  // Applies one update using the gradients accumulated in the parameters.
  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (p.grad().size() != p.data().size()) continue;  // never touched by backward
      auto& g = p.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(g[i]))
          throw NumericError("non-finite gradient in parameter " + std::to_string(k));
        m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g[i];
        v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        double mhat = m_[k][i] / bc1;
        double vhat = v_[k][i] / bc2;
        p.data()[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  uint64_t t_ = 0;
};

}  // namespace spvt
