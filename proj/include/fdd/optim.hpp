#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fdd/tensor.hpp"

namespace fdd::num {

struct AdamConfig {
  double base_lr = 1e-3;
  double min_lr = 1e-5;
  double warmup_frac = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::size_t total_steps = 1;
};

// Adam with linear warmup from zero followed by cosine decay to min_lr.
// Update t (1-based) uses lr_at(t), so the last update runs at min_lr.
class Adam {
 public:
  explicit Adam(AdamConfig cfg);

  double lr_at(std::size_t step) const;
  std::size_t warmup_steps() const { return warmup_; }
  std::size_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  // Applies one update. `params` and `grads` are index-aligned and must keep
  // the same order across calls. Returns the pre-clipping global grad norm.
  double step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);

  struct State {
    std::size_t t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
  };
  State state() const { return {t_, m_, v_}; }
  void set_state(State s);

 private:
  AdamConfig cfg_;
  std::size_t warmup_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace fdd::num
