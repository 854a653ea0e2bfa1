#include "fdd/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace fdd::num {

Adam::Adam(AdamConfig cfg) : cfg_(cfg) {
  if (cfg_.total_steps == 0) throw std::invalid_argument("Adam: total_steps must be >= 1");
  const auto w = static_cast<std::size_t>(std::llround(cfg_.warmup_frac * static_cast<double>(cfg_.total_steps)));
  warmup_ = std::clamp<std::size_t>(w, 1, cfg_.total_steps);
}

double Adam::lr_at(std::size_t step) const {
  const std::size_t total = cfg_.total_steps;
  if (step < warmup_) return cfg_.base_lr * static_cast<double>(step) / static_cast<double>(warmup_);
  if (step >= total) return cfg_.min_lr;
  const double progress =
      static_cast<double>(step - warmup_) / static_cast<double>(total - warmup_);
  return cfg_.min_lr +
         0.5 * (cfg_.base_lr - cfg_.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

double Adam::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Adam::step: params/grads size mismatch");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape(), 0.0);
      v_.emplace_back(p->shape(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam::step: parameter set changed");

  double sq = 0.0;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k]->size() != params[k]->size()) {
      throw ShapeError("Adam::step: grad " + shape_str(grads[k]->shape()) + " vs param " +
                       shape_str(params[k]->shape()));
    }
    if (!grads[k]->all_finite()) {
      throw NumericalError("Adam::step: non-finite gradient for parameter #" + std::to_string(k) +
                           " at step " + std::to_string(t_ + 1));
    }
    sq += grads[k]->sq_norm();
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

  ++t_;
  const double lr = lr_at(t_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
    }
  }
  return norm;
}

void Adam::set_state(State s) {
  t_ = s.t;
  m_ = std::move(s.m);
  v_ = std::move(s.v);
}

}  // namespace fdd::num
