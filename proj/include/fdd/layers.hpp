#pragma once

#include <vector>

#include "fdd/autodiff.hpp"
#include "fdd/rng.hpp"

namespace fdd::num {

enum class Mode { train, infer };

// Affine map x W + b with W stored (in x out).
struct Linear {
  Tensor weight;
  Tensor bias;  // empty when bias-free

  static Linear init(std::size_t in, std::size_t out, bool with_bias, Rng& rng);
  std::size_t in_dim() const { return weight.shape()[0]; }
  std::size_t out_dim() const { return weight.shape()[1]; }
  Var forward(Binder& b, const Var& x) const;
  void collect(std::vector<Tensor*>& out);
};

// Per-feature batch normalization with learnable scale/shift and running stats.
struct BatchNorm {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  static BatchNorm init(std::size_t width);
  // Normalizes with batch statistics and folds them into the running stats.
  Var train(Binder& b, const Var& x);
  Var infer(Binder& b, const Var& x) const;
  void collect(std::vector<Tensor*>& out);
};

}  // namespace fdd::num
