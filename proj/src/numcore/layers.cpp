#include "fdd/layers.hpp"

#include <cmath>

namespace fdd::num {

Linear Linear::init(std::size_t in, std::size_t out, bool with_bias, Rng& rng) {
  Linear l;
  l.weight = Tensor({in, out}, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : l.weight.data()) w = rng.uniform(-bound, bound);
  if (with_bias) l.bias = Tensor({out}, 0.0);
  return l;
}

Var Linear::forward(Binder& b, const Var& x) const {
  Var y = matmul(x, b.bind(weight));
  return bias.empty() ? y : add_bias(y, b.bind(bias));
}

void Linear::collect(std::vector<Tensor*>& out) {
  out.push_back(&weight);
  if (!bias.empty()) out.push_back(&bias);
}

BatchNorm BatchNorm::init(std::size_t width) {
  BatchNorm bn;
  bn.gamma = Tensor({width}, 1.0);
  bn.beta = Tensor({width}, 0.0);
  bn.running_mean = Tensor({width}, 0.0);
  bn.running_var = Tensor({width}, 1.0);
  return bn;
}

Var BatchNorm::infer(Binder& b, const Var& x) const {
  return batch_norm_infer(x, b.bind(gamma), b.bind(beta), running_mean, running_var, eps);
}

Var BatchNorm::train(Binder& b, const Var& x) {
  BatchStats stats;
  Var y = batch_norm_train(x, b.bind(gamma), b.bind(beta), eps, &stats);
  const double n = static_cast<double>(x->value.rows());
  const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
  for (std::size_t j = 0; j < running_mean.size(); ++j) {
    running_mean[j] = momentum * running_mean[j] + (1.0 - momentum) * stats.mean[j];
    running_var[j] = momentum * running_var[j] + (1.0 - momentum) * stats.var[j] * unbias;
  }
  return y;
}

void BatchNorm::collect(std::vector<Tensor*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

}  // namespace fdd::num
