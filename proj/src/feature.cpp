#include "fdd/feature.hpp"

#include <array>
#include <string>

namespace fdd::feature {

FeatureExtractor FeatureExtractor::init(std::size_t pilot_length,
                                        const std::vector<std::size_t>& hidden,
                                        std::size_t feature_dim, Rng& rng) {
  FeatureExtractor f;
  std::size_t in = 2 * pilot_length;
  for (std::size_t w : hidden) {
    f.layers.push_back(num::Linear::init(in, w, true, rng));
    f.norms.push_back(num::BatchNorm::init(w));
    in = w;
  }
  f.layers.push_back(num::Linear::init(in, feature_dim, true, rng));
  return f;
}

Var FeatureExtractor::forward(num::Binder& b, const num::CVar& y, Mode mode) {
  if (mode == Mode::infer) return infer(b, y);
  const std::array<Var, 2> parts{y.re, y.im};
  Var x = num::concat_cols(parts);
  for (std::size_t i = 0; i < norms.size(); ++i) {
    x = num::mish(norms[i].train(b, layers[i].forward(b, x)));
  }
  return num::tanh(layers.back().forward(b, x));
}

Var FeatureExtractor::infer(num::Binder& b, const num::CVar& y) const {
  const std::array<Var, 2> parts{y.re, y.im};
  Var x = num::concat_cols(parts);
  for (std::size_t i = 0; i < norms.size(); ++i) {
    x = num::mish(norms[i].infer(b, layers[i].forward(b, x)));
  }
  return num::tanh(layers.back().forward(b, x));
}

std::vector<double> FeatureExtractor::extract(std::span<const std::complex<double>> y) const {
  if (2 * y.size() != input_dim()) {
    throw num::ShapeError("extract: pilot length " + std::to_string(y.size()) +
                          " does not match extractor input " + std::to_string(input_dim()));
  }
  Tensor re({1, y.size()}), im({1, y.size()});
  for (std::size_t l = 0; l < y.size(); ++l) {
    re[l] = y[l].real();
    im[l] = y[l].imag();
  }
  num::Binder b;
  Var v = infer(b, {num::constant(re), num::constant(im)});
  return {v->value.data().begin(), v->value.data().end()};
}

void FeatureExtractor::collect(std::vector<Tensor*>& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(out);
    if (i < norms.size()) norms[i].collect(out);
  }
}

}  // namespace fdd::feature
