#pragma once

#include <complex>
#include <span>
#include <vector>

#include "fdd/layers.hpp"

namespace fdd::feature {

using num::Mode;
using num::Tensor;
using num::Var;

// Shared per-user extractor: [Re y; Im y] -> (Linear, BatchNorm, Mish) x hidden
// -> Linear -> Tanh. Output entries lie in (-1, 1).
struct FeatureExtractor {
  std::vector<num::Linear> layers;
  std::vector<num::BatchNorm> norms;

  static FeatureExtractor init(std::size_t pilot_length, const std::vector<std::size_t>& hidden,
                               std::size_t feature_dim, Rng& rng);

  std::size_t input_dim() const { return layers.front().in_dim(); }
  std::size_t output_dim() const { return layers.back().out_dim(); }

  // Rows of `y` are received pilots; returns rows x D features.
  Var forward(num::Binder& b, const num::CVar& y, Mode mode);
  Var infer(num::Binder& b, const num::CVar& y) const;
  std::vector<double> extract(std::span<const std::complex<double>> y) const;

  void collect(std::vector<Tensor*>& out);
};

}  // namespace fdd::feature
