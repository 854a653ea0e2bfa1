#pragma once

#include <span>
#include <vector>

#include "fdd/cmatrix.hpp"
#include "fdd/layers.hpp"

namespace fdd::egat {

using num::Tensor;
using num::Var;

struct EgatConfig {
  std::size_t edge_input = 4;   // D / M
  std::size_t init_hidden = 64;
  std::size_t state_dim = 16;   // d
  std::size_t out_hidden = 64;
  std::size_t layers = 3;       // G
  double alpha = 0.1;
  double beta = 0.1;
  bool edge_bias = false;       // biases on f1..f5
};

// K x M grid of d-dimensional edge states; row k*M + m holds z_{k,m}.
struct EdgeStateGrid {
  std::size_t users = 0;
  std::size_t antennas = 0;
  Tensor z;

  std::size_t dim() const { return z.cols(); }
  std::span<const double> at(std::size_t k, std::size_t m) const {
    return z.data().subspan((k * antennas + m) * dim(), dim());
  }
};

// Complex M x K precoder with w_k as column k.
using PrecodingMatrix = CMatrix;

struct UpdateLayer {
  num::Linear f1, f2, f3, f4, f5;
  void collect(std::vector<Tensor*>& out);
};

// Edge graph attention precoder. Every map is shared by all edges, so one
// parameter set serves any number of users.
struct EgatParams {
  EgatConfig config;
  num::Linear init_in, init_out;   // f0
  std::vector<UpdateLayer> updates;
  num::Linear head_in, head_out;   // f_N

  static EgatParams init(const EgatConfig& cfg, Rng& rng);

  // Batched graph. `v` has one row per (sample, user) with D columns; the
  // edge rows are ordered (sample, user, antenna).
  Var init_edges(num::Binder& b, const Var& v, std::size_t antennas) const;
  Var update(num::Binder& b, const Var& z, std::size_t layer, std::size_t users,
             std::size_t antennas) const;
  // Returns edge rows x 2 (real, imaginary) with every sample's block scaled
  // to Frobenius norm sqrt(power). Throws std::domain_error("degenerate
  // precoder") if a sample's output is identically zero.
  Var finalize(num::Binder& b, const Var& z, std::size_t users, std::size_t antennas,
               double power) const;
  Var forward(num::Binder& b, const Var& v, std::size_t users, std::size_t antennas,
              double power) const;

  // Single-instance views of the same computation.
  EdgeStateGrid init_edges(std::span<const std::vector<double>> features, std::size_t antennas) const;
  std::vector<double> attention(const EdgeStateGrid& grid, std::size_t layer, std::size_t k,
                                std::size_t j) const;
  EdgeStateGrid update_layer(const EdgeStateGrid& grid, std::size_t layer) const;
  PrecodingMatrix finalize(const EdgeStateGrid& grid, double power) const;
  PrecodingMatrix precode(std::span<const std::vector<double>> features, std::size_t antennas,
                          double power) const;

  void collect(std::vector<Tensor*>& out);
};

// out_{k,m} = sum_{j != k} a_{kj} * f3_{j,m} with a_{kj} = (1/M) sum_m f4_{k,m} * f5_{j,m},
// evaluated per sample over rows ordered (sample, user, antenna).
Var user_attention(const Var& f3, const Var& f4, const Var& f5, std::size_t users,
                   std::size_t antennas);

// Converts the rows x 2 output of `finalize` (a single sample) into W.
PrecodingMatrix to_precoder(const Tensor& edges, std::size_t users, std::size_t antennas);

}  // namespace fdd::egat
