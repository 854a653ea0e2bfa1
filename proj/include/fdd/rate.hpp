#pragma once

#include <vector>

#include "fdd/autodiff.hpp"
#include "fdd/cmatrix.hpp"

namespace fdd::rate {

struct SumRate {
  double total = 0.0;
  std::vector<double> per_user;
};

// R_k = log2(1 + |h_k^H w_k|^2 / (sum_{j != k} |h_k^H w_j|^2 + noise_power)).
// `h` and `w` are M x K with user k in column k.
SumRate sum_rate(const CMatrix& h, const CMatrix& w, double noise_power);

// Batched and differentiable in the precoder. Channel rows are ordered
// (sample, user) with M columns; precoder rows are ordered (sample, user,
// antenna) with columns (real, imaginary). Returns per-user rates, one row
// per (sample, user).
num::Var user_rates(const num::Tensor& h_re, const num::Tensor& h_im, const num::Var& w,
                    std::size_t users, double noise_power);

}  // namespace fdd::rate
