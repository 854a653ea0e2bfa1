#pragma once

#include <complex>
#include <span>
#include <vector>

#include "fdd/autodiff.hpp"
#include "fdd/rng.hpp"

namespace fdd::pilot {

using cplx = std::complex<double>;
using num::Tensor;

// Learnable complex M x L pilot, stored as real/imaginary parts.
struct PilotMatrix {
  Tensor re;
  Tensor im;
  double power = 1.0;

  std::size_t antennas() const { return re.shape()[0]; }
  std::size_t length() const { return re.shape()[1]; }
  cplx at(std::size_t m, std::size_t l) const { return {re.at(m, l), im.at(m, l)}; }

  // I.i.d. complex Gaussian entries, then column-normalized.
  static PilotMatrix random(std::size_t antennas, std::size_t length, double power, Rng& rng);
  void collect(std::vector<Tensor*>& out);
};

// Rescales every column to squared norm `power`. Throws on a zero column.
void normalize_pilot(PilotMatrix& x);

// y = X^H h + n with n ~ CN(0, noise_power I); equivalently y^H = h^H X + n^H.
std::vector<cplx> receive_pilot(std::span<const cplx> h, const PilotMatrix& x, double noise_power,
                                Rng& rng);

// Batched, differentiable in the pilot. Rows of h_re/h_im are channel
// realizations (rows x M); noise tensors are rows x L and held constant.
num::CVar receive_pilot(num::Binder& b, const PilotMatrix& x, const Tensor& h_re,
                        const Tensor& h_im, const Tensor& noise_re, const Tensor& noise_im);

// CN(0, noise_power) samples, real and imaginary parts each N(0, noise_power/2).
void draw_noise(Tensor& re, Tensor& im, double noise_power, Rng& rng);

}  // namespace fdd::pilot
