#pragma once

#include <span>
#include <vector>

#include "fdd/channelgen.hpp"
#include "fdd/cmatrix.hpp"
#include "fdd/pilotnet.hpp"
#include "fdd/rvq.hpp"

namespace fdd::base {

struct ZfResult {
  CMatrix w;                 // M x K
  bool regularized = false;  // set when H^H H was singular and a ridge was added
};

// Columns of M = H (H^H H)^{-1} scaled to power P/K each, where H holds h_k as
// column k. A rank-deficient H falls back to (H^H H + delta I)^{-1} with
// delta = 1e-9 * trace(H^H H) / K.
ZfResult zf_precode(const CMatrix& h, double power);

struct Estimate {
  std::vector<cplx> h;
  bool pseudo_inverse = false;  // the inner matrix was singular
};

// h_hat = C X (X^H C X + noise_power I)^{-1} y for y = X^H h + n.
Estimate lmmse_estimate(std::span<const cplx> y, const pilot::PilotMatrix& x, const CMatrix& cov,
                        double noise_power);

// Least squares h_hat = (X X^H)^{-1} X y; needs L >= M and a full-rank pilot.
std::vector<cplx> ls_estimate(std::span<const cplx> y, const pilot::PilotMatrix& x);

// (1/n) sum_i h_i h_i^H over the listed samples.
CMatrix sample_covariance(const chan::ChannelDataset& data, std::span<const std::size_t> indices);

// Channel vectors as [Re h; Im h] rows, the form the Lloyd baseline quantizes.
num::Tensor stack_real(const chan::ChannelDataset& data, std::span<const std::size_t> indices);
std::vector<double> stack_real(std::span<const cplx> h);
std::vector<cplx> unstack_real(std::span<const double> v);

// RVQ codebook over stacked-real channels, each tier fitted by Lloyd's algorithm
// on the residuals of the previous tiers.
rvq::LloydRvqResult train_lloyd_feedback(const chan::ChannelDataset& data, std::span<const std::size_t> indices,
                                         const std::vector<std::size_t>& tier_bits, Rng& rng,
                                         std::size_t max_iter = 50);

// Quantize every user's channel with `codebook`, then zero-force on the reconstructions.
ZfResult lloyd_feedback_zf(const CMatrix& h, const rvq::RvqCodebook& codebook, double power);

}  // namespace fdd::base
