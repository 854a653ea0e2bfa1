#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdd/model.hpp"

// Reference implementations written independently of the library, and the
// quick checks built on them. Shared by the unit tests, the acceptance runner
// and the CLI selftest.
namespace fdd::checks {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- oracles ------------------------------------------------------------------

// Per-tier exhaustive argmin over squared distance; the first minimum wins.
struct BruteEncoding {
  std::vector<std::size_t> indices;
  std::vector<double> reconstruction;
};
BruteEncoding brute_rvq(const std::vector<double>& v, const rvq::RvqCodebook& cb);

// MSB-first bit pattern of `index` over `bits` bits.
std::vector<std::uint8_t> brute_bits(std::size_t index, std::size_t bits);

// log2(1 + SINR_k) straight from the definition.
std::vector<double> brute_rates(const CMatrix& h, const CMatrix& w, double noise_power);

// max_{j != k} |h_k^H w_j|.
double max_off_diagonal(const CMatrix& h, const CMatrix& w);

// Orthonormal complex columns by Gram-Schmidt on Gaussian draws.
CMatrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng);
CMatrix random_channel(std::size_t rows, std::size_t cols, Rng& rng);

// Plain Lloyd iterations from k-means++ seeding on the rows of `data`.
num::Tensor lloyd_oracle(const num::Tensor& data, std::size_t k, Rng& rng, std::size_t iters = 100);
// Mean over rows of the squared distance to the nearest center.
double nearest_distortion(const num::Tensor& data, const num::Tensor& centers);

// ---- fixtures -----------------------------------------------------------------

// M=4, K=2, L=4, D=8, d=4 with small widths.
model::ModelConfig tiny_config();
// A batch of i.i.d. CN(0, 1) channels and CN(0, noise_power) pilot noise.
model::Batch random_batch(std::size_t samples, std::size_t users, std::size_t antennas,
                          std::size_t pilot_length, double noise_power, Rng& rng);
// Same batch with every sample's users reordered: new user i is old user perm[i].
model::Batch permute_users(const model::Batch& b, const std::vector<std::size_t>& perm);

// ---- checks -----------------------------------------------------------------

Outcome codeword_arithmetic();
Outcome rvq_oracle(std::size_t trials, std::uint64_t seed);
Outcome gradient_suite(double tolerance);
Outcome nsvq_exactness(std::size_t draws, std::uint64_t seed);
Outcome egat_equivariance(std::size_t instances, std::uint64_t seed);
Outcome zf_correctness(std::size_t instances, std::uint64_t seed);
Outcome dkm_quality(std::size_t codebooks, std::uint64_t seed);

}  // namespace fdd::checks
