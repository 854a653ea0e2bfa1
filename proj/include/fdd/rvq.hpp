#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fdd/autodiff.hpp"
#include "fdd/rng.hpp"

namespace fdd::rvq {

using num::Tensor;
using num::Var;

// One RVQ stage: 2^bits codewords stored as rows (2^bits x D).
struct Tier {
  std::size_t bits = 0;
  Tensor codewords;
  bool frozen = false;

  std::size_t size() const { return codewords.rows(); }
  std::size_t dim() const { return codewords.cols(); }
  // Entries i.i.d. uniform in [-1/sqrt(D), 1/sqrt(D)].
  static Tier random(std::size_t bits, std::size_t dim, Rng& rng);
};

struct RvqCodebook {
  std::size_t dim = 0;
  std::vector<Tier> tiers;

  std::size_t total_bits() const;
  std::size_t total_codewords() const;
  RvqCodebook truncated(std::size_t n_tiers) const;
  void validate() const;
};

// Concatenated per-tier indices, big-endian within each tier.
struct FeedbackBits {
  std::vector<std::uint8_t> bits;  // one 0/1 entry per bit

  std::size_t size() const { return bits.size(); }
  // 8 bits per byte, MSB first, zero-padded tail.
  std::vector<std::uint8_t> packed() const;
  static FeedbackBits unpack(std::span<const std::uint8_t> bytes, std::size_t n_bits);
  friend bool operator==(const FeedbackBits&, const FeedbackBits&) = default;
};

struct Encoding {
  FeedbackBits bits;
  std::vector<std::size_t> indices;             // zero-based, one per tier
  std::vector<std::vector<double>> residuals;   // r^0 = v, ..., r^N
};

// Index of the codeword nearest to `r` in squared distance; ties go to the lowest index.
std::size_t nearest(const Tensor& codewords, std::span<const double> r);

Encoding encode(std::span<const double> v, const RvqCodebook& cb);
std::vector<double> decode(const FeedbackBits& bits, const RvqCodebook& cb);
std::vector<double> decode_indices(std::span<const std::size_t> indices, const RvqCodebook& cb);

// `index` is one-based in [1, 2^bits]; the bit vector encodes index-1.
std::vector<std::uint8_t> binarize(std::size_t index, std::size_t bits);
std::size_t debinarize(std::span<const std::uint8_t> bits);

struct CodewordCount {
  std::uint64_t rvq_total = 0;
  std::uint64_t flat_total = 0;
  double ratio = 0.0;
};
// Equal allocation: N * 2^(B/N) codewords versus 2^B for a single flat codebook.
CodewordCount codeword_count(std::size_t total_bits, std::size_t tiers);

// Noise-substitution surrogate for training. Each row v of `v` is quantized
// with the codebook (selection is not differentiated) and replaced by
// v + |v - v_hat| u/|u| with u ~ N(0, I) held constant. Gradients reach v
// directly and through |v - v_hat|, hence the selected codewords.
struct NsvqOutput {
  Var v_train;
  Tensor v_hat;                                  // hard quantization, rows x D
  std::vector<std::vector<std::size_t>> indices; // per row, per tier
};
// Only the first `active_tiers` tiers take part (all of them by default).
NsvqOutput nsvq_forward(num::Binder& b, const Var& v, const RvqCodebook& cb, Rng& rng,
                        std::size_t active_tiers = SIZE_MAX);
std::vector<double> nsvq_forward(std::span<const double> v, const RvqCodebook& cb, Rng& rng);

// ---- classical codebook construction -------------------------------------

// k-means++ seeding. Each new center is the best of `trials` D^2-weighted
// draws by resulting potential (0 picks 2 + floor(ln k); 1 is the classic rule).
Tensor kmeans_pp_init(const Tensor& data, std::size_t k, Rng& rng, std::size_t trials = 0);

struct KMeansResult {
  Tensor centroids;
  std::vector<std::size_t> assignment;
  std::vector<double> distortion;  // mean squared error after each iteration
};
// Lloyd iterations from k-means++ seeding. An empty cluster is re-seeded at
// the point farthest from its current centroid.
KMeansResult kmeans(const Tensor& data, std::size_t k, Rng& rng, std::size_t max_iter = 50);

struct LloydRvqResult {
  RvqCodebook codebook;
  std::vector<double> tier_distortion;              // mean squared residual after tier n
  std::vector<std::vector<double>> iteration_history;
};
// Tier n is fitted by k-means on the residuals left by tiers 1..n-1.
LloydRvqResult lloyd_train(const Tensor& data, const std::vector<std::size_t>& tier_bits, Rng& rng,
                           std::size_t max_iter = 50);

}  // namespace fdd::rvq
