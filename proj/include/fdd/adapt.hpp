#pragma once

#include <cstdint>

#include "fdd/trainer.hpp"

namespace fdd::adapt {

using num::Tensor;

// B_deploy = reserved * tier_bits + remainder_bits with remainder_bits < tier_bits.
struct ShrinkPlan {
  std::size_t reserved = 0;        // N0, leading tiers kept as they are
  std::size_t remainder_bits = 0;  // B_r, width of the compressed extra tier
  std::size_t source_tier = 0;     // zero-based index of the tier compressed into the extra one
  double epsilon = 1e-6;
};

// Throws std::invalid_argument for B_deploy == 0 and for B_deploy >= tiers * tier_bits ("use expand").
ShrinkPlan plan_shrink(std::size_t b_deploy, std::size_t tier_bits, std::size_t tiers, double epsilon = 1e-6);

struct DkmOptions {
  double epsilon = 1e-6;
  std::size_t max_iter = 500;
  // Softmax over -distance / tau. With `relative_temperature` set, tau is
  // `temperature` times the mean nearest-neighbour spacing of the source
  // codewords, which makes the result independent of codebook scale.
  // relative_temperature = false with temperature = 1 is the bare softmax.
  double temperature = 0.05;
  bool relative_temperature = true;
  // Independent k-means++ seedings; the run with the lowest compression
  // distortion is kept.
  std::size_t restarts = 16;
};

struct DkmResult {
  Tensor codewords;            // 2^bits x D
  Tensor attention;            // source x target weights of the last iteration
  double tau = 1.0;             // effective softmax temperature
  std::size_t iterations = 0;
  double displacement = 0.0;   // relative squared change of the returned iterate
  bool converged = false;      // false: the iteration cap was hit (warning)
};

// Row-softmax of -|q_i - c_j| / temperature over targets j.
Tensor dkm_attention(const Tensor& source, const Tensor& centers, double temperature = 1.0);

// Mean over codewords of the distance to the nearest other codeword (0 for fewer than two).
double mean_spacing(const Tensor& codewords);

// Soft k-means of the source codewords into 2^bits centers, seeded by k-means++
// once per restart.
// Each step sets c_j = sum_i A(i,j) q_i / sum_i A(i,j) and stops once
// |C_new - C|_F^2 / |C|_F^2 <= epsilon (absolute change when |C| = 0).
DkmResult dkm_compress(const Tensor& source, std::size_t bits, Rng& rng, const DkmOptions& opts = {});
DkmResult dkm_compress_from(const Tensor& source, Tensor init, const DkmOptions& opts = {});

// Mean over source rows of the squared distance to the nearest compressed codeword.
double compression_distortion(const Tensor& source, const Tensor& compressed);

// New model whose codebook carries exactly b_deploy bits: the first N0 tiers
// plus, when B_r > 0, tier N0+1 compressed to 2^B_r codewords. No network
// parameter changes. b_deploy equal to the full budget returns a copy.
model::TransceiverModel shrink(const model::TransceiverModel& m, std::size_t b_deploy, std::uint64_t seed,
                               const DkmOptions& opts = {}, DkmResult* report = nullptr);

// Appends `extra_tiers` randomly initialized tiers and trains them stage by
// stage; existing tiers stay frozen. The epoch budget in `cfg` is split over
// the new stages.
model::TransceiverModel expand(const model::TransceiverModel& m, std::size_t extra_tiers,
                               const chan::ChannelDataset& data, const train::TrainConfig& cfg);

}  // namespace fdd::adapt
