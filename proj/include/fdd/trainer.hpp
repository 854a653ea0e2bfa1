#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdd/model.hpp"

namespace fdd::train {

using model::Batch;
using model::ModelConfig;
using model::TransceiverModel;
using num::Tensor;
using num::Var;

enum class Strategy { progressive, e2e };

struct EpochReport {
  std::size_t stage_index = 0;
  std::size_t epoch = 0;        // 1-based within the stage
  std::size_t steps = 0;
  double mean_loss = 0.0;
  double mean_sum_rate = 0.0;   // training batches, NSVQ path
  double mean_quant_loss = 0.0;
};

struct TrainConfig {
  double lambda = 1.0;
  std::size_t batch_size = 50;      // channel realizations per batch
  std::size_t epochs = 30;          // total budget, split evenly across stages
  double snr_db = 10.0;
  std::vector<std::size_t> users{3};  // K is drawn uniformly from this set per batch
  std::uint64_t seed = 1;
  Strategy strategy = Strategy::progressive;
  num::AdamConfig adam;             // total_steps is filled in per stage
  std::string checkpoint_path;      // written after every epoch when non-empty
  std::size_t epoch_limit = 0;      // stop after this many epochs in one call (0 = no limit)
  std::size_t val_samples = 0;      // validation realizations per stage report (0 = whole split)
  // After every epoch but the last of a stage, codewords of the trainable
  // tiers that were never selected are moved next to the most used codeword.
  bool replace_unused = true;
  std::function<void(const EpochReport&)> on_epoch;

  void validate(const ModelConfig& m) const;
};

// Raised when a non-finite value appears; the model keeps its last good
// parameters and the checkpoint file (if any) holds the last finished epoch.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t stage, const std::string& what)
      : std::runtime_error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  std::size_t stage() const { return stage_; }

 private:
  std::size_t stage_;
};

// One training stage: the first `active_tiers` tiers quantize, the listed
// tiers learn, every earlier tier stays frozen.
struct Stage {
  std::size_t active_tiers = 0;
  std::vector<std::size_t> trainable_tiers;
  std::size_t epochs = 0;
};

std::vector<Stage> progressive_plan(std::size_t first_tier, std::size_t last_tier, std::size_t epochs);
std::vector<Stage> e2e_plan(std::size_t tiers, std::size_t epochs);
std::string encode_plan(const std::vector<Stage>& plan);
std::vector<Stage> decode_plan(const std::string& text);

struct LossParts {
  Var loss;                 // mean over samples of -sum_k R_k + lambda * sum_k |v_k - v_train_k|^2
  Var rate;                 // mean over samples of sum_k R_k
  Var quant;                // mean over samples of sum_k |v_k - v_train_k|^2
  std::vector<std::vector<std::size_t>> indices;  // selected codeword per row, per active tier
};

// Training-mode forward pass through pilot, extractor, NSVQ over the first
// `active_tiers` tiers of the model codebook, and EGAT.
LossParts total_loss(num::Binder& b, TransceiverModel& m, const Batch& batch, std::size_t active_tiers,
                     double lambda, double noise_power, Rng& rng);

struct Evaluation {
  double sum_rate = 0.0;    // mean over realizations
  double quant_loss = 0.0;  // mean sum_k |v_k - v_hat_k|^2
  std::vector<double> per_user;
};
// Deployment-path averages over groups of K consecutive `indices`.
Evaluation evaluate(const TransceiverModel& m, const rvq::RvqCodebook& codebook,
                    const chan::ChannelDataset& data, std::span<const std::size_t> indices,
                    std::size_t users, double snr_db, std::uint64_t seed);

class Trainer {
 public:
  Trainer(TransceiverModel& m, const chan::ChannelDataset& data, TrainConfig cfg, std::vector<Stage> plan);
  // Continues from a checkpoint written by an earlier run with the same config.
  Trainer(TransceiverModel& m, const chan::ChannelDataset& data, TrainConfig cfg,
          const model::CheckpointState& state);

  // Runs epochs until the plan is finished or `epoch_limit` is reached.
  // Returns true when the whole plan has completed.
  bool run();
  bool finished() const { return stage_ >= plan_.size(); }
  model::CheckpointState checkpoint() const;

 private:
  void run_epoch();
  void replace_unused(const std::vector<std::vector<std::size_t>>& usage);
  void finish_stage();
  void start_stage();
  std::size_t steps_per_epoch() const;

  TransceiverModel& model_;
  const chan::ChannelDataset& data_;
  TrainConfig cfg_;
  std::vector<Stage> plan_;
  std::size_t stage_ = 0;
  std::size_t epoch_ = 0;
  Rng rng_;
  std::optional<num::Adam> adam_;
  double last_loss_ = 0.0;
};

TransceiverModel train_progressive(const ModelConfig& mc, const TrainConfig& cfg,
                                   const chan::ChannelDataset& data);
TransceiverModel train_e2e(const ModelConfig& mc, const TrainConfig& cfg, const chan::ChannelDataset& data);
// Dispatches on cfg.strategy.
TransceiverModel train(const ModelConfig& mc, const TrainConfig& cfg, const chan::ChannelDataset& data);
// Loads a checkpoint and trains to the end of its plan.
TransceiverModel resume(const std::string& checkpoint, const TrainConfig& cfg, const chan::ChannelDataset& data);

}  // namespace fdd::train
