#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdd/channelgen.hpp"
#include "fdd/cmatrix.hpp"
#include "fdd/egat.hpp"
#include "fdd/feature.hpp"
#include "fdd/optim.hpp"
#include "fdd/pilotnet.hpp"
#include "fdd/rate.hpp"
#include "fdd/rvq.hpp"

namespace fdd::model {

using num::Tensor;
using num::Var;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  std::size_t antennas = 8;       // M
  std::size_t pilot_length = 8;   // L
  std::size_t feature_dim = 32;   // D
  std::vector<std::size_t> hidden{128, 64, 32};
  std::size_t tiers = 3;          // N
  std::size_t tier_bits = 4;      // bits per tier, B = N * tier_bits
  egat::EgatConfig egat;          // edge_input is derived from D / M
  double power = 1.0;
  bool shared_extractor = true;   // false: one extractor per user slot
  std::size_t user_slots = 4;     // extractor count when not shared

  std::size_t total_bits() const { return tiers * tier_bits; }
  // Throws ConfigError on inconsistent fields (M must divide D, etc.).
  void validate() const;
  // key=value lines in a fixed order; the config hash is computed over this text.
  std::string canonical() const;
  static ModelConfig parse(const std::string& canonical_text);
};

struct StageRecord {
  std::size_t stage = 0;
  std::size_t epochs = 0;
  double train_loss = 0.0;       // mean over the last epoch
  double val_quant_loss = 0.0;   // mean sum_k |v_k - v_hat_k|^2 on the validation split
  double val_sum_rate = 0.0;
};

struct Metadata {
  std::uint64_t seed = 0;
  std::string strategy = "untrained";
  double train_snr_db = 0.0;
  std::size_t stages_done = 0;
  std::vector<StageRecord> history;
};

struct TransceiverModel {
  ModelConfig config;
  pilot::PilotMatrix pilot;
  std::vector<feature::FeatureExtractor> extractors;
  rvq::RvqCodebook codebook;
  egat::EgatParams egat;
  Metadata meta;

  static TransceiverModel init(const ModelConfig& cfg, std::uint64_t seed);

  const feature::FeatureExtractor& extractor(std::size_t user) const;
  std::uint64_t config_hash() const;
  // Cross-checks every component against `config`; throws ModelFileError(dimension_mismatch).
  void check_dimensions() const;
};

// One group of channel realizations with K users each. Rows of the channel
// and noise tensors are ordered (sample, user).
struct Batch {
  std::size_t users = 0;
  Tensor h_re, h_im;        // rows x M
  Tensor noise_re, noise_im;  // rows x L

  std::size_t samples() const { return users == 0 ? 0 : h_re.rows() / users; }
  CMatrix channel(std::size_t sample) const;
};

// Builds a batch from consecutive groups of K dataset indices and draws the
// pilot noise from `rng`.
Batch make_batch(const chan::ChannelDataset& data, std::span<const std::size_t> indices,
                 std::size_t users, std::size_t pilot_length, double noise_power, Rng& rng);

double noise_power_for(double power, double snr_db);

// Feature extraction over a batch, routing each user slot to its extractor.
Var extract(num::Binder& b, TransceiverModel& m, const num::CVar& y, std::size_t users, num::Mode mode);
Var extract(num::Binder& b, const TransceiverModel& m, const num::CVar& y, std::size_t users);

struct Inference {
  Tensor features;    // v, rows (sample, user) x D
  Tensor quantized;   // decoded v_hat
  std::vector<std::vector<std::size_t>> indices;
  std::vector<CMatrix> precoders;
};

// Deployment path: pilot, extractor (running statistics), hard RVQ with
// `codebook`, EGAT. No random perturbation anywhere.
Inference infer(const TransceiverModel& m, const rvq::RvqCodebook& codebook, const Batch& batch);
Inference infer(const TransceiverModel& m, const Batch& batch);

// ---- model files ----------------------------------------------------------

enum class ModelErrc { io, bad_magic, version_mismatch, truncated, dimension_mismatch, hash_mismatch };

class ModelFileError : public std::runtime_error {
 public:
  ModelFileError(ModelErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ModelErrc code() const { return code_; }

 private:
  ModelErrc code_;
};

inline constexpr std::uint32_t kModelVersion = 1;

// Trainer position stored alongside a model in checkpoint files.
struct CheckpointState {
  std::size_t stage_index = 0;
  std::size_t epoch = 0;   // epochs completed within the stage
  num::Adam::State adam;
  bool has_optimizer = false;
  std::string rng;
  std::string plan;        // serialized stage plan
};

std::string serialize(const TransceiverModel& m, const CheckpointState* state = nullptr);
TransceiverModel deserialize(std::string_view bytes, std::optional<CheckpointState>* state = nullptr);
void save_model(const TransceiverModel& m, const std::string& path,
                const CheckpointState* state = nullptr);
TransceiverModel load_model(const std::string& path, std::optional<CheckpointState>* state = nullptr);

}  // namespace fdd::model
