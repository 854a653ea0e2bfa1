#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdd/adapt.hpp"
#include "fdd/baselines.hpp"
#include "fdd/trainer.hpp"

namespace fdd::harness {

using model::ConfigError;
using model::TransceiverModel;

// A referenced input file does not exist or cannot be read.
class MissingFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string path;              // empty: generate in memory from `geometry`
  chan::GeometryParams geometry;
  std::size_t train = 5000;
  std::size_t val = 500;
  std::size_t test = 1000;
};

enum class Method { proposed, zf_csit, lmmse_zf, lloyd_rvq_zf };
std::string method_name(Method m);
Method parse_method(const std::string& name);

struct EvalConfig {
  std::string experiment = "eval";
  std::vector<Method> methods{Method::proposed, Method::zf_csit, Method::lmmse_zf, Method::lloyd_rvq_zf};
  std::vector<double> snr_db{10.0};
  std::vector<std::size_t> bits;         // deployed budgets; empty means the trained B
  std::vector<std::size_t> users{3};
  std::vector<std::uint64_t> seeds{1};   // test-noise seeds
  std::size_t samples = 0;               // test realizations per point (0 = whole test split)
  std::size_t lloyd_iters = 50;
};

struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  std::string model_path;
  std::string output;                    // CSV or model file written by the subcommand
  std::size_t extra_tiers = 1;
  adapt::DkmOptions dkm;

  // Cross-field checks: M | D, every K <= M, every budget positive, and so on.
  void validate() const;
  // Fixed-order text covering every field that changes results.
  std::string canonical() const;
  std::uint64_t hash() const;
};

// Sets tiers and tier_bits from a total budget; throws ConfigError unless N | B.
void set_budget(model::ModelConfig& m, std::size_t total_bits, std::size_t tiers);

chan::ChannelDataset make_dataset(const DataConfig& cfg);
// Loads `cfg.path` when set, otherwise generates.
chan::ChannelDataset obtain_dataset(const DataConfig& cfg);
TransceiverModel load_model_file(const std::string& path);

struct ResultRow {
  std::string experiment;
  std::string method;
  double snr_db = 0.0;
  std::size_t bits = 0;
  std::size_t users = 0;
  std::uint64_t seed = 0;
  double sum_rate = 0.0;
  std::vector<double> per_user;
  double wall_ms = 0.0;
};

inline constexpr const char* kCsvHeader =
    "config_hash,experiment,method,snr_db,B,K,seed,sum_rate,per_user_rates,wall_ms";

// Append-only result rows sharing one config hash.
class ResultTable {
 public:
  explicit ResultTable(std::uint64_t config_hash) : hash_(config_hash) {}
  void append(ResultRow row) { rows_.push_back(std::move(row)); }
  const std::vector<ResultRow>& rows() const { return rows_; }
  std::string csv() const;
  // Temp file plus rename, so an interrupted run leaves no partial table.
  void write(const std::string& path) const;

 private:
  std::uint64_t hash_;
  std::vector<ResultRow> rows_;
};

struct MethodResult {
  double sum_rate = 0.0;
  std::vector<double> per_user;
};

// Evaluates methods on groups of K consecutive test indices. Every method sees
// the same channel groups; shrunk models and Lloyd codebooks are built once per
// budget and cached.
class Evaluator {
 public:
  // `trained` may be null when only baselines are evaluated; LMMSE then uses an
  // untrained pilot drawn from the config seed.
  Evaluator(const chan::ChannelDataset& data, const RunConfig& cfg, const TransceiverModel* trained);

  MethodResult run(Method method, std::size_t users, std::size_t bits, double snr_db, std::uint64_t seed);
  std::size_t default_bits() const;

 private:
  std::vector<std::size_t> test_indices(std::size_t users) const;
  const TransceiverModel& deployed(std::size_t bits);
  const rvq::RvqCodebook& lloyd(std::size_t bits);

  const chan::ChannelDataset& data_;
  const RunConfig& cfg_;
  const TransceiverModel* trained_;
  pilot::PilotMatrix pilot_;
  CMatrix cov_;
  std::map<std::size_t, TransceiverModel> shrunk_;
  std::map<std::size_t, rvq::RvqCodebook> lloyd_;
};

// Tier widths for a Lloyd baseline with budget `bits` and the system's B-bar.
std::vector<std::size_t> lloyd_tier_bits(std::size_t bits, std::size_t tier_bits);

// Cartesian sweep over seeds, K, B, SNR and methods from `cfg.eval`; rows are
// emitted in that nesting order.
ResultTable sweep(Evaluator& ev, const RunConfig& cfg);

}  // namespace fdd::harness
