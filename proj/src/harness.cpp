#include "fdd/harness.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "fdd/binio.hpp"

namespace fdd::harness {

namespace {

std::string num_text(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v, const char* sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << sep;
    if constexpr (std::is_floating_point_v<T>) {
      os << num_text(v[i]);
    } else {
      os << v[i];
    }
  }
  return os.str();
}

constexpr std::uint64_t kLmmseStream = 0x6c6d6d7365;
constexpr std::uint64_t kLloydStream = 0x6c6c6f7964;
constexpr std::uint64_t kShrinkStream = 0x736872696e6b;
constexpr std::uint64_t kPilotStream = 0x70696c6f74;

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::proposed: return "proposed";
    case Method::zf_csit: return "zf_csit";
    case Method::lmmse_zf: return "lmmse_zf";
    case Method::lloyd_rvq_zf: return "lloyd_rvq_zf";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::proposed, Method::zf_csit, Method::lmmse_zf, Method::lloyd_rvq_zf}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

void set_budget(model::ModelConfig& m, std::size_t total_bits, std::size_t tiers) {
  if (tiers == 0 || total_bits == 0) throw ConfigError("B and N must be positive");
  if (total_bits % tiers != 0) {
    throw ConfigError("N=" + std::to_string(tiers) + " must divide B=" + std::to_string(total_bits));
  }
  m.tiers = tiers;
  m.tier_bits = total_bits / tiers;
}

void RunConfig::validate() const {
  model.validate();
  train.validate(model);
  data.geometry.validate();
  if (data.geometry.array.antennas() != model.antennas) {
    throw ConfigError("array has " + std::to_string(data.geometry.array.antennas()) + " elements but M=" +
                      std::to_string(model.antennas));
  }
  if (data.train == 0 || data.test == 0) throw ConfigError("train and test splits must be non-empty");
  if (eval.methods.empty()) throw ConfigError("no methods selected");
  if (eval.snr_db.empty()) throw ConfigError("the SNR list is empty");
  if (eval.users.empty()) throw ConfigError("the user-count list is empty");
  if (eval.seeds.empty()) throw ConfigError("the seed list is empty");
  for (std::size_t k : eval.users) {
    if (k == 0 || k > model.antennas) {
      throw ConfigError("K=" + std::to_string(k) + " must lie in [1, M=" + std::to_string(model.antennas) + "]");
    }
    if (!model.shared_extractor && k > model.user_slots)
      throw ConfigError("K=" + std::to_string(k) + " exceeds the extractor slots");
    if (k > data.test) throw ConfigError("K exceeds the test split");
  }
  for (std::size_t b : eval.bits) {
    if (b == 0) throw ConfigError("deployed budgets must be positive");
  }
  if (!(dkm.epsilon > 0.0) || dkm.max_iter == 0 || dkm.restarts == 0 || !(dkm.temperature > 0.0))
    throw ConfigError("DKM options must be positive");
  if (eval.lloyd_iters == 0) throw ConfigError("lloyd_iters must be positive");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << model.canonical();
  const auto& g = data.geometry;
  os << "data.path=" << data.path << '\n'
     << "data.layout=" << (g.array.layout == chan::ArrayLayout::ula ? "ula" : "upa") << '\n'
     << "data.nx=" << g.array.nx << "\ndata.ny=" << g.array.ny << "\ndata.spacing=" << num_text(g.array.spacing) << '\n'
     << "data.paths=" << g.min_paths << ',' << g.max_paths << '\n'
     << "data.sector=" << num_text(g.sector_center_deg) << ',' << num_text(g.sector_width_deg) << '\n'
     << "data.spread=" << num_text(g.angle_spread_deg) << ',' << num_text(g.elevation_spread_deg) << '\n'
     << "data.gain=" << (g.gain == chan::GainModel::rayleigh ? "rayleigh" : "unit") << '\n'
     << "data.seed=" << g.seed << "\ndata.environment=" << g.environment << '\n'
     << "data.splits=" << data.train << ',' << data.val << ',' << data.test << '\n'
     << "train.strategy=" << (train.strategy == train::Strategy::progressive ? "progressive" : "e2e") << '\n'
     << "train.snr_db=" << num_text(train.snr_db) << '\n'
     << "train.epochs=" << train.epochs << "\ntrain.batch=" << train.batch_size << '\n'
     << "train.lambda=" << num_text(train.lambda) << "\ntrain.lr=" << num_text(train.adam.base_lr) << '\n'
     << "train.users=" << join(train.users, ",") << "\ntrain.seed=" << train.seed << '\n'
     << "eval.samples=" << eval.samples << "\neval.lloyd_iters=" << eval.lloyd_iters << '\n'
     << "dkm=" << num_text(dkm.epsilon) << ',' << dkm.max_iter << ',' << num_text(dkm.temperature) << ',' << (dkm.relative_temperature ? "rel" : "abs")
     << ',' << dkm.restarts << '\n';
  return os.str();
}

std::uint64_t RunConfig::hash() const { return io::fnv1a64(canonical()); }

chan::ChannelDataset make_dataset(const DataConfig& cfg) {
  chan::ChannelDataset ds = chan::generate(cfg.geometry, cfg.train + cfg.val + cfg.test);
  chan::assign_splits(ds, cfg.train, cfg.val, cfg.test);
  return ds;
}

chan::ChannelDataset obtain_dataset(const DataConfig& cfg) {
  if (cfg.path.empty()) return make_dataset(cfg);
  if (!std::filesystem::exists(cfg.path)) throw MissingFileError("dataset '" + cfg.path + "' not found");
  try {
    return chan::load(cfg.path);
  } catch (const chan::DatasetError& e) {
    if (e.code() == chan::DatasetErrc::io) throw MissingFileError(e.what());
    throw;
  }
}

TransceiverModel load_model_file(const std::string& path) {
  if (path.empty()) throw ConfigError("no model file given");
  if (!std::filesystem::exists(path)) throw MissingFileError("model '" + path + "' not found");
  try {
    return model::load_model(path);
  } catch (const model::ModelFileError& e) {
    if (e.code() == model::ModelErrc::io) throw MissingFileError(e.what());
    throw;
  }
}

std::string ResultTable::csv() const {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(hash_));
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : rows_) {
    os << hash << ',' << r.experiment << ',' << r.method << ',' << num_text(r.snr_db) << ',' << r.bits << ','
       << r.users << ',' << r.seed << ',' << num_text(r.sum_rate) << ',' << join(r.per_user, ";") << ','
       << num_text(r.wall_ms) << '\n';
  }
  return os.str();
}

void ResultTable::write(const std::string& path) const { io::write_file_atomic(path, csv()); }

std::vector<std::size_t> lloyd_tier_bits(std::size_t bits, std::size_t tier_bits) {
  if (bits == 0 || tier_bits == 0) throw ConfigError("Lloyd budget must be positive");
  std::vector<std::size_t> out(bits / tier_bits, tier_bits);
  if (bits % tier_bits) out.push_back(bits % tier_bits);
  return out;
}

Evaluator::Evaluator(const chan::ChannelDataset& data, const RunConfig& cfg, const TransceiverModel* trained)
    : data_(data), cfg_(cfg), trained_(trained), cov_(base::sample_covariance(data, data.train)) {
  if (data.antennas != cfg.model.antennas)
    throw ConfigError("dataset has M=" + std::to_string(data.antennas) + ", config has " +
                      std::to_string(cfg.model.antennas));
  if (trained) {
    if (trained->config.antennas != data.antennas) throw ConfigError("model and dataset disagree on M");
    pilot_ = trained->pilot;
  } else {
    Rng rng(mix_seed(cfg.train.seed, kPilotStream));
    pilot_ = pilot::PilotMatrix::random(cfg.model.antennas, cfg.model.pilot_length, cfg.model.power, rng);
  }
}

std::size_t Evaluator::default_bits() const {
  return trained_ ? trained_->codebook.total_bits() : cfg_.model.total_bits();
}

std::vector<std::size_t> Evaluator::test_indices(std::size_t users) const {
  std::size_t n = data_.test.size();
  if (cfg_.eval.samples > 0) n = std::min(n, cfg_.eval.samples * users);
  n -= n % users;
  if (n == 0) throw ConfigError("the test split holds fewer than K channels");
  return {data_.test.begin(), data_.test.begin() + static_cast<std::ptrdiff_t>(n)};
}

const TransceiverModel& Evaluator::deployed(std::size_t bits) {
  if (!trained_) throw ConfigError("method 'proposed' needs a trained model");
  const std::size_t full = trained_->codebook.total_bits();
  if (bits == full) return *trained_;
  if (bits > full) {
    throw ConfigError("B_deploy=" + std::to_string(bits) + " exceeds the trained " + std::to_string(full) +
                      " bits; use expand");
  }
  auto it = shrunk_.find(bits);
  if (it == shrunk_.end()) {
    it = shrunk_.emplace(bits, adapt::shrink(*trained_, bits, mix_seed(cfg_.train.seed, kShrinkStream), cfg_.dkm))
             .first;
  }
  return it->second;
}

const rvq::RvqCodebook& Evaluator::lloyd(std::size_t bits) {
  auto it = lloyd_.find(bits);
  if (it == lloyd_.end()) {
    Rng rng(mix_seed(cfg_.train.seed, kLloydStream));
    auto res = base::train_lloyd_feedback(data_, data_.train, lloyd_tier_bits(bits, cfg_.model.tier_bits), rng,
                                          cfg_.eval.lloyd_iters);
    it = lloyd_.emplace(bits, std::move(res.codebook)).first;
  }
  return it->second;
}

MethodResult Evaluator::run(Method method, std::size_t users, std::size_t bits, double snr_db,
                            std::uint64_t seed) {
  if (users == 0 || users > cfg_.model.antennas)
    throw ConfigError("K=" + std::to_string(users) + " must lie in [1, M]");
  const std::vector<std::size_t> idx = test_indices(users);
  MethodResult out;
  if (method == Method::proposed) {
    const TransceiverModel& m = deployed(bits);
    const train::Evaluation ev = train::evaluate(m, m.codebook, data_, idx, users, snr_db, seed);
    out.sum_rate = ev.sum_rate;
    out.per_user = ev.per_user;
    return out;
  }
  const double power = cfg_.model.power;
  const double sigma2 = model::noise_power_for(power, snr_db);
  const std::size_t m_ant = data_.antennas, samples = idx.size() / users;
  const rvq::RvqCodebook* cb = method == Method::lloyd_rvq_zf ? &lloyd(bits) : nullptr;
  Rng rng(mix_seed(seed, kLmmseStream));
  out.per_user.assign(users, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    CMatrix h(m_ant, users);
    for (std::size_t k = 0; k < users; ++k) {
      const auto col = data_.sample(idx[s * users + k]);
      std::copy(col.begin(), col.end(), h.column(k).begin());
    }
    CMatrix w(m_ant, users);
    if (method == Method::zf_csit) {
      w = base::zf_precode(h, power).w;
    } else if (method == Method::lmmse_zf) {
      CMatrix est(m_ant, users);
      for (std::size_t k = 0; k < users; ++k) {
        const auto y = pilot::receive_pilot(h.column(k), pilot_, sigma2, rng);
        const base::Estimate e = base::lmmse_estimate(y, pilot_, cov_, sigma2);
        std::copy(e.h.begin(), e.h.end(), est.column(k).begin());
      }
      w = base::zf_precode(est, power).w;
    } else {
      w = base::lloyd_feedback_zf(h, *cb, power).w;
    }
    const rate::SumRate r = rate::sum_rate(h, w, sigma2);
    out.sum_rate += r.total;
    for (std::size_t k = 0; k < users; ++k) out.per_user[k] += r.per_user[k];
  }
  const double inv = 1.0 / static_cast<double>(samples);
  out.sum_rate *= inv;
  for (double& r : out.per_user) r *= inv;
  return out;
}

ResultTable sweep(Evaluator& ev, const RunConfig& cfg) {
  ResultTable table(cfg.hash());
  const std::vector<std::size_t> budgets = cfg.eval.bits.empty() ? std::vector{ev.default_bits()} : cfg.eval.bits;
  for (std::uint64_t seed : cfg.eval.seeds) {
    for (std::size_t k : cfg.eval.users) {
      for (std::size_t b : budgets) {
        for (double snr : cfg.eval.snr_db) {
          for (Method m : cfg.eval.methods) {
            const auto t0 = std::chrono::steady_clock::now();
            MethodResult r = ev.run(m, k, b, snr, seed);
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            table.append({cfg.eval.experiment, method_name(m), snr, b, k, seed, r.sum_rate, std::move(r.per_user), ms});
          }
        }
      }
    }
  }
  return table;
}

}  // namespace fdd::harness
