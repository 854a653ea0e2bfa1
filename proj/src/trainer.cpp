#include "fdd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fdd::train {

namespace {

constexpr std::uint64_t kTrainStream = 0x747261696e;
constexpr std::uint64_t kValStream = 0x76616c;

const char* strategy_name(Strategy s) { return s == Strategy::progressive ? "progressive" : "e2e"; }

}  // namespace

void TrainConfig::validate(const ModelConfig& m) const {
  if (!(lambda >= 0.0)) throw model::ConfigError("lambda must be non-negative");
  if (batch_size == 0) throw model::ConfigError("batch_size must be at least 1");
  if (epochs == 0) throw model::ConfigError("epochs must be at least 1");
  if (users.empty()) throw model::ConfigError("the user-count set is empty");
  for (std::size_t k : users) {
    if (k == 0 || k > m.antennas) {
      throw model::ConfigError("K=" + std::to_string(k) + " must lie in [1, M=" + std::to_string(m.antennas) + "]");
    }
    if (!m.shared_extractor && k > m.user_slots)
      throw model::ConfigError("K=" + std::to_string(k) + " exceeds the extractor slots");
  }
}

std::vector<Stage> progressive_plan(std::size_t first_tier, std::size_t last_tier, std::size_t epochs) {
  if (last_tier <= first_tier) throw std::invalid_argument("progressive_plan: empty tier range");
  const std::size_t per_stage = std::max<std::size_t>(1, epochs / (last_tier - first_tier));
  std::vector<Stage> plan;
  for (std::size_t n = first_tier; n < last_tier; ++n) plan.push_back({n + 1, {n}, per_stage});
  return plan;
}

std::vector<Stage> e2e_plan(std::size_t tiers, std::size_t epochs) {
  Stage s{tiers, {}, epochs};
  for (std::size_t n = 0; n < tiers; ++n) s.trainable_tiers.push_back(n);
  return {s};
}

std::string encode_plan(const std::vector<Stage>& plan) {
  std::ostringstream os;
  for (const Stage& s : plan) {
    os << s.active_tiers << ':';
    for (std::size_t i = 0; i < s.trainable_tiers.size(); ++i) os << (i ? "," : "") << s.trainable_tiers[i];
    os << ':' << s.epochs << ';';
  }
  return os.str();
}

std::vector<Stage> decode_plan(const std::string& text) {
  std::vector<Stage> plan;
  std::istringstream is(text);
  for (std::string item; std::getline(is, item, ';');) {
    const auto a = item.find(':'), b = item.rfind(':');
    if (a == std::string::npos || a == b) throw std::invalid_argument("malformed stage plan '" + text + "'");
    Stage s;
    s.active_tiers = std::stoul(item.substr(0, a));
    s.epochs = std::stoul(item.substr(b + 1));
    std::istringstream ts(item.substr(a + 1, b - a - 1));
    for (std::string t; std::getline(ts, t, ',');) s.trainable_tiers.push_back(std::stoul(t));
    plan.push_back(std::move(s));
  }
  return plan;
}

LossParts total_loss(num::Binder& b, TransceiverModel& m, const Batch& batch, std::size_t active_tiers,
                     double lambda, double noise_power, Rng& rng) {
  const std::size_t users = batch.users;
  const double inv_s = 1.0 / static_cast<double>(batch.samples());
  const num::CVar y = pilot::receive_pilot(b, m.pilot, batch.h_re, batch.h_im, batch.noise_re, batch.noise_im);
  const Var v = model::extract(b, m, y, users, num::Mode::train);
  const rvq::NsvqOutput q = rvq::nsvq_forward(b, v, m.codebook, rng, active_tiers);
  const Var w = m.egat.forward(b, q.v_train, users, m.config.antennas, m.config.power);
  const Var rates = rate::user_rates(batch.h_re, batch.h_im, w, users, noise_power);
  LossParts out;
  out.rate = num::scale(num::sum(rates), inv_s);
  out.quant = num::scale(num::sq_norm(num::sub(q.v_train, v)), inv_s);
  out.loss = num::add(num::scale(out.rate, -1.0), num::scale(out.quant, lambda));
  out.indices = q.indices;
  return out;
}

Evaluation evaluate(const TransceiverModel& m, const rvq::RvqCodebook& codebook,
                    const chan::ChannelDataset& data, std::span<const std::size_t> indices,
                    std::size_t users, double snr_db, std::uint64_t seed) {
  if (users == 0 || users > m.config.antennas)
    throw std::invalid_argument("evaluate: K=" + std::to_string(users) + " must lie in [1, M]");
  const std::size_t samples = indices.size() / users;
  if (samples == 0) throw std::invalid_argument("evaluate: fewer indices than users");
  const double sigma2 = model::noise_power_for(m.config.power, snr_db);
  constexpr std::size_t chunk = 200;
  Rng rng(seed);
  Evaluation ev;
  ev.per_user.assign(users, 0.0);
  for (std::size_t s0 = 0; s0 < samples; s0 += chunk) {
    const std::size_t n = std::min(chunk, samples - s0);
    const Batch batch = model::make_batch(data, indices.subspan(s0 * users, n * users), users,
                                          m.config.pilot_length, sigma2, rng);
    const model::Inference inf = model::infer(m, codebook, batch);
    for (std::size_t s = 0; s < n; ++s) {
      const rate::SumRate r = rate::sum_rate(batch.channel(s), inf.precoders[s], sigma2);
      ev.sum_rate += r.total;
      for (std::size_t k = 0; k < users; ++k) ev.per_user[k] += r.per_user[k];
    }
    const Tensor diff = [&] {
      Tensor d = inf.features;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= inf.quantized[i];
      return d;
    }();
    ev.quant_loss += diff.sq_norm();
  }
  const double inv = 1.0 / static_cast<double>(samples);
  ev.sum_rate *= inv;
  ev.quant_loss *= inv;
  for (double& r : ev.per_user) r *= inv;
  return ev;
}

// ---- Trainer -----------------------------------------------------------------

Trainer::Trainer(TransceiverModel& m, const chan::ChannelDataset& data, TrainConfig cfg, std::vector<Stage> plan)
    : model_(m), data_(data), cfg_(std::move(cfg)), plan_(std::move(plan)), rng_(mix_seed(cfg_.seed, kTrainStream)) {
  cfg_.validate(model_.config);
  if (data_.antennas != model_.config.antennas) {
    throw model::ConfigError("dataset has " + std::to_string(data_.antennas) + " antennas, model expects " +
                             std::to_string(model_.config.antennas));
  }
  for (const Stage& s : plan_) {
    if (s.active_tiers > model_.codebook.tiers.size()) throw std::invalid_argument("stage uses a missing tier");
    for (std::size_t t : s.trainable_tiers)
      if (t >= s.active_tiers) throw std::invalid_argument("stage trains an inactive tier");
  }
  model_.meta.strategy = strategy_name(cfg_.strategy);
  model_.meta.train_snr_db = cfg_.snr_db;
}

Trainer::Trainer(TransceiverModel& m, const chan::ChannelDataset& data, TrainConfig cfg,
                 const model::CheckpointState& state)
    : Trainer(m, data, std::move(cfg), decode_plan(state.plan)) {
  stage_ = state.stage_index;
  epoch_ = state.epoch;
  rng_.set_state(state.rng);
  if (state.has_optimizer) {
    start_stage();
    adam_->set_state(state.adam);
  }
}

std::size_t Trainer::steps_per_epoch() const {
  const double mean_k = std::accumulate(cfg_.users.begin(), cfg_.users.end(), 0.0) /
                        static_cast<double>(cfg_.users.size());
  const double items = std::floor(static_cast<double>(data_.train.size()) / mean_k);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(items / static_cast<double>(cfg_.batch_size))));
}

void Trainer::start_stage() {
  const Stage& s = plan_.at(stage_);
  for (std::size_t t : s.trainable_tiers) {
    if (model_.codebook.tiers[t].frozen)
      throw std::logic_error("tier " + std::to_string(t + 1) + " is frozen and cannot be trained");
  }
  num::AdamConfig a = cfg_.adam;
  a.total_steps = std::max<std::size_t>(1, s.epochs * steps_per_epoch());
  adam_.emplace(a);
}

void Trainer::run_epoch() {
  if (!adam_) start_stage();
  const Stage& stage = plan_[stage_];
  const double sigma2 = model::noise_power_for(model_.config.power, cfg_.snr_db);

  std::vector<std::size_t> order = data_.train;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);

  std::vector<std::vector<std::size_t>> usage(model_.codebook.tiers.size());
  for (std::size_t t : stage.trainable_tiers) usage[t].assign(model_.codebook.tiers[t].size(), 0);

  EpochReport rep;
  rep.stage_index = stage_;
  rep.epoch = epoch_ + 1;
  std::size_t pos = 0;
  while (true) {
    const std::size_t users =
        cfg_.users.size() == 1 ? cfg_.users.front() : cfg_.users[rng_.below(cfg_.users.size())];
    const std::size_t avail = (order.size() - pos) / users;
    if (avail == 0) break;
    const std::size_t items = std::min(cfg_.batch_size, avail);
    const Batch batch = model::make_batch(data_, std::span(order).subspan(pos, items * users), users,
                                          model_.config.pilot_length, sigma2, rng_);
    pos += items * users;

    num::Binder b;
    std::vector<Tensor*> params;
    model_.pilot.collect(params);
    for (auto& x : model_.extractors) x.collect(params);
    for (std::size_t t : stage.trainable_tiers) params.push_back(&model_.codebook.tiers[t].codewords);
    model_.egat.collect(params);
    for (Tensor* p : params) b.train(*p);

    try {
      const LossParts parts = total_loss(b, model_, batch, stage.active_tiers, cfg_.lambda, sigma2, rng_);
      num::backward(parts.loss);
      std::vector<Tensor> zeros;
      zeros.reserve(params.size());
      std::vector<const Tensor*> grads;
      for (const auto& e : b.trainables()) {
        if (e.leaf->grad.empty()) {
          zeros.emplace_back(e.tensor->shape(), 0.0);
          grads.push_back(&zeros.back());
        } else {
          grads.push_back(&e.leaf->grad);
        }
      }
      adam_->step(params, grads);
      pilot::normalize_pilot(model_.pilot);
      for (const auto& row : parts.indices)
        for (std::size_t t : stage.trainable_tiers) ++usage[t][row[t]];
      rep.mean_loss += parts.loss->value.item();
      rep.mean_sum_rate += parts.rate->value.item();
      rep.mean_quant_loss += parts.quant->value.item();
      ++rep.steps;
    } catch (const num::NumericalError& e) {
      throw TrainingError(stage_ + 1, e.what());
    } catch (const std::domain_error& e) {
      throw TrainingError(stage_ + 1, e.what());
    }
  }
  if (rep.steps > 0) {
    const double inv = 1.0 / static_cast<double>(rep.steps);
    rep.mean_loss *= inv;
    rep.mean_sum_rate *= inv;
    rep.mean_quant_loss *= inv;
  }
  last_loss_ = rep.mean_loss;
  ++epoch_;
  if (cfg_.replace_unused && epoch_ < stage.epochs) replace_unused(usage);
  if (cfg_.on_epoch) cfg_.on_epoch(rep);
  if (epoch_ >= stage.epochs) finish_stage();
}

void Trainer::replace_unused(const std::vector<std::vector<std::size_t>>& usage) {
  for (std::size_t t = 0; t < usage.size(); ++t) {
    const auto& count = usage[t];
    if (count.empty()) continue;
    Tensor& cw = model_.codebook.tiers[t].codewords;
    const std::size_t d = cw.cols();
    const std::size_t top = static_cast<std::size_t>(std::max_element(count.begin(), count.end()) - count.begin());
    if (count[top] == 0) continue;
    double rms = 0.0;
    for (std::size_t c = 0; c < d; ++c) rms += cw.at(top, c) * cw.at(top, c);
    const double spread = 1e-2 * std::sqrt(rms / static_cast<double>(d));
    for (std::size_t j = 0; j < count.size(); ++j) {
      if (count[j] != 0) continue;
      for (std::size_t c = 0; c < d; ++c) cw.at(j, c) = cw.at(top, c) + spread * rng_.normal();
    }
  }
}

void Trainer::finish_stage() {
  const Stage& stage = plan_[stage_];
  for (std::size_t t : stage.trainable_tiers) model_.codebook.tiers[t].frozen = true;

  const std::size_t users = cfg_.users.front();
  std::span<const std::size_t> val(data_.val);
  if (cfg_.val_samples > 0) val = val.first(std::min(val.size(), cfg_.val_samples * users));
  model::StageRecord rec;
  rec.stage = model_.meta.stages_done + 1;
  rec.epochs = stage.epochs;
  rec.train_loss = last_loss_;
  if (val.size() >= users) {
    const Evaluation ev = evaluate(model_, model_.codebook.truncated(stage.active_tiers), data_, val, users,
                                   cfg_.snr_db, mix_seed(cfg_.seed, kValStream));
    rec.val_quant_loss = ev.quant_loss;
    rec.val_sum_rate = ev.sum_rate;
  }
  model_.meta.history.push_back(rec);
  ++model_.meta.stages_done;
  ++stage_;
  epoch_ = 0;
  adam_.reset();
}

model::CheckpointState Trainer::checkpoint() const {
  model::CheckpointState s;
  s.stage_index = stage_;
  s.epoch = epoch_;
  s.rng = rng_.state();
  s.plan = encode_plan(plan_);
  if (adam_) {
    s.has_optimizer = true;
    s.adam = adam_->state();
  }
  return s;
}

bool Trainer::run() {
  std::size_t done = 0;
  while (!finished() && (cfg_.epoch_limit == 0 || done < cfg_.epoch_limit)) {
    run_epoch();
    ++done;
    if (!cfg_.checkpoint_path.empty()) {
      const model::CheckpointState s = checkpoint();
      model::save_model(model_, cfg_.checkpoint_path, &s);
    }
  }
  return finished();
}

TransceiverModel train_progressive(const ModelConfig& mc, const TrainConfig& cfg, const chan::ChannelDataset& data) {
  TrainConfig c = cfg;
  c.strategy = Strategy::progressive;
  TransceiverModel m = TransceiverModel::init(mc, c.seed);
  Trainer(m, data, c, progressive_plan(0, mc.tiers, c.epochs)).run();
  return m;
}

TransceiverModel train_e2e(const ModelConfig& mc, const TrainConfig& cfg, const chan::ChannelDataset& data) {
  TrainConfig c = cfg;
  c.strategy = Strategy::e2e;
  TransceiverModel m = TransceiverModel::init(mc, c.seed);
  Trainer(m, data, c, e2e_plan(mc.tiers, c.epochs)).run();
  return m;
}

TransceiverModel train(const ModelConfig& mc, const TrainConfig& cfg, const chan::ChannelDataset& data) {
  return cfg.strategy == Strategy::progressive ? train_progressive(mc, cfg, data) : train_e2e(mc, cfg, data);
}

TransceiverModel resume(const std::string& checkpoint, const TrainConfig& cfg, const chan::ChannelDataset& data) {
  std::optional<model::CheckpointState> state;
  TransceiverModel m = model::load_model(checkpoint, &state);
  if (!state) throw std::invalid_argument(checkpoint + " holds no trainer state");
  Trainer(m, data, cfg, *state).run();
  return m;
}

}  // namespace fdd::train
