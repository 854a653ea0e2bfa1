#include "fdd/model.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "fdd/binio.hpp"

namespace fdd::model {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

[[noreturn]] void dim_error(const std::string& what) {
  throw ModelFileError(ModelErrc::dimension_mismatch, "dimension mismatch: " + what);
}

void expect_shape(const Tensor& t, const num::Shape& s, const std::string& what) {
  if (t.shape() != s) dim_error(what + " has shape " + num::shape_str(t.shape()) + ", expected " + num::shape_str(s));
}

void expect_linear(const num::Linear& l, std::size_t in, std::size_t out, bool bias, const std::string& what) {
  expect_shape(l.weight, {in, out}, what + " weight");
  if (bias) expect_shape(l.bias, {out}, what + " bias");
  else if (!l.bias.empty()) dim_error(what + " carries an unexpected bias");
}

// ---- section codecs ----

void put_linear(io::Writer& w, const num::Linear& l) {
  w.put<std::uint8_t>(l.bias.empty() ? 0 : 1);
  w.tensor(l.weight);
  if (!l.bias.empty()) w.tensor(l.bias);
}

num::Linear get_linear(io::Reader& r) {
  num::Linear l;
  const bool bias = r.get<std::uint8_t>() != 0;
  l.weight = r.tensor();
  if (bias) l.bias = r.tensor();
  return l;
}

std::string encode_feature(const std::vector<feature::FeatureExtractor>& xs) {
  io::Writer w;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(xs.size()));
  for (const auto& x : xs) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(x.layers.size()));
    for (const auto& l : x.layers) put_linear(w, l);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(x.norms.size()));
    for (const auto& n : x.norms) {
      w.tensor(n.gamma);
      w.tensor(n.beta);
      w.tensor(n.running_mean);
      w.tensor(n.running_var);
      w.put<double>(n.momentum);
      w.put<double>(n.eps);
    }
  }
  return w.take();
}

std::vector<feature::FeatureExtractor> decode_feature(io::Reader& r) {
  std::vector<feature::FeatureExtractor> xs(r.get<std::uint32_t>());
  for (auto& x : xs) {
    x.layers.resize(r.get<std::uint32_t>());
    for (auto& l : x.layers) l = get_linear(r);
    x.norms.resize(r.get<std::uint32_t>());
    for (auto& n : x.norms) {
      n.gamma = r.tensor();
      n.beta = r.tensor();
      n.running_mean = r.tensor();
      n.running_var = r.tensor();
      n.momentum = r.get<double>();
      n.eps = r.get<double>();
    }
  }
  return xs;
}

std::string encode_codebook(const rvq::RvqCodebook& cb) {
  io::Writer w;
  w.put<std::uint64_t>(cb.dim);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.tiers.size()));
  for (const auto& t : cb.tiers) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.bits));
    w.put<std::uint8_t>(t.frozen ? 1 : 0);
    w.tensor(t.codewords);
  }
  return w.take();
}

rvq::RvqCodebook decode_codebook(io::Reader& r) {
  rvq::RvqCodebook cb;
  cb.dim = r.get<std::uint64_t>();
  cb.tiers.resize(r.get<std::uint32_t>());
  for (auto& t : cb.tiers) {
    t.bits = r.get<std::uint32_t>();
    t.frozen = r.get<std::uint8_t>() != 0;
    t.codewords = r.tensor();
  }
  return cb;
}

std::string encode_egat(const egat::EgatParams& e) {
  io::Writer w;
  put_linear(w, e.init_in);
  put_linear(w, e.init_out);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(e.updates.size()));
  for (const auto& u : e.updates)
    for (const num::Linear* f : {&u.f1, &u.f2, &u.f3, &u.f4, &u.f5}) put_linear(w, *f);
  put_linear(w, e.head_in);
  put_linear(w, e.head_out);
  return w.take();
}

void decode_egat(io::Reader& r, egat::EgatParams& e) {
  e.init_in = get_linear(r);
  e.init_out = get_linear(r);
  e.updates.resize(r.get<std::uint32_t>());
  for (auto& u : e.updates)
    for (num::Linear* f : {&u.f1, &u.f2, &u.f3, &u.f4, &u.f5}) *f = get_linear(r);
  e.head_in = get_linear(r);
  e.head_out = get_linear(r);
}

std::string encode_meta(const Metadata& m) {
  io::Writer w;
  w.put<std::uint64_t>(m.seed);
  w.str(m.strategy);
  w.put<double>(m.train_snr_db);
  w.put<std::uint64_t>(m.stages_done);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.history.size()));
  for (const auto& s : m.history) {
    w.put<std::uint64_t>(s.stage);
    w.put<std::uint64_t>(s.epochs);
    w.put<double>(s.train_loss);
    w.put<double>(s.val_quant_loss);
    w.put<double>(s.val_sum_rate);
  }
  return w.take();
}

Metadata decode_meta(io::Reader& r) {
  Metadata m;
  m.seed = r.get<std::uint64_t>();
  m.strategy = r.str();
  m.train_snr_db = r.get<double>();
  m.stages_done = r.get<std::uint64_t>();
  m.history.resize(r.get<std::uint32_t>());
  for (auto& s : m.history) {
    s.stage = r.get<std::uint64_t>();
    s.epochs = r.get<std::uint64_t>();
    s.train_loss = r.get<double>();
    s.val_quant_loss = r.get<double>();
    s.val_sum_rate = r.get<double>();
  }
  return m;
}

std::string encode_state(const CheckpointState& s) {
  io::Writer w;
  w.put<std::uint64_t>(s.stage_index);
  w.put<std::uint64_t>(s.epoch);
  w.str(s.rng);
  w.str(s.plan);
  w.put<std::uint8_t>(s.has_optimizer ? 1 : 0);
  if (s.has_optimizer) {
    w.put<std::uint64_t>(s.adam.t);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.adam.m.size()));
    for (std::size_t i = 0; i < s.adam.m.size(); ++i) {
      w.tensor(s.adam.m[i]);
      w.tensor(s.adam.v[i]);
    }
  }
  return w.take();
}

CheckpointState decode_state(io::Reader& r) {
  CheckpointState s;
  s.stage_index = r.get<std::uint64_t>();
  s.epoch = r.get<std::uint64_t>();
  s.rng = r.str();
  s.plan = r.str();
  s.has_optimizer = r.get<std::uint8_t>() != 0;
  if (s.has_optimizer) {
    s.adam.t = r.get<std::uint64_t>();
    const std::size_t n = r.get<std::uint32_t>();
    for (std::size_t i = 0; i < n; ++i) {
      s.adam.m.push_back(r.tensor());
      s.adam.v.push_back(r.tensor());
    }
  }
  return s;
}

}  // namespace

// ---- config ----------------------------------------------------------------

void ModelConfig::validate() const {
  if (antennas == 0 || pilot_length == 0 || feature_dim == 0)
    throw ConfigError("antennas, pilot_length and feature_dim must be positive");
  if (feature_dim % antennas != 0) {
    throw ConfigError("feature_dim " + std::to_string(feature_dim) + " is not divisible by antennas " +
                      std::to_string(antennas));
  }
  if (tiers == 0) throw ConfigError("tiers must be at least 1");
  if (tier_bits == 0 || tier_bits > 20) throw ConfigError("tier_bits must be in [1, 20]");
  if (egat.state_dim == 0 || egat.init_hidden == 0 || egat.out_hidden == 0)
    throw ConfigError("EGAT widths must be positive");
  if (egat.alpha < 0.0 || egat.beta < 0.0) throw ConfigError("alpha and beta must be non-negative");
  if (!(power > 0.0)) throw ConfigError("power must be positive");
  if (!shared_extractor && user_slots == 0) throw ConfigError("user_slots must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("hidden widths must be positive");
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "antennas=" << antennas << '\n'
     << "pilot_length=" << pilot_length << '\n'
     << "feature_dim=" << feature_dim << '\n'
     << "hidden=";
  for (std::size_t i = 0; i < hidden.size(); ++i) os << (i ? "," : "") << hidden[i];
  os << '\n'
     << "tiers=" << tiers << '\n'
     << "tier_bits=" << tier_bits << '\n'
     << "egat.init_hidden=" << egat.init_hidden << '\n'
     << "egat.state_dim=" << egat.state_dim << '\n'
     << "egat.out_hidden=" << egat.out_hidden << '\n'
     << "egat.layers=" << egat.layers << '\n'
     << "egat.alpha=" << fmt_double(egat.alpha) << '\n'
     << "egat.beta=" << fmt_double(egat.beta) << '\n'
     << "egat.edge_bias=" << (egat.edge_bias ? 1 : 0) << '\n'
     << "power=" << fmt_double(power) << '\n'
     << "shared_extractor=" << (shared_extractor ? 1 : 0) << '\n'
     << "user_slots=" << user_slots << '\n';
  return os.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("config is missing key '" + key + "'");
    return it->second;
  };
  ModelConfig c;
  c.antennas = parse_size("antennas", take("antennas"));
  c.pilot_length = parse_size("pilot_length", take("pilot_length"));
  c.feature_dim = parse_size("feature_dim", take("feature_dim"));
  c.hidden.clear();
  std::istringstream hs(take("hidden"));
  for (std::string tok; std::getline(hs, tok, ',');) c.hidden.push_back(parse_size("hidden", tok));
  c.tiers = parse_size("tiers", take("tiers"));
  c.tier_bits = parse_size("tier_bits", take("tier_bits"));
  c.egat.init_hidden = parse_size("egat.init_hidden", take("egat.init_hidden"));
  c.egat.state_dim = parse_size("egat.state_dim", take("egat.state_dim"));
  c.egat.out_hidden = parse_size("egat.out_hidden", take("egat.out_hidden"));
  c.egat.layers = parse_size("egat.layers", take("egat.layers"));
  c.egat.alpha = parse_double("egat.alpha", take("egat.alpha"));
  c.egat.beta = parse_double("egat.beta", take("egat.beta"));
  c.egat.edge_bias = parse_size("egat.edge_bias", take("egat.edge_bias")) != 0;
  c.power = parse_double("power", take("power"));
  c.shared_extractor = parse_size("shared_extractor", take("shared_extractor")) != 0;
  c.user_slots = parse_size("user_slots", take("user_slots"));
  if (c.antennas != 0) c.egat.edge_input = c.feature_dim / c.antennas;
  return c;
}

// ---- model -----------------------------------------------------------------

TransceiverModel TransceiverModel::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TransceiverModel m;
  m.config = cfg;
  m.config.egat.edge_input = cfg.feature_dim / cfg.antennas;
  Rng rng(seed);
  m.pilot = pilot::PilotMatrix::random(cfg.antennas, cfg.pilot_length, cfg.power, rng);
  const std::size_t n_ext = cfg.shared_extractor ? 1 : cfg.user_slots;
  for (std::size_t i = 0; i < n_ext; ++i)
    m.extractors.push_back(feature::FeatureExtractor::init(cfg.pilot_length, cfg.hidden, cfg.feature_dim, rng));
  m.codebook.dim = cfg.feature_dim;
  for (std::size_t n = 0; n < cfg.tiers; ++n)
    m.codebook.tiers.push_back(rvq::Tier::random(cfg.tier_bits, cfg.feature_dim, rng));
  m.egat = egat::EgatParams::init(m.config.egat, rng);
  m.meta.seed = seed;
  return m;
}

const feature::FeatureExtractor& TransceiverModel::extractor(std::size_t user) const {
  if (config.shared_extractor) return extractors.front();
  if (user >= extractors.size()) {
    throw std::out_of_range("user slot " + std::to_string(user) + " has no extractor (" +
                            std::to_string(extractors.size()) + " slots)");
  }
  return extractors[user];
}

std::uint64_t TransceiverModel::config_hash() const { return io::fnv1a64(config.canonical()); }

void TransceiverModel::check_dimensions() const {
  const ModelConfig& c = config;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    dim_error(e.what());
  }
  const std::size_t edge = c.feature_dim / c.antennas, d = c.egat.state_dim;
  expect_shape(pilot.re, {c.antennas, c.pilot_length}, "pilot (real)");
  expect_shape(pilot.im, {c.antennas, c.pilot_length}, "pilot (imaginary)");
  if (extractors.size() != (c.shared_extractor ? 1 : c.user_slots))
    dim_error("extractor count " + std::to_string(extractors.size()));
  for (const auto& x : extractors) {
    if (x.layers.size() != c.hidden.size() + 1 || x.norms.size() != c.hidden.size())
      dim_error("extractor depth");
    std::size_t in = 2 * c.pilot_length;
    for (std::size_t i = 0; i < c.hidden.size(); ++i) {
      expect_linear(x.layers[i], in, c.hidden[i], true, "extractor layer " + std::to_string(i));
      for (const Tensor* t : {&x.norms[i].gamma, &x.norms[i].beta, &x.norms[i].running_mean, &x.norms[i].running_var})
        expect_shape(*t, {c.hidden[i]}, "batch norm " + std::to_string(i));
      in = c.hidden[i];
    }
    expect_linear(x.layers.back(), in, c.feature_dim, true, "extractor output layer");
  }
  if (codebook.dim != c.feature_dim)
    dim_error("codebook dim " + std::to_string(codebook.dim) + " vs D=" + std::to_string(c.feature_dim));
  try {
    codebook.validate();
  } catch (const num::ShapeError& e) {
    dim_error(e.what());
  }
  if (egat.config.edge_input != edge || egat.config.state_dim != d || egat.updates.size() != c.egat.layers)
    dim_error("EGAT configuration");
  expect_linear(egat.init_in, edge, c.egat.init_hidden, true, "f0 input layer");
  expect_linear(egat.init_out, c.egat.init_hidden, d, true, "f0 output layer");
  for (const auto& u : egat.updates)
    for (const num::Linear* f : {&u.f1, &u.f2, &u.f3, &u.f4, &u.f5})
      expect_linear(*f, d, d, c.egat.edge_bias, "update map");
  expect_linear(egat.head_in, d, c.egat.out_hidden, true, "output head hidden layer");
  expect_linear(egat.head_out, c.egat.out_hidden, 2, true, "output head");
}

// ---- batches and inference -------------------------------------------------

CMatrix Batch::channel(std::size_t sample) const {
  const std::size_t m = h_re.cols();
  CMatrix h(m, users);
  for (std::size_t k = 0; k < users; ++k)
    for (std::size_t a = 0; a < m; ++a)
      h.at(a, k) = {h_re.at(sample * users + k, a), h_im.at(sample * users + k, a)};
  return h;
}

Batch make_batch(const chan::ChannelDataset& data, std::span<const std::size_t> indices,
                 std::size_t users, std::size_t pilot_length, double noise_power, Rng& rng) {
  if (users == 0 || indices.size() % users != 0) {
    throw std::invalid_argument("make_batch: " + std::to_string(indices.size()) +
                                " indices do not form groups of " + std::to_string(users));
  }
  const std::size_t rows = indices.size(), m = data.antennas;
  Batch b;
  b.users = users;
  b.h_re = Tensor({rows, m}, 0.0);
  b.h_im = Tensor({rows, m}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (indices[r] >= data.count) throw std::out_of_range("make_batch: sample index out of range");
    const auto h = data.sample(indices[r]);
    for (std::size_t a = 0; a < m; ++a) {
      b.h_re.at(r, a) = h[a].real();
      b.h_im.at(r, a) = h[a].imag();
    }
  }
  b.noise_re = Tensor({rows, pilot_length}, 0.0);
  b.noise_im = Tensor({rows, pilot_length}, 0.0);
  pilot::draw_noise(b.noise_re, b.noise_im, noise_power, rng);
  return b;
}

double noise_power_for(double power, double snr_db) { return power / std::pow(10.0, snr_db / 10.0); }

namespace {

template <typename Model, typename Run>
Var extract_impl(Model& m, const num::CVar& y, std::size_t users, Run run) {
  if (m.config.shared_extractor) return run(m.extractors.front(), y);
  if (users > m.extractors.size()) {
    throw std::out_of_range(std::to_string(users) + " users but only " + std::to_string(m.extractors.size()) +
                            " extractor slots");
  }
  const std::size_t samples = y.re->value.rows() / users;
  std::vector<Var> parts;
  for (std::size_t k = 0; k < users; ++k) {
    std::vector<std::size_t> rows(samples);
    for (std::size_t s = 0; s < samples; ++s) rows[s] = s * users + k;
    parts.push_back(run(m.extractors[k], {num::gather_rows(y.re, rows), num::gather_rows(y.im, rows)}));
  }
  // Parts are ordered (user, sample); restore (sample, user).
  std::vector<std::size_t> order(samples * users);
  for (std::size_t s = 0; s < samples; ++s)
    for (std::size_t k = 0; k < users; ++k) order[s * users + k] = k * samples + s;
  return num::gather_rows(num::concat_rows(parts), std::move(order));
}

}  // namespace

Var extract(num::Binder& b, TransceiverModel& m, const num::CVar& y, std::size_t users, num::Mode mode) {
  return extract_impl(m, y, users, [&](feature::FeatureExtractor& f, const num::CVar& in) {
    return f.forward(b, in, mode);
  });
}

Var extract(num::Binder& b, const TransceiverModel& m, const num::CVar& y, std::size_t users) {
  return extract_impl(m, y, users, [&](const feature::FeatureExtractor& f, const num::CVar& in) {
    return f.infer(b, in);
  });
}

Inference infer(const TransceiverModel& m, const rvq::RvqCodebook& codebook, const Batch& batch) {
  num::Binder b;
  const std::size_t users = batch.users, ant = m.config.antennas, dim = m.config.feature_dim;
  const num::CVar y = pilot::receive_pilot(b, m.pilot, batch.h_re, batch.h_im, batch.noise_re, batch.noise_im);
  Inference out;
  out.features = extract(b, m, y, users)->value;
  const std::size_t rows = out.features.rows();
  out.quantized = Tensor({rows, dim}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const rvq::Encoding e = rvq::encode(out.features.data().subspan(r * dim, dim), codebook);
    const auto v_hat = rvq::decode_indices(e.indices, codebook);
    std::copy(v_hat.begin(), v_hat.end(), out.quantized.data().begin() + static_cast<std::ptrdiff_t>(r * dim));
    out.indices.push_back(e.indices);
  }
  const Var w = m.egat.forward(b, num::constant(out.quantized), users, ant, m.config.power);
  const std::size_t block = users * ant * 2;
  for (std::size_t s = 0; s < batch.samples(); ++s) {
    const auto slice = w->value.data().subspan(s * block, block);
    out.precoders.push_back(
        egat::to_precoder(Tensor({users * ant, 2}, std::vector<double>(slice.begin(), slice.end())), users, ant));
  }
  return out;
}

Inference infer(const TransceiverModel& m, const Batch& batch) { return infer(m, m.codebook, batch); }

// ---- files -----------------------------------------------------------------

std::string serialize(const TransceiverModel& m, const CheckpointState* state) {
  std::vector<std::pair<std::string, std::string>> sections;
  sections.emplace_back("CONF", m.config.canonical());
  {
    io::Writer w;
    w.put<double>(m.pilot.power);
    w.tensor(m.pilot.re);
    w.tensor(m.pilot.im);
    sections.emplace_back("PILT", w.take());
  }
  sections.emplace_back("FEAT", encode_feature(m.extractors));
  sections.emplace_back("RVQB", encode_codebook(m.codebook));
  sections.emplace_back("EGAT", encode_egat(m.egat));
  sections.emplace_back("META", encode_meta(m.meta));
  if (state) sections.emplace_back("TRST", encode_state(*state));

  io::Writer w;
  w.bytes("MTXR");
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint64_t>(m.config_hash());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [tag, payload] : sections) {
    w.bytes(tag);
    w.str(payload);
  }
  return w.take();
}

TransceiverModel deserialize(std::string_view bytes, std::optional<CheckpointState>* state) {
  try {
    io::Reader r(bytes);
    if (r.remaining() < 4 || r.bytes(4) != "MTXR") throw ModelFileError(ModelErrc::bad_magic, "not a model file");
    const auto version = r.get<std::uint32_t>();
    if (version != kModelVersion) {
      throw ModelFileError(ModelErrc::version_mismatch, "model file version " + std::to_string(version) +
                                                            ", supported " + std::to_string(kModelVersion));
    }
    const auto stored_hash = r.get<std::uint64_t>();
    std::map<std::string, std::string> sections;
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      std::string tag(r.bytes(4));
      sections[tag] = r.str();
    }
    for (const char* tag : {"CONF", "PILT", "FEAT", "RVQB", "EGAT", "META"}) {
      if (!sections.count(tag))
        throw ModelFileError(ModelErrc::truncated, std::string("model file lacks section ") + tag);
    }

    TransceiverModel m;
    const std::string& conf = sections["CONF"];
    try {
      m.config = ModelConfig::parse(conf);
    } catch (const ConfigError& e) {
      dim_error(e.what());
    }
    {
      io::Reader s(sections["PILT"]);
      m.pilot.power = s.get<double>();
      m.pilot.re = s.tensor();
      m.pilot.im = s.tensor();
    }
    {
      io::Reader s(sections["FEAT"]);
      m.extractors = decode_feature(s);
    }
    {
      io::Reader s(sections["RVQB"]);
      m.codebook = decode_codebook(s);
    }
    {
      io::Reader s(sections["EGAT"]);
      m.egat.config = m.config.egat;
      decode_egat(s, m.egat);
    }
    {
      io::Reader s(sections["META"]);
      m.meta = decode_meta(s);
    }
    m.check_dimensions();
    if (io::fnv1a64(conf) != stored_hash)
      throw ModelFileError(ModelErrc::hash_mismatch, "config hash does not match the stored config");
    if (state) {
      state->reset();
      if (sections.count("TRST")) {
        io::Reader s(sections["TRST"]);
        *state = decode_state(s);
      }
    }
    return m;
  } catch (const io::TruncatedError& e) {
    throw ModelFileError(ModelErrc::truncated, std::string("truncated model file: ") + e.what());
  }
}

void save_model(const TransceiverModel& m, const std::string& path, const CheckpointState* state) {
  try {
    io::write_file_atomic(path, serialize(m, state));
  } catch (const std::runtime_error& e) {
    throw ModelFileError(ModelErrc::io, e.what());
  }
}

TransceiverModel load_model(const std::string& path, std::optional<CheckpointState>* state) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ModelFileError(ModelErrc::io, e.what());
  }
  return deserialize(bytes, state);
}

}  // namespace fdd::model
