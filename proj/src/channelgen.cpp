#include "fdd/channelgen.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "fdd/binio.hpp"
#include "fdd/rng.hpp"

namespace fdd::chan {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'C', '1'};
constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<std::size_t> range(std::size_t b, std::size_t e) {
  std::vector<std::size_t> v(e - b);
  for (std::size_t i = b; i < e; ++i) v[i - b] = i;
  return v;
}

}  // namespace

std::vector<cplx> steering_vector(const ArrayGeometry& array, Angles angles) {
  const double k = 2.0 * std::numbers::pi * array.spacing;
  std::vector<cplx> a;
  a.reserve(array.antennas());
  if (array.layout == ArrayLayout::ula) {
    const double s = std::sin(angles.azimuth);
    for (std::size_t m = 0; m < array.nx; ++m) a.push_back(std::polar(1.0, k * s * static_cast<double>(m)));
    return a;
  }
  const double sx = std::sin(angles.azimuth) * std::cos(angles.elevation);
  const double sy = std::sin(angles.elevation);
  for (std::size_t y = 0; y < array.ny; ++y)
    for (std::size_t x = 0; x < array.nx; ++x)
      a.push_back(std::polar(1.0, k * (sx * static_cast<double>(x) + sy * static_cast<double>(y))));
  return a;
}

void GeometryParams::validate() const {
  if (min_paths < 1 || max_paths < min_paths) {
    throw std::invalid_argument("geometry: path count range must satisfy 1 <= min <= max");
  }
  if (array.antennas() == 0) throw std::invalid_argument("geometry: array has no elements");
  if (sector_width_deg < 0.0 || angle_spread_deg < 0.0) {
    throw std::invalid_argument("geometry: negative angular width");
  }
}

ChannelDataset generate(const GeometryParams& params, std::size_t count) {
  params.validate();
  if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
  const std::size_t m_ant = params.array.antennas();

  ChannelDataset ds;
  ds.antennas = m_ant;
  ds.count = count;
  ds.environment = params.environment;
  ds.samples.assign(count * m_ant, cplx{});

  double total_power = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(params.seed, i));
    const double center =
        (params.sector_center_deg + params.sector_width_deg * (rng.uniform() - 0.5)) * kDeg;
    const double center_el = params.elevation_spread_deg * (rng.uniform() - 0.5) * kDeg;
    const std::size_t paths = params.min_paths + rng.below(params.max_paths - params.min_paths + 1);
    cplx* h = ds.samples.data() + i * m_ant;
    for (std::size_t p = 0; p < paths; ++p) {
      Angles ang;
      ang.azimuth = center + params.angle_spread_deg * (rng.uniform() - 0.5) * kDeg;
      ang.elevation = center_el + params.elevation_spread_deg * (rng.uniform() - 0.5) * kDeg;
      cplx gain{1.0, 0.0};
      if (params.gain == GainModel::rayleigh) {
        const double sd = std::sqrt(0.5 / static_cast<double>(paths));
        const double re = rng.normal();
        const double im = rng.normal();
        gain = {sd * re, sd * im};
      }
      const auto a = steering_vector(params.array, ang);
      for (std::size_t m = 0; m < m_ant; ++m) h[m] += gain * a[m];
    }
    for (std::size_t m = 0; m < m_ant; ++m) total_power += std::norm(h[m]);
  }

  const double scale = std::sqrt(static_cast<double>(m_ant * count) / total_power);
  for (cplx& x : ds.samples) {
    x = {static_cast<double>(static_cast<float>(x.real() * scale)),
         static_cast<double>(static_cast<float>(x.imag() * scale))};
  }
  assign_splits(ds, count, 0, 0);
  return ds;
}

void assign_splits(ChannelDataset& ds, std::size_t train, std::size_t val, std::size_t test) {
  if (train + val + test > ds.count) {
    throw DatasetError(DatasetErrc::invalid, "split sizes " + std::to_string(train + val + test) +
                                                 " exceed dataset size " + std::to_string(ds.count));
  }
  ds.train = range(0, train);
  ds.val = range(train, train + val);
  ds.test = range(train + val, train + val + test);
}

void save(const ChannelDataset& ds, const std::string& path) {
  io::Writer w;
  w.bytes(std::string_view(kMagic, 4));
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.antennas));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.count));
  for (const cplx& x : ds.samples) {
    w.put<float>(static_cast<float>(x.real()));
    w.put<float>(static_cast<float>(x.imag()));
  }

  nlohmann::json manifest = {
      {"format", "MMC1"},
      {"version", kDatasetVersion},
      {"antennas", ds.antennas},
      {"count", ds.count},
      {"environment", ds.environment},
      {"noise_power", ds.noise_power},
      {"tx_power", ds.tx_power},
      {"splits", {{"train", ds.train}, {"val", ds.val}, {"test", ds.test}}},
  };
  try {
    io::write_file_atomic(path, w.buffer());
    io::write_file_atomic(path + ".json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    throw DatasetError(DatasetErrc::io, e.what());
  }
}

ChannelDataset load(const std::string& path) {
  std::string raw;
  std::string manifest_text;
  try {
    raw = io::read_file(path);
    manifest_text = io::read_file(path + ".json");
  } catch (const std::exception& e) {
    throw DatasetError(DatasetErrc::io, e.what());
  }
  if (raw.size() < 4 || raw.compare(0, 4, kMagic, 4) != 0) {
    throw DatasetError(DatasetErrc::bad_magic, "bad magic in '" + path + "'");
  }
  io::Reader r(std::string_view(raw).substr(4));
  ChannelDataset ds;
  try {
    const auto version = r.get<std::uint32_t>();
    if (version != kDatasetVersion) {
      throw DatasetError(DatasetErrc::version_mismatch,
                         "version mismatch: file " + std::to_string(version) + ", expected " +
                             std::to_string(kDatasetVersion));
    }
    ds.antennas = r.get<std::uint32_t>();
    ds.count = r.get<std::uint32_t>();
    if (r.remaining() != ds.count * ds.antennas * 2 * sizeof(float)) {
      throw DatasetError(DatasetErrc::truncated_payload,
                         "truncated payload: header declares " + std::to_string(ds.count) +
                             " samples, file holds " + std::to_string(r.remaining()) + " payload bytes");
    }
    ds.samples.resize(ds.count * ds.antennas);
    for (cplx& x : ds.samples) {
      const float re = r.get<float>();
      const float im = r.get<float>();
      x = {re, im};
    }
  } catch (const io::TruncatedError& e) {
    throw DatasetError(DatasetErrc::truncated_payload, std::string("truncated payload: ") + e.what());
  }

  nlohmann::json m;
  try {
    m = nlohmann::json::parse(manifest_text);
  } catch (const std::exception& e) {
    throw DatasetError(DatasetErrc::invalid, "manifest parse error: " + std::string(e.what()));
  }
  if (m.value("count", std::size_t{0}) != ds.count || m.value("antennas", std::size_t{0}) != ds.antennas) {
    throw DatasetError(DatasetErrc::truncated_payload,
                       "truncated payload: manifest declares " + std::to_string(m.value("count", 0)) +
                           " samples, payload holds " + std::to_string(ds.count));
  }
  ds.environment = m.value("environment", 0u);
  ds.noise_power = m.value("noise_power", 0.1);
  ds.tx_power = m.value("tx_power", 1.0);
  const auto& splits = m.at("splits");
  ds.train = splits.at("train").get<std::vector<std::size_t>>();
  ds.val = splits.at("val").get<std::vector<std::size_t>>();
  ds.test = splits.at("test").get<std::vector<std::size_t>>();
  for (const auto* s : {&ds.train, &ds.val, &ds.test})
    for (std::size_t i : *s)
      if (i >= ds.count) throw DatasetError(DatasetErrc::invalid, "split index out of range");
  return ds;
}

}  // namespace fdd::chan
