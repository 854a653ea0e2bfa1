#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdd::chan {

using cplx = std::complex<double>;

enum class ArrayLayout { ula, upa };

struct ArrayGeometry {
  ArrayLayout layout = ArrayLayout::ula;
  std::size_t nx = 8;        // elements along the horizontal axis
  std::size_t ny = 1;        // UPA only
  double spacing = 0.5;      // in wavelengths

  std::size_t antennas() const { return layout == ArrayLayout::ula ? nx : nx * ny; }
};

struct Angles {
  double azimuth = 0.0;    // radians, 0 = broadside
  double elevation = 0.0;  // radians, UPA only
};

// Array response with unit-modulus entries; ULA phase of element m is
// 2*pi*spacing*sin(azimuth)*m.
std::vector<cplx> steering_vector(const ArrayGeometry& array, Angles angles);

enum class GainModel { rayleigh, unit };

struct GeometryParams {
  ArrayGeometry array;
  std::size_t min_paths = 3;
  std::size_t max_paths = 8;
  double sector_center_deg = 0.0;
  double sector_width_deg = 120.0;  // user cluster centers are uniform in the sector
  double angle_spread_deg = 10.0;   // path azimuths are uniform around the cluster center
  double elevation_spread_deg = 10.0;
  GainModel gain = GainModel::rayleigh;
  std::uint64_t seed = 1;
  std::uint32_t environment = 0;

  void validate() const;
};

struct ChannelDataset {
  std::size_t antennas = 0;
  std::size_t count = 0;
  std::vector<cplx> samples;  // count x antennas, row-major
  std::uint32_t environment = 0;
  double noise_power = 0.1;
  double tx_power = 1.0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  std::span<const cplx> sample(std::size_t i) const {
    return {samples.data() + i * antennas, antennas};
  }
};

// h = sum_p alpha_p a(theta_p), then the whole set is scaled so the mean
// per-sample squared norm equals `antennas`. Stored values are rounded to
// float32 so they survive the on-disk format unchanged.
ChannelDataset generate(const GeometryParams& params, std::size_t count);

// Contiguous, disjoint index ranges in the order train, val, test.
void assign_splits(ChannelDataset& ds, std::size_t train, std::size_t val, std::size_t test);

enum class DatasetErrc { bad_magic, version_mismatch, truncated_payload, io, invalid };

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  DatasetErrc code() const { return code_; }

 private:
  DatasetErrc code_;
};

inline constexpr std::uint32_t kDatasetVersion = 1;

// Binary payload at `path`, JSON manifest at `path + ".json"`.
void save(const ChannelDataset& ds, const std::string& path);
ChannelDataset load(const std::string& path);

}  // namespace fdd::chan
