#include "fdd/pilotnet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fdd::pilot {

PilotMatrix PilotMatrix::random(std::size_t antennas, std::size_t length, double power, Rng& rng) {
  PilotMatrix x;
  x.re = Tensor({antennas, length}, 0.0);
  x.im = Tensor({antennas, length}, 0.0);
  x.power = power;
  for (std::size_t i = 0; i < x.re.size(); ++i) {
    x.re[i] = rng.normal();
    x.im[i] = rng.normal();
  }
  normalize_pilot(x);
  return x;
}

void PilotMatrix::collect(std::vector<Tensor*>& out) {
  out.push_back(&re);
  out.push_back(&im);
}

void normalize_pilot(PilotMatrix& x) {
  const std::size_t m_ant = x.antennas(), len = x.length();
  const double target = std::sqrt(x.power);
  for (std::size_t l = 0; l < len; ++l) {
    double s = 0.0;
    for (std::size_t m = 0; m < m_ant; ++m) s += x.re.at(m, l) * x.re.at(m, l) + x.im.at(m, l) * x.im.at(m, l);
    if (s == 0.0) throw std::domain_error("normalize_pilot: column " + std::to_string(l) + " is zero");
    const double f = target / std::sqrt(s);
    for (std::size_t m = 0; m < m_ant; ++m) {
      x.re.at(m, l) *= f;
      x.im.at(m, l) *= f;
    }
  }
}

std::vector<cplx> receive_pilot(std::span<const cplx> h, const PilotMatrix& x, double noise_power,
                                Rng& rng) {
  if (h.size() != x.antennas()) {
    throw num::ShapeError("receive_pilot: channel has " + std::to_string(h.size()) +
                          " entries, pilot has " + std::to_string(x.antennas()) + " rows");
  }
  const double sd = std::sqrt(noise_power / 2.0);
  std::vector<cplx> y(x.length());
  for (std::size_t l = 0; l < x.length(); ++l) {
    cplx acc{};
    for (std::size_t m = 0; m < h.size(); ++m) acc += std::conj(x.at(m, l)) * h[m];
    const double nr = rng.normal();
    const double ni = rng.normal();
    y[l] = acc + cplx{sd * nr, sd * ni};
  }
  return y;
}

num::CVar receive_pilot(num::Binder& b, const PilotMatrix& x, const Tensor& h_re,
                        const Tensor& h_im, const Tensor& noise_re, const Tensor& noise_im) {
  using namespace num;
  Var xr = b.bind(x.re);
  Var xi = b.bind(x.im);
  Var a = constant(h_re);
  Var c = constant(h_im);
  Var y_re = add(add(matmul(a, xr), matmul(c, xi)), constant(noise_re));
  Var y_im = add(sub(matmul(c, xr), matmul(a, xi)), constant(noise_im));
  return {y_re, y_im};
}

void draw_noise(Tensor& re, Tensor& im, double noise_power, Rng& rng) {
  const double sd = std::sqrt(noise_power / 2.0);
  for (std::size_t i = 0; i < re.size(); ++i) {
    re[i] = sd * rng.normal();
    im[i] = sd * rng.normal();
  }
}

}  // namespace fdd::pilot
