#include "fdd/rate.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fdd::rate {

using num::Tensor;

SumRate sum_rate(const CMatrix& h, const CMatrix& w, double noise_power) {
  if (!(noise_power > 0.0)) throw std::invalid_argument("sum_rate: noise power must be positive");
  if (h.rows != w.rows || h.cols != w.cols) {
    throw num::ShapeError("sum_rate: channel " + std::to_string(h.rows) + "x" + std::to_string(h.cols) +
                          " vs precoder " + std::to_string(w.rows) + "x" + std::to_string(w.cols));
  }
  SumRate r;
  for (std::size_t k = 0; k < h.cols; ++k) {
    double signal = 0.0, interference = noise_power;
    for (std::size_t j = 0; j < w.cols; ++j) {
      cplx g = 0.0;
      for (std::size_t m = 0; m < h.rows; ++m) g += std::conj(h.at(m, k)) * w.at(m, j);
      (j == k ? signal : interference) += std::norm(g);
    }
    r.per_user.push_back(std::log2(1.0 + signal / interference));
    r.total += r.per_user.back();
  }
  return r;
}

num::Var user_rates(const num::Tensor& h_re, const num::Tensor& h_im, const num::Var& w,
                    std::size_t users, double noise_power) {
  if (!(noise_power > 0.0)) throw std::invalid_argument("user_rates: noise power must be positive");
  const std::size_t m_count = h_re.cols(), rows = h_re.rows();
  if (h_im.shape() != h_re.shape() || users == 0 || rows % users != 0 || w->value.cols() != 2 ||
      w->value.rows() != rows * m_count) {
    throw num::ShapeError("user_rates: channel " + num::shape_str(h_re.shape()) + ", precoder " +
                          num::shape_str(w->value.shape()) + ", K=" + std::to_string(users));
  }
  const std::size_t samples = rows / users;
  const Tensor& wv = w->value;
  auto h_at = [&](std::size_t s, std::size_t k, std::size_t m) {
    return cplx{h_re.at(s * users + k, m), h_im.at(s * users + k, m)};
  };
  auto w_at = [&](std::size_t s, std::size_t j, std::size_t m) {
    const std::size_t r = (s * users + j) * m_count + m;
    return cplx{wv.at(r, 0), wv.at(r, 1)};
  };

  // g[(s*K + k)*K + j] = h_k^H w_j for sample s.
  std::vector<cplx> g(samples * users * users);
  std::vector<double> total(rows), interf(rows);
  num::Tensor out({rows, 1}, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < users; ++k) {
      double t = noise_power, i = noise_power;
      for (std::size_t j = 0; j < users; ++j) {
        cplx acc = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) acc += std::conj(h_at(s, k, m)) * w_at(s, j, m);
        g[(s * users + k) * users + j] = acc;
        t += std::norm(acc);
        if (j != k) i += std::norm(acc);
      }
      total[s * users + k] = t;
      interf[s * users + k] = i;
      out[s * users + k] = std::log2(t) - std::log2(i);
    }
  }

  return num::make_node(
      "user_rates", std::move(out), {w},
      [g = std::move(g), total = std::move(total), interf = std::move(interf), h_re, h_im, users,
       m_count, samples](num::Node& self) {
        Tensor& gw = self.parents[0]->grad_buffer();
        const double inv_ln2 = 1.0 / std::numbers::ln2;
        for (std::size_t s = 0; s < samples; ++s) {
          for (std::size_t k = 0; k < users; ++k) {
            const std::size_t uk = s * users + k;
            const double up = self.grad[uk] * inv_ln2;
            for (std::size_t j = 0; j < users; ++j) {
              // dR_k/d|g_kj|^2
              const double dp = up * (1.0 / total[uk] - (j != k ? 1.0 / interf[uk] : 0.0));
              const cplx gc = std::conj(g[uk * users + j]);
              for (std::size_t m = 0; m < m_count; ++m) {
                const cplx hc = {h_re.at(uk, m), -h_im.at(uk, m)};
                const cplx z = gc * hc;
                const std::size_t r = (s * users + j) * m_count + m;
                gw.at(r, 0) += dp * 2.0 * z.real();
                gw.at(r, 1) -= dp * 2.0 * z.imag();
              }
            }
          }
        }
      });
}

}  // namespace fdd::rate
