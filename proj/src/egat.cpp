#include "fdd/egat.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fdd::egat {

namespace {

Var two_layer(num::Binder& b, const num::Linear& first, const num::Linear& second, const Var& x) {
  return second.forward(b, num::mish(first.forward(b, x)));
}

Tensor stack_rows(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw std::invalid_argument("egat: no users");
  const std::size_t d = rows.front().size();
  Tensor t({rows.size(), d}, 0.0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() != d) throw num::ShapeError("egat: users have different feature lengths");
    std::copy(rows[k].begin(), rows[k].end(), t.data().begin() + static_cast<std::ptrdiff_t>(k * d));
  }
  return t;
}

}  // namespace

void UpdateLayer::collect(std::vector<Tensor*>& out) {
  for (num::Linear* f : {&f1, &f2, &f3, &f4, &f5}) f->collect(out);
}

EgatParams EgatParams::init(const EgatConfig& cfg, Rng& rng) {
  EgatParams p;
  p.config = cfg;
  p.init_in = num::Linear::init(cfg.edge_input, cfg.init_hidden, true, rng);
  p.init_out = num::Linear::init(cfg.init_hidden, cfg.state_dim, true, rng);
  for (std::size_t g = 0; g < cfg.layers; ++g) {
    UpdateLayer u;
    for (num::Linear* f : {&u.f1, &u.f2, &u.f3, &u.f4, &u.f5})
      *f = num::Linear::init(cfg.state_dim, cfg.state_dim, cfg.edge_bias, rng);
    p.updates.push_back(std::move(u));
  }
  p.head_in = num::Linear::init(cfg.state_dim, cfg.out_hidden, true, rng);
  p.head_out = num::Linear::init(cfg.out_hidden, 2, true, rng);
  return p;
}

Var EgatParams::init_edges(num::Binder& b, const Var& v, std::size_t antennas) const {
  const std::size_t dim = v->value.cols();
  if (antennas == 0 || dim % antennas != 0) {
    throw std::invalid_argument("feature length " + std::to_string(dim) +
                                " is not divisible by the antenna count " + std::to_string(antennas));
  }
  if (dim / antennas != config.edge_input) {
    throw num::ShapeError("edge chunk of " + std::to_string(dim / antennas) +
                          " entries, network expects " + std::to_string(config.edge_input));
  }
  // Row-major reshape splits each feature row into M contiguous chunks.
  Var chunks = num::reshape(v, {v->value.rows() * antennas, dim / antennas});
  return num::mish(two_layer(b, init_in, init_out, chunks));
}

Var EgatParams::update(num::Binder& b, const Var& z, std::size_t layer, std::size_t users,
                       std::size_t antennas) const {
  const UpdateLayer& u = updates.at(layer);
  const double m = static_cast<double>(antennas);
  Var self_term = u.f1.forward(b, z);
  Var f2 = u.f2.forward(b, z);
  Var antenna_term = num::scale(num::sub(num::group_sum_broadcast(f2, antennas), f2), config.alpha / m);
  Var user_term = num::scale(
      user_attention(u.f3.forward(b, z), u.f4.forward(b, z), u.f5.forward(b, z), users, antennas),
      config.beta);
  return num::mish(num::add(num::add(self_term, antenna_term), user_term));
}

Var EgatParams::finalize(num::Binder& b, const Var& z, std::size_t users, std::size_t antennas,
                         double power) const {
  Var out = two_layer(b, head_in, head_out, z);
  const std::size_t block = users * antennas * 2;
  for (std::size_t s = 0; s < out->value.size(); s += block) {
    bool zero = true;
    for (std::size_t i = s; i < s + block && zero; ++i) zero = out->value[i] == 0.0;
    if (zero) throw std::domain_error("degenerate precoder");
  }
  return num::normalize_groups(out, users * antennas, std::sqrt(power));
}

Var EgatParams::forward(num::Binder& b, const Var& v, std::size_t users, std::size_t antennas,
                        double power) const {
  Var z = init_edges(b, v, antennas);
  for (std::size_t g = 0; g < updates.size(); ++g) z = update(b, z, g, users, antennas);
  return finalize(b, z, users, antennas, power);
}

EdgeStateGrid EgatParams::init_edges(std::span<const std::vector<double>> features,
                                     std::size_t antennas) const {
  num::Binder b;
  Var z = init_edges(b, num::constant(stack_rows(features)), antennas);
  return {features.size(), antennas, z->value};
}

std::vector<double> EgatParams::attention(const EdgeStateGrid& grid, std::size_t layer,
                                          std::size_t k, std::size_t j) const {
  if (k == j) throw std::invalid_argument("attention: k and j must differ");
  const UpdateLayer& u = updates.at(layer);
  num::Binder b;
  Var z = num::constant(grid.z);
  const Tensor f4 = u.f4.forward(b, z)->value;
  const Tensor f5 = u.f5.forward(b, z)->value;
  const std::size_t d = f4.cols(), m_count = grid.antennas;
  std::vector<double> a(d), terms(m_count);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t m = 0; m < m_count; ++m)
      terms[m] = f4.at(k * m_count + m, c) * f5.at(j * m_count + m, c);
    a[c] = num::sorted_sum(terms) / static_cast<double>(m_count);
  }
  return a;
}

EdgeStateGrid EgatParams::update_layer(const EdgeStateGrid& grid, std::size_t layer) const {
  num::Binder b;
  Var z = update(b, num::constant(grid.z), layer, grid.users, grid.antennas);
  return {grid.users, grid.antennas, z->value};
}

PrecodingMatrix EgatParams::finalize(const EdgeStateGrid& grid, double power) const {
  num::Binder b;
  Var out = finalize(b, num::constant(grid.z), grid.users, grid.antennas, power);
  return to_precoder(out->value, grid.users, grid.antennas);
}

PrecodingMatrix EgatParams::precode(std::span<const std::vector<double>> features,
                                    std::size_t antennas, double power) const {
  num::Binder b;
  Var out = forward(b, num::constant(stack_rows(features)), features.size(), antennas, power);
  return to_precoder(out->value, features.size(), antennas);
}

void EgatParams::collect(std::vector<Tensor*>& out) {
  init_in.collect(out);
  init_out.collect(out);
  for (UpdateLayer& u : updates) u.collect(out);
  head_in.collect(out);
  head_out.collect(out);
}

Var user_attention(const Var& f3, const Var& f4, const Var& f5, std::size_t users,
                   std::size_t antennas) {
  const Tensor& x3 = f3->value;
  const Tensor& x4 = f4->value;
  const Tensor& x5 = f5->value;
  const std::size_t d = x3.cols(), block = users * antennas;
  if (x4.shape() != x3.shape() || x5.shape() != x3.shape() || block == 0 || x3.rows() % block != 0) {
    throw num::ShapeError("user_attention: inputs " + num::shape_str(x3.shape()) + ", " +
                          num::shape_str(x4.shape()) + ", " + num::shape_str(x5.shape()) +
                          " for K=" + std::to_string(users) + ", M=" + std::to_string(antennas));
  }
  const std::size_t samples = x3.rows() / block;
  const double inv_m = 1.0 / static_cast<double>(antennas);
  auto row = [=](std::size_t s, std::size_t k, std::size_t m) { return ((s * users + k) * antennas + m) * d; };

  // coeff[(s*K + k)*K + j] holds a_{kj} (d entries); the diagonal stays zero.
  Tensor coeff({samples * users * users, d}, 0.0);
  Tensor out(x3.shape(), 0.0);
  std::vector<double> terms(std::max(antennas, users));
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < users; ++k) {
      for (std::size_t j = 0; j < users; ++j) {
        if (j == k) continue;
        double* a = coeff.data().data() + ((s * users + k) * users + j) * d;
        for (std::size_t c = 0; c < d; ++c) {
          for (std::size_t m = 0; m < antennas; ++m) terms[m] = x4[row(s, k, m) + c] * x5[row(s, j, m) + c];
          a[c] = num::sorted_sum(std::span(terms).first(antennas)) * inv_m;
        }
      }
    }
    for (std::size_t k = 0; k < users; ++k) {
      for (std::size_t m = 0; m < antennas; ++m) {
        for (std::size_t c = 0; c < d; ++c) {
          std::size_t n = 0;
          for (std::size_t j = 0; j < users; ++j) {
            if (j == k) continue;
            terms[n++] = coeff[((s * users + k) * users + j) * d + c] * x3[row(s, j, m) + c];
          }
          out[row(s, k, m) + c] = num::sorted_sum(std::span(terms).first(n));
        }
      }
    }
  }

  return num::make_node(
      "user_attention", std::move(out), {f3, f4, f5},
      [coeff = std::move(coeff), users, antennas, samples, d, inv_m, row](num::Node& self) {
        const Var& p3 = self.parents[0];
        const Var& p4 = self.parents[1];
        const Var& p5 = self.parents[2];
        const Tensor& g = self.grad;
        std::vector<double> da(d);
        for (std::size_t s = 0; s < samples; ++s) {
          for (std::size_t k = 0; k < users; ++k) {
            for (std::size_t j = 0; j < users; ++j) {
              if (j == k) continue;
              const double* a = coeff.data().data() + ((s * users + k) * users + j) * d;
              std::fill(da.begin(), da.end(), 0.0);
              for (std::size_t m = 0; m < antennas; ++m) {
                const std::size_t rk = row(s, k, m), rj = row(s, j, m);
                for (std::size_t c = 0; c < d; ++c) da[c] += g[rk + c] * p3->value[rj + c];
                if (p3->requires_grad) {
                  Tensor& g3 = p3->grad_buffer();
                  for (std::size_t c = 0; c < d; ++c) g3[rj + c] += a[c] * g[rk + c];
                }
              }
              for (std::size_t m = 0; m < antennas; ++m) {
                const std::size_t rk = row(s, k, m), rj = row(s, j, m);
                if (p4->requires_grad) {
                  Tensor& g4 = p4->grad_buffer();
                  for (std::size_t c = 0; c < d; ++c) g4[rk + c] += inv_m * da[c] * p5->value[rj + c];
                }
                if (p5->requires_grad) {
                  Tensor& g5 = p5->grad_buffer();
                  for (std::size_t c = 0; c < d; ++c) g5[rj + c] += inv_m * da[c] * p4->value[rk + c];
                }
              }
            }
          }
        }
      });
}

PrecodingMatrix to_precoder(const Tensor& edges, std::size_t users, std::size_t antennas) {
  if (edges.rows() != users * antennas || edges.cols() != 2) {
    throw num::ShapeError("to_precoder: edge output " + num::shape_str(edges.shape()) + " for K=" +
                          std::to_string(users) + ", M=" + std::to_string(antennas));
  }
  PrecodingMatrix w(antennas, users);
  for (std::size_t r = 0; r < users * antennas; ++r) w.data[r] = {edges.at(r, 0), edges.at(r, 1)};
  return w;
}

}  // namespace fdd::egat
