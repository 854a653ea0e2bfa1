#include <cmath>
#include <numeric>

#include "checks.hpp"
#include "doctest.h"
#include "fdd/egat.hpp"
#include "fdd/gradcheck.hpp"
#include "fdd/rate.hpp"

using namespace fdd;
using num::Tensor;

namespace {

egat::EgatConfig small_cfg() {
  egat::EgatConfig c;
  c.edge_input = 2;
  c.init_hidden = 8;
  c.state_dim = 4;
  c.out_hidden = 8;
  c.layers = 2;
  c.alpha = 0.3;
  c.beta = 0.2;
  return c;
}

std::vector<double> linear(const num::Linear& l, std::span<const double> x) {
  std::vector<double> y(l.out_dim(), 0.0);
  for (std::size_t o = 0; o < l.out_dim(); ++o) {
    for (std::size_t i = 0; i < l.in_dim(); ++i) y[o] += x[i] * l.weight.at(i, o);
    if (!l.bias.empty()) y[o] += l.bias[o];
  }
  return y;
}

// Edge update written directly from the message-passing rule.
Tensor update_oracle(const egat::EgatParams& p, const egat::EdgeStateGrid& g, std::size_t layer) {
  const auto& u = p.updates[layer];
  const std::size_t K = g.users, M = g.antennas, d = g.dim();
  auto f = [&](const num::Linear& l) {
    std::vector<std::vector<double>> out;
    for (std::size_t r = 0; r < K * M; ++r) out.push_back(linear(l, g.z.data().subspan(r * d, d)));
    return out;
  };
  const auto f1 = f(u.f1), f2 = f(u.f2), f3 = f(u.f3), f4 = f(u.f4), f5 = f(u.f5);
  const std::size_t dout = f1[0].size();
  Tensor z({K * M, dout});
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t m = 0; m < M; ++m) {
      for (std::size_t c = 0; c < dout; ++c) {
        double agg = 0.0;
        for (std::size_t mm = 0; mm < M; ++mm)
          if (mm != m) agg += f2[k * M + mm][c];
        double att = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
          if (j == k) continue;
          double a = 0.0;
          for (std::size_t mm = 0; mm < M; ++mm) a += f4[k * M + mm][c] * f5[j * M + mm][c];
          att += a / static_cast<double>(M) * f3[j * M + m][c];
        }
        const double pre = f1[k * M + m][c] + p.config.alpha / static_cast<double>(M) * agg + p.config.beta * att;
        z.at(k * M + m, c) = num::mish(pre);
      }
    }
  }
  return z;
}

std::vector<std::vector<double>> random_features(std::size_t K, std::size_t D, Rng& rng) {
  std::vector<std::vector<double>> v(K, std::vector<double>(D));
  for (auto& row : v)
    for (double& x : row) x = rng.uniform(-1, 1);
  return v;
}

}  // namespace

TEST_CASE("EGAT update layer matches a direct evaluation of the rule") {
  Rng rng(1);
  const auto p = egat::EgatParams::init(small_cfg(), rng);
  for (std::size_t K : {1, 2, 3, 5}) {
    const auto grid = p.init_edges(random_features(K, 8, rng), 4);
    CHECK(grid.z.rows() == K * 4);
    const auto next = p.update_layer(grid, 1);
    CHECK(num::max_abs_diff(next.z, update_oracle(p, grid, 1)) < 1e-12);
  }
}

TEST_CASE("EGAT attention coefficients") {
  Rng rng(2);
  const auto p = egat::EgatParams::init(small_cfg(), rng);
  const auto grid = p.init_edges(random_features(3, 8, rng), 4);
  const auto a = p.attention(grid, 0, 0, 2);
  const auto& u = p.updates[0];
  for (std::size_t c = 0; c < a.size(); ++c) {
    double want = 0;
    for (std::size_t m = 0; m < 4; ++m)
      want += linear(u.f4, grid.at(0, m))[c] * linear(u.f5, grid.at(2, m))[c] / 4.0;
    CHECK(a[c] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS(p.attention(grid, 0, 1, 1));
}

TEST_CASE("EGAT precoder meets the power constraint with equality") {
  Rng rng(3);
  const auto p = egat::EgatParams::init(small_cfg(), rng);
  for (double P : {0.5, 1.0, 4.0}) {
    const auto w = p.precode(random_features(3, 8, rng), 4, P);
    CHECK(w.rows == 4);
    CHECK(w.cols == 3);
    CHECK(w.fro_sq() == doctest::Approx(P).epsilon(1e-12));
  }
}

TEST_CASE("EGAT is equivariant to user and antenna permutations (exact)") {
  Rng rng(4);
  const auto p = egat::EgatParams::init(small_cfg(), rng);
  for (int t = 0; t < 20; ++t) {
    const std::size_t K = 2 + t % 3, M = 4;
    auto grid = p.init_edges(random_features(K, 8, rng), M);
    for (std::size_t g = 0; g < 2; ++g) grid = p.update_layer(grid, g);
    std::vector<std::size_t> pu(K), pa(M);
    std::iota(pu.begin(), pu.end(), 0);
    std::iota(pa.begin(), pa.end(), 0);
    for (std::size_t i = K; i > 1; --i) std::swap(pu[i - 1], pu[rng.below(i)]);
    for (std::size_t i = M; i > 1; --i) std::swap(pa[i - 1], pa[rng.below(i)]);
    // Permute the edge grid in both axes, run the update layers, compare.
    auto g0 = p.init_edges(random_features(K, 8, rng), M);
    egat::EdgeStateGrid gp = g0;
    const std::size_t d = g0.dim();
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t c = 0; c < d; ++c) gp.z.at(k * M + m, c) = g0.z.at(pu[k] * M + pa[m], c);
    auto a = g0, b = gp;
    for (std::size_t g = 0; g < 2; ++g) {
      a = p.update_layer(a, g);
      b = p.update_layer(b, g);
    }
    const auto wa = p.finalize(a, 1.0), wb = p.finalize(b, 1.0);
    bool exact = true;
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t m = 0; m < M; ++m) exact = exact && wb.at(m, k) == wa.at(pa[m], pu[k]);
    CHECK(exact);
  }
}

TEST_CASE("batched EGAT equals the single-instance path") {
  Rng rng(5);
  const auto p = egat::EgatParams::init(small_cfg(), rng);
  const auto f1 = random_features(3, 8, rng), f2 = random_features(3, 8, rng);
  Tensor v({6, 8});
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 8; ++c) v.at(r, c) = (r < 3 ? f1[r] : f2[r - 3])[c];
  num::Binder b;
  const Tensor out = p.forward(b, num::constant(v), 3, 4, 1.0)->value;
  const auto w2 = p.precode(f2, 4, 1.0);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t m = 0; m < 4; ++m) {
      const std::size_t r = (3 + k) * 4 + m;
      CHECK(std::abs(cplx(out.at(r, 0), out.at(r, 1)) - w2.at(m, k)) < 1e-14);
    }
}

TEST_CASE("all-zero EGAT output is rejected") {
  Rng rng(6);
  auto p = egat::EgatParams::init(small_cfg(), rng);
  p.head_out.weight.fill(0.0);
  if (!p.head_out.bias.empty()) p.head_out.bias.fill(0.0);
  CHECK_THROWS_AS(p.precode(random_features(2, 8, rng), 4, 1.0), std::domain_error);
}

TEST_CASE("sum rate agrees with the SINR definition") {
  Rng rng(7);
  for (int t = 0; t < 30; ++t) {
    const std::size_t M = 2 + rng.below(7), K = 1 + rng.below(M);
    const CMatrix h = checks::random_channel(M, K, rng), w = checks::random_channel(M, K, rng);
    const double s2 = rng.uniform(0.01, 2.0);
    const auto r = rate::sum_rate(h, w, s2);
    const auto want = checks::brute_rates(h, w, s2);
    double total = 0;
    for (std::size_t k = 0; k < K; ++k) {
      CHECK(r.per_user[k] == doctest::Approx(want[k]).epsilon(1e-12));
      total += want[k];
    }
    CHECK(r.total == doctest::Approx(total).epsilon(1e-12));
  }
  const CMatrix h(2, 1), w(2, 1);
  CHECK_THROWS(rate::sum_rate(h, w, 0.0));
}

TEST_CASE("rates vanish as the noise grows") {
  Rng rng(8);
  const CMatrix h = checks::random_channel(4, 2, rng), w = checks::random_channel(4, 2, rng);
  double prev = 1e300;
  for (double s2 : {0.1, 10.0, 1e3, 1e6}) {
    const double r = rate::sum_rate(h, w, s2).total;
    CHECK(r < prev);
    prev = r;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("batched user rates: value and gradient") {
  Rng rng(9);
  const std::size_t K = 3, M = 4, S = 2;
  const model::Batch b = checks::random_batch(S, K, M, 1, 0.1, rng);
  Tensor w({S * K * M, 2});
  for (double& x : w.data()) x = rng.normal();
  num::Binder binder;
  const Tensor r = rate::user_rates(b.h_re, b.h_im, num::constant(w), K, 0.3)->value;
  for (std::size_t s = 0; s < S; ++s) {
    const CMatrix h = b.channel(s);
    CMatrix wm(M, K);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t m = 0; m < M; ++m) {
        const std::size_t row = (s * K + k) * M + m;
        wm.at(m, k) = {w.at(row, 0), w.at(row, 1)};
      }
    const auto want = checks::brute_rates(h, wm, 0.3);
    for (std::size_t k = 0; k < K; ++k) CHECK(r[s * K + k] == doctest::Approx(want[k]).epsilon(1e-12));
  }
  Tensor wp = w;
  std::vector<Tensor*> ps{&wp};
  num::GradCheckOptions o;
  o.step = 1e-5;
  o.fourth_order = true;
  const auto res = num::grad_check(
      [&](num::Binder& bb) { return num::sum(rate::user_rates(b.h_re, b.h_im, bb.bind(wp), K, 0.3)); }, ps, o);
  CHECK(res.max_rel_error < 1e-8);
}
