#include <cmath>
#include <set>

#include "checks.hpp"
#include "doctest.h"
#include "fdd/rvq.hpp"

using namespace fdd;
using num::Tensor;

namespace {

rvq::RvqCodebook make_codebook(std::size_t dim, std::vector<std::size_t> bits, Rng& rng) {
  rvq::RvqCodebook cb;
  cb.dim = dim;
  for (std::size_t b : bits) cb.tiers.push_back(rvq::Tier::random(b, dim, rng));
  return cb;
}

}  // namespace

TEST_CASE("codeword count arithmetic") {
  const auto c = rvq::codeword_count(15, 3);
  CHECK(c.rvq_total == 96);
  CHECK(c.flat_total == 32768);
  CHECK(c.ratio == doctest::Approx(0.0029296875));
  CHECK(rvq::codeword_count(30, 3).rvq_total == 3072);
  CHECK_THROWS(rvq::codeword_count(10, 3));
}

TEST_CASE("random tiers stay inside the init range") {
  Rng rng(1);
  const auto t = rvq::Tier::random(3, 16, rng);
  CHECK(t.size() == 8);
  CHECK(t.dim() == 16);
  for (double x : t.codewords.data()) CHECK(std::abs(x) <= 0.25);
}

TEST_CASE("binarize is the MSB-first pattern of index-1") {
  for (std::size_t bits = 1; bits <= 6; ++bits) {
    for (std::size_t idx = 1; idx <= (std::size_t{1} << bits); ++idx) {
      const auto b = rvq::binarize(idx, bits);
      CHECK(b == checks::brute_bits(idx - 1, bits));
      CHECK(rvq::debinarize(b) == idx);
    }
  }
  CHECK_THROWS(rvq::binarize(0, 3));
  CHECK_THROWS(rvq::binarize(9, 3));
}

TEST_CASE("feedback bits pack and unpack") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    rvq::FeedbackBits f;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) f.bits.push_back(static_cast<std::uint8_t>(rng.below(2)));
    const auto bytes = f.packed();
    CHECK(bytes.size() == (n + 7) / 8);
    CHECK(rvq::FeedbackBits::unpack(bytes, n) == f);
  }
  rvq::FeedbackBits one;
  one.bits = {1, 0, 1};
  CHECK(one.packed() == std::vector<std::uint8_t>{0xA0});
}

TEST_CASE("encode agrees with an exhaustive scan (property)") {
  Rng rng(3);
  for (int t = 0; t < 300; ++t) {
    const std::size_t dim = 1 + rng.below(10);
    std::vector<std::size_t> bits;
    for (std::size_t n = 0, tiers = 1 + rng.below(4); n < tiers; ++n) bits.push_back(1 + rng.below(5));
    const auto cb = make_codebook(dim, bits, rng);
    std::vector<double> v(dim);
    for (double& x : v) x = rng.uniform(-1, 1);
    const auto enc = rvq::encode(v, cb);
    const auto want = checks::brute_rvq(v, cb);
    CHECK(enc.indices == want.indices);
    std::size_t total = 0;
    for (std::size_t b : bits) total += b;
    CHECK(enc.bits.size() == total);
    CHECK(rvq::decode(enc.bits, cb) == want.reconstruction);
    CHECK(rvq::decode_indices(enc.indices, cb) == want.reconstruction);
    // The residual chain ends at v - v_hat.
    for (std::size_t c = 0; c < dim; ++c)
      CHECK(enc.residuals.back()[c] == doctest::Approx(v[c] - want.reconstruction[c]).epsilon(1e-12));
  }
}

TEST_CASE("ties resolve to the lowest index") {
  Tensor cw = Tensor::matrix(3, 1, {1.0, -1.0, 1.0});
  const std::vector<double> r{0.0};
  CHECK(rvq::nearest(cw, r) == 0);
  const std::vector<double> r2{1.0};
  CHECK(rvq::nearest(cw, r2) == 0);
}

TEST_CASE("adding tiers never increases the residual of the greedy encoder on its own residual codewords") {
  // Zero codeword in every tier makes the greedy residual non-increasing.
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    auto cb = make_codebook(6, {3, 3, 3}, rng);
    for (auto& tier : cb.tiers)
      for (std::size_t c = 0; c < 6; ++c) tier.codewords.at(0, c) = 0.0;
    std::vector<double> v(6);
    for (double& x : v) x = rng.normal();
    const auto enc = rvq::encode(v, cb);
    for (std::size_t n = 1; n < enc.residuals.size(); ++n) {
      double a = 0, b = 0;
      for (std::size_t c = 0; c < 6; ++c) {
        a += enc.residuals[n][c] * enc.residuals[n][c];
        b += enc.residuals[n - 1][c] * enc.residuals[n - 1][c];
      }
      CHECK(a <= b);
    }
  }
}

TEST_CASE("truncated codebook keeps a prefix of tiers") {
  Rng rng(5);
  const auto cb = make_codebook(4, {2, 3, 4}, rng);
  const auto t = cb.truncated(2);
  CHECK(t.tiers.size() == 2);
  CHECK(t.total_bits() == 5);
  CHECK(t.tiers[1].codewords == cb.tiers[1].codewords);
  CHECK_THROWS(cb.truncated(4));
}

TEST_CASE("NSVQ surrogate keeps the quantization error norm") {
  Rng rng(6);
  const auto cb = make_codebook(8, {3, 3}, rng);
  Tensor v({20, 8});
  for (double& x : v.data()) x = rng.normal() * 0.5;
  num::Binder b;
  Tensor vv = v;
  b.train(vv);
  const auto out = rvq::nsvq_forward(b, b.bind(vv), cb, rng);
  for (std::size_t r = 0; r < 20; ++r) {
    const std::vector<double> row(v.data().begin() + r * 8, v.data().begin() + (r + 1) * 8);
    const auto hard = checks::brute_rvq(row, cb);
    double a = 0, q = 0;
    for (std::size_t c = 0; c < 8; ++c) {
      a += std::pow(out.v_train->value.at(r, c) - row[c], 2);
      q += std::pow(hard.reconstruction[c] - row[c], 2);
      CHECK(out.v_hat.at(r, c) == hard.reconstruction[c]);
    }
    CHECK(std::abs(std::sqrt(a) - std::sqrt(q)) < 1e-12);
    CHECK(out.indices[r] == hard.indices);
  }
}

TEST_CASE("NSVQ gradient reaches the selected codewords only") {
  Rng rng(7);
  auto cb = make_codebook(4, {3}, rng);
  Tensor v({3, 4});
  for (double& x : v.data()) x = rng.normal();
  num::Binder b;
  b.train(cb.tiers[0].codewords);
  const auto out = rvq::nsvq_forward(b, num::constant(v), cb, rng);
  num::backward(num::sum(num::mul(out.v_train, out.v_train)));
  const Tensor& g = b.trainables()[0].leaf->grad;
  std::set<std::size_t> used;
  for (const auto& ix : out.indices) used.insert(ix[0]);
  bool any = false;
  for (std::size_t j = 0; j < 8; ++j) {
    double n = 0;
    for (std::size_t c = 0; c < 4; ++c) n += std::abs(g.at(j, c));
    if (used.count(j)) {
      any = any || n > 0;
    } else {
      CHECK(n == 0.0);
    }
  }
  CHECK(any);
}

TEST_CASE("active_tiers restricts the quantizer") {
  Rng rng(8);
  const auto cb = make_codebook(4, {2, 2, 2}, rng);
  Tensor v({5, 4});
  for (double& x : v.data()) x = rng.normal();
  num::Binder b;
  const auto out = rvq::nsvq_forward(b, num::constant(v), cb, rng, 1);
  const auto one = cb.truncated(1);
  for (std::size_t r = 0; r < 5; ++r) {
    const std::vector<double> row(v.data().begin() + r * 4, v.data().begin() + (r + 1) * 4);
    CHECK(out.indices[r] == checks::brute_rvq(row, one).indices);
  }
}

TEST_CASE("k-means distortion never increases and matches the oracle on separated clusters") {
  Rng rng(9);
  Tensor data({120, 2});
  const double centers[3][2] = {{5, 5}, {-5, 0}, {0, -6}};
  for (std::size_t i = 0; i < 120; ++i)
    for (std::size_t c = 0; c < 2; ++c) data.at(i, c) = centers[i % 3][c] + 0.3 * rng.normal();
  Rng a(1);
  const auto km = rvq::kmeans(data, 3, a, 50);
  for (std::size_t i = 1; i < km.distortion.size(); ++i) CHECK(km.distortion[i] <= km.distortion[i - 1] + 1e-12);
  Rng b(2);
  const Tensor oracle = checks::lloyd_oracle(data, 3, b);
  CHECK(checks::nearest_distortion(data, km.centroids) ==
        doctest::Approx(checks::nearest_distortion(data, oracle)).epsilon(1e-9));
}

TEST_CASE("k-means++ seeding picks distinct data points") {
  Rng rng(10);
  Tensor data({30, 3});
  for (double& x : data.data()) x = rng.normal();
  for (std::size_t trials : {1, 0, 5}) {
    Rng s(3);
    const Tensor c = rvq::kmeans_pp_init(data, 6, s, trials);
    std::set<std::vector<double>> rows;
    for (std::size_t j = 0; j < 6; ++j) {
      std::vector<double> r(c.data().begin() + j * 3, c.data().begin() + (j + 1) * 3);
      bool found = false;
      for (std::size_t i = 0; i < 30 && !found; ++i)
        found = std::equal(r.begin(), r.end(), data.data().begin() + i * 3);
      CHECK(found);
      rows.insert(r);
    }
    CHECK(rows.size() == 6);
  }
}

TEST_CASE("Lloyd RVQ: tier distortion is non-increasing on the training data") {
  Rng rng(11);
  Tensor data({300, 6});
  for (double& x : data.data()) x = rng.normal();
  Rng s(4);
  const auto res = rvq::lloyd_train(data, {3, 3, 3}, s);
  REQUIRE(res.tier_distortion.size() == 3);
  CHECK(res.tier_distortion[1] <= res.tier_distortion[0]);
  CHECK(res.tier_distortion[2] <= res.tier_distortion[1]);
  for (const auto& t : res.codebook.tiers) CHECK(t.frozen);
}
