#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fdd/binio.hpp"
#include "fdd/gradcheck.hpp"
#include "fdd/layers.hpp"
#include "fdd/optim.hpp"

using namespace fdd;
using namespace fdd::num;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s), 0.0);
  for (double& x : t.data()) x = scale * rng.normal();
  return t;
}

// Checks one op's reverse-mode gradient against central differences.
double op_error(const std::function<Var(const std::vector<Var>&)>& op, std::vector<Tensor> inputs) {
  std::vector<Tensor*> ps;
  for (auto& t : inputs) ps.push_back(&t);
  Rng rng(5);
  // Random projection so every output entry carries weight.
  Tensor probe;
  const auto build = [&](Binder& b) {
    std::vector<Var> vs;
    for (auto* p : ps) vs.push_back(b.bind(*p));
    Var out = op(vs);
    if (probe.empty()) probe = random_tensor(out->value.shape(), rng);
    return sum(mul(out, constant(probe)));
  };
  GradCheckOptions o;
  o.step = 1e-5;
  o.fourth_order = true;
  return grad_check(build, ps, o).max_rel_error;
}

}  // namespace

TEST_CASE("sorted_sum depends only on the multiset of terms") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(3 + rng.below(20));
    for (double& x : v) x = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    std::vector<double> w = v;
    for (std::size_t i = w.size(); i > 1; --i) std::swap(w[i - 1], w[rng.below(i)]);
    CHECK(sorted_sum(v) == sorted_sum(w));
  }
}

TEST_CASE("Tensor basics") {
  Tensor a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 3);
  CHECK(a.at(1, 2) == 6);
  CHECK(a.sum() == 21);
  CHECK(a.sq_norm() == 91);
  CHECK(a.row(1) == Tensor({3}, std::vector<double>{4, 5, 6}));
  CHECK_THROWS_AS(a.reshaped({4}), ShapeError);
  CHECK_THROWS(Tensor::scalar(1).item() + a.item());
}

TEST_CASE("op gradients match central differences") {
  Rng rng(2);
  const auto m34 = [&] { return random_tensor({3, 4}, rng); };
  CHECK(op_error([](auto& v) { return matmul(v[0], v[1]); }, {m34(), random_tensor({4, 2}, rng)}) < 1e-7);
  CHECK(op_error([](auto& v) { return mul(v[0], v[1]); }, {m34(), m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return sub(v[0], v[1]); }, {m34(), m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return add_bias(v[0], v[1]); }, {m34(), random_tensor({4}, rng)}) < 1e-7);
  CHECK(op_error([](auto& v) { return scale_rows(v[0], v[1]); }, {m34(), random_tensor({3, 1}, rng)}) < 1e-7);
  CHECK(op_error([](auto& v) { return row_norm(v[0]); }, {m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return row_sq_norm(v[0]); }, {m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return softmax_rows(v[0]); }, {m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return mish(v[0]); }, {m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return tanh(v[0]); }, {m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return gather_rows(v[0], {2, 0, 2, 1}); }, {m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return group_sum_broadcast(v[0], 3); }, {random_tensor({6, 2}, rng)}) < 1e-7);
  CHECK(op_error([](auto& v) { return normalize_groups(v[0], 2, 1.5); }, {random_tensor({6, 2}, rng)}) < 1e-7);
  CHECK(op_error([](auto& v) { return slice_cols(v[0], 1, 3); }, {m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return reshape(v[0], {6, 2}); }, {m34()}) < 1e-7);
  CHECK(op_error([](auto& v) { return concat_cols(std::span<const Var>(v)); }, {m34(), random_tensor({3, 2}, rng)}) <
        1e-7);
  CHECK(op_error([](auto& v) { return concat_rows(std::span<const Var>(v)); }, {m34(), random_tensor({2, 4}, rng)}) <
        1e-7);
  CHECK(op_error(
            [](auto& v) {
              const CVar c = cmatmul({v[0], v[1]}, {v[2], v[3]});
              return add(c.re, scale(c.im, 0.7));
            },
            {m34(), m34(), random_tensor({4, 2}, rng), random_tensor({4, 2}, rng)}) < 1e-7);
  CHECK(op_error([](auto& v) { return batch_norm_train(v[0], v[1], v[2], 1e-5, nullptr); },
                 {random_tensor({5, 3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)}) < 1e-6);
}

TEST_CASE("mish matches its closed form") {
  for (double x : {-20.0, -3.0, -0.5, 0.0, 0.5, 3.0, 25.0}) {
    const double ref = x * std::tanh(std::log1p(std::exp(x)));
    CHECK(mish(x) == doctest::Approx(ref).epsilon(1e-14));
    const double h = 1e-6;
    CHECK(mish_grad(x) == doctest::Approx((mish(x + h) - mish(x - h)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  const Tensor s = softmax_rows(random_tensor({7, 5}, rng, 30.0));
  for (std::size_t r = 0; r < 7; ++r) {
    double t = 0;
    for (std::size_t c = 0; c < 5; ++c) t += s.at(r, c);
    CHECK(std::abs(t - 1.0) < 1e-12);
  }
}

TEST_CASE("non-finite forward values throw") {
  Tensor t({2, 2}, 0.0);
  t[1] = std::nan("");
  CHECK_THROWS_AS(make_node("probe", t, {}, nullptr), NumericalError);
}

TEST_CASE("Adam schedule: linear warmup then cosine to min_lr") {
  AdamConfig c;
  c.base_lr = 1e-2;
  c.min_lr = 1e-4;
  c.warmup_frac = 0.1;
  c.total_steps = 100;
  Adam a(c);
  CHECK(a.warmup_steps() == 10);
  CHECK(a.lr_at(5) == doctest::Approx(5e-3));
  CHECK(a.lr_at(10) == doctest::Approx(1e-2));
  CHECK(a.lr_at(55) == doctest::Approx(1e-4 + 0.5 * (1e-2 - 1e-4) * (1 + std::cos(std::numbers::pi * 0.5))));
  CHECK(a.lr_at(100) == doctest::Approx(1e-4));
  AdamConfig one = c;
  one.total_steps = 1;
  CHECK(Adam(one).warmup_steps() == 1);
}

TEST_CASE("Adam step matches a hand computation") {
  AdamConfig c;
  c.base_lr = 0.1;
  c.min_lr = 0.1;
  c.warmup_frac = 0.0;
  c.total_steps = 10;
  c.clip_norm = 0.0;
  Adam a(c);
  Tensor p({2}, std::vector<double>{1.0, -1.0});
  Tensor g({2}, std::vector<double>{0.5, -2.0});
  Tensor* ps[] = {&p};
  const Tensor* gs[] = {&g};
  a.step(ps, gs);
  // First step: m_hat = g, v_hat = g^2, so the move is lr * sign(g) up to eps.
  CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(-1.0 + 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("Adam clips the global norm and rejects NaN gradients") {
  AdamConfig c;
  c.clip_norm = 1.0;
  c.total_steps = 5;
  Adam a(c);
  Tensor p({2}, 0.0), g({2}, std::vector<double>{30.0, 40.0});
  Tensor* ps[] = {&p};
  const Tensor* gs[] = {&g};
  CHECK(a.step(ps, gs) == doctest::Approx(50.0));
  g[0] = std::nan("");
  CHECK_THROWS_AS(a.step(ps, gs), NumericalError);
}

TEST_CASE("BatchNorm running statistics and inference") {
  Rng rng(4);
  BatchNorm bn = BatchNorm::init(3);
  const Tensor x = random_tensor({8, 3}, rng);
  Binder b;
  bn.train(b, constant(x));
  for (std::size_t c = 0; c < 3; ++c) {
    double mu = 0;
    for (std::size_t r = 0; r < 8; ++r) mu += x.at(r, c) / 8;
    CHECK(bn.running_mean[c] == doctest::Approx(0.1 * mu));
  }
  Binder b2;
  const Tensor y = bn.infer(b2, constant(x))->value;
  const Tensor y1 = bn.infer(b2, constant(x.row(3).reshaped({1, 3})))->value;
  for (std::size_t c = 0; c < 3; ++c) CHECK(y.at(3, c) == y1.at(0, c));
}

TEST_CASE("binary writer and reader round trip") {
  io::Writer w;
  w.put<std::uint32_t>(7);
  w.str("hello");
  const Tensor t = Tensor::matrix(2, 2, {1.5, -2, 3, 4});
  w.tensor(t);
  io::Reader r(w.buffer());
  CHECK(r.get<std::uint32_t>() == 7);
  CHECK(r.str() == "hello");
  CHECK(r.tensor() == t);
  CHECK(r.done());
  io::Reader cut(std::string_view(w.buffer()).substr(0, w.buffer().size() - 3));
  cut.get<std::uint32_t>();
  cut.str();
  CHECK_THROWS_AS(cut.tensor(), io::TruncatedError);
  // FNV-1a reference values.
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("Rng streams are reproducible and transforms are sane") {
  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(10);
  double mean = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = c.normal();
    mean += z / n;
    sq += z * z / n;
  }
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(sq - 1.0) < 0.05);
  const std::string s = c.state();
  const double next = c.uniform();
  Rng d(0);
  d.set_state(s);
  CHECK(d.uniform() == next);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}
