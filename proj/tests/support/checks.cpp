#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "fdd/adapt.hpp"
#include "fdd/baselines.hpp"
#include "fdd/gradcheck.hpp"
#include "fdd/trainer.hpp"

namespace fdd::checks {

using num::Tensor;

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

cplx cgauss(Rng& rng) { return {rng.normal() * std::sqrt(0.5), rng.normal() * std::sqrt(0.5)}; }

rvq::RvqCodebook random_codebook(std::size_t dim, std::size_t tiers, std::size_t bits, Rng& rng, bool grid) {
  rvq::RvqCodebook cb;
  cb.dim = dim;
  for (std::size_t n = 0; n < tiers; ++n) {
    rvq::Tier t;
    t.bits = bits;
    t.codewords = Tensor({std::size_t{1} << bits, dim}, 0.0);
    // Coarse grids produce exact distance ties; the lowest index must win them.
    for (double& x : t.codewords.data()) x = grid ? std::round(rng.uniform(-2.0, 2.0)) : rng.uniform(-1.0, 1.0);
    cb.tiers.push_back(std::move(t));
  }
  return cb;
}

}  // namespace

BruteEncoding brute_rvq(const std::vector<double>& v, const rvq::RvqCodebook& cb) {
  BruteEncoding out;
  std::vector<double> r = v;
  out.reconstruction.assign(v.size(), 0.0);
  for (const auto& tier : cb.tiers) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < tier.codewords.rows(); ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < v.size(); ++c) d += (r[c] - tier.codewords.at(j, c)) * (r[c] - tier.codewords.at(j, c));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out.indices.push_back(best);
    for (std::size_t c = 0; c < v.size(); ++c) {
      r[c] -= tier.codewords.at(best, c);
      out.reconstruction[c] += tier.codewords.at(best, c);
    }
  }
  return out;
}

std::vector<std::uint8_t> brute_bits(std::size_t index, std::size_t bits) {
  std::vector<std::uint8_t> out;
  for (std::size_t b = 0; b < bits; ++b) out.push_back(static_cast<std::uint8_t>((index >> (bits - 1 - b)) & 1u));
  return out;
}

std::vector<double> brute_rates(const CMatrix& h, const CMatrix& w, double noise_power) {
  const std::size_t m = h.rows, k = h.cols;
  std::vector<double> out;
  for (std::size_t u = 0; u < k; ++u) {
    double signal = 0.0, interference = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      cplx g = 0.0;
      for (std::size_t a = 0; a < m; ++a) g += std::conj(h.at(a, u)) * w.at(a, j);
      (j == u ? signal : interference) += std::norm(g);
    }
    out.push_back(std::log2(1.0 + signal / (interference + noise_power)));
  }
  return out;
}

double max_off_diagonal(const CMatrix& h, const CMatrix& w) {
  double worst = 0.0;
  for (std::size_t u = 0; u < h.cols; ++u) {
    for (std::size_t j = 0; j < w.cols; ++j) {
      if (j == u) continue;
      cplx g = 0.0;
      for (std::size_t a = 0; a < h.rows; ++a) g += std::conj(h.at(a, u)) * w.at(a, j);
      worst = std::max(worst, std::abs(g));
    }
  }
  return worst;
}

CMatrix random_channel(std::size_t rows, std::size_t cols, Rng& rng) {
  CMatrix h(rows, cols);
  for (auto& x : h.data) x = cgauss(rng);
  return h;
}

CMatrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
  CMatrix q = random_channel(rows, cols, rng);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      cplx dot = 0.0;
      for (std::size_t r = 0; r < rows; ++r) dot += std::conj(q.at(r, p)) * q.at(r, c);
      for (std::size_t r = 0; r < rows; ++r) q.at(r, c) -= dot * q.at(r, p);
    }
    double n = 0.0;
    for (std::size_t r = 0; r < rows; ++r) n += std::norm(q.at(r, c));
    n = std::sqrt(n);
    for (std::size_t r = 0; r < rows; ++r) q.at(r, c) /= n;
  }
  return q;
}

double nearest_distortion(const Tensor& data, const Tensor& centers) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centers.rows(); ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < data.cols(); ++c) d += (data.at(i, c) - centers.at(j, c)) * (data.at(i, c) - centers.at(j, c));
      best = std::min(best, d);
    }
    total += best;
  }
  return total / static_cast<double>(data.rows());
}

Tensor lloyd_oracle(const Tensor& data, std::size_t k, Rng& rng, std::size_t iters) {
  const std::size_t n = data.rows(), d = data.cols();
  auto dist = [&](std::size_t i, const Tensor& c, std::size_t j) {
    double s = 0.0;
    for (std::size_t a = 0; a < d; ++a) s += (data.at(i, a) - c.at(j, a)) * (data.at(i, a) - c.at(j, a));
    return s;
  };
  Tensor c({k, d}, 0.0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t a = 0; a < d; ++a) c.at(j, a) = data.at(pick, a);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], dist(i, c, j));
      total += best[i];
    }
    if (j + 1 == k) break;
    double u = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (u < best[i]) {
        pick = i;
        break;
      }
      u -= best[i];
    }
  }
  for (std::size_t it = 0; it < iters; ++it) {
    Tensor sum({k, d}, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (dist(i, c, j) < dist(i, c, arg)) arg = j;
      ++count[arg];
      for (std::size_t a = 0; a < d; ++a) sum.at(arg, a) += data.at(i, a);
    }
    for (std::size_t j = 0; j < k; ++j)
      if (count[j] > 0)
        for (std::size_t a = 0; a < d; ++a) c.at(j, a) = sum.at(j, a) / static_cast<double>(count[j]);
  }
  return c;
}

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.antennas = 4;
  c.pilot_length = 4;
  c.feature_dim = 8;
  c.hidden = {8, 8};
  c.tiers = 2;
  c.tier_bits = 2;
  c.egat.state_dim = 4;
  c.egat.init_hidden = 8;
  c.egat.out_hidden = 8;
  c.egat.layers = 2;
  return c;
}

model::Batch random_batch(std::size_t samples, std::size_t users, std::size_t antennas, std::size_t pilot_length,
                          double noise_power, Rng& rng) {
  model::Batch b;
  b.users = users;
  const std::size_t rows = samples * users;
  b.h_re = Tensor({rows, antennas}, 0.0);
  b.h_im = Tensor({rows, antennas}, 0.0);
  for (std::size_t i = 0; i < b.h_re.size(); ++i) {
    const cplx z = cgauss(rng);
    b.h_re[i] = z.real();
    b.h_im[i] = z.imag();
  }
  b.noise_re = Tensor({rows, pilot_length}, 0.0);
  b.noise_im = Tensor({rows, pilot_length}, 0.0);
  pilot::draw_noise(b.noise_re, b.noise_im, noise_power, rng);
  return b;
}

model::Batch permute_users(const model::Batch& b, const std::vector<std::size_t>& perm) {
  model::Batch out = b;
  const std::size_t k = b.users;
  auto move_rows = [&](const Tensor& src, Tensor& dst) {
    const std::size_t w = src.cols();
    for (std::size_t s = 0; s < b.samples(); ++s)
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t c = 0; c < w; ++c) dst.at(s * k + i, c) = src.at(s * k + perm[i], c);
  };
  move_rows(b.h_re, out.h_re);
  move_rows(b.h_im, out.h_im);
  move_rows(b.noise_re, out.noise_re);
  move_rows(b.noise_im, out.noise_im);
  return out;
}

Outcome codeword_arithmetic() {
  const rvq::CodewordCount c = rvq::codeword_count(15, 3);
  const std::uint64_t rvq_oracle = 3 * (std::uint64_t{1} << 5);
  const std::uint64_t flat_oracle = std::uint64_t{1} << 15;
  const bool counts = c.rvq_total == rvq_oracle && c.flat_total == flat_oracle && rvq_oracle == 96 &&
                      flat_oracle == 32768;
  const double pct = 100.0 * c.ratio;
  // 96 / 32768 = 0.29296875 %, which reads 0.29 % at two decimals.
  const bool ratio = c.ratio == 96.0 / 32768.0 && std::round(pct * 100.0) == 29.0;
  return {counts && ratio, std::to_string(c.rvq_total) + " vs " + std::to_string(c.flat_total) + " codewords, " +
                               fmt(pct) + "%"};
}

Outcome rvq_oracle(std::size_t trials, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t mismatches = 0, ties = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t dim = 1 + rng.below(8), tiers = 1 + rng.below(4), bits = 1 + rng.below(4);
    const bool grid = t % 3 == 0;
    const rvq::RvqCodebook cb = random_codebook(dim, tiers, bits, rng, grid);
    std::vector<double> v(dim);
    for (double& x : v) x = grid ? std::round(rng.uniform(-3.0, 3.0)) : rng.uniform(-2.0, 2.0);
    const BruteEncoding want = brute_rvq(v, cb);
    const rvq::Encoding got = rvq::encode(v, cb);
    std::vector<std::uint8_t> bits_want;
    for (std::size_t i : want.indices) {
      const auto b = brute_bits(i, bits);
      bits_want.insert(bits_want.end(), b.begin(), b.end());
    }
    const std::vector<double> dec = rvq::decode(got.bits, cb);
    if (got.indices != want.indices || got.bits.bits != bits_want || dec != want.reconstruction) ++mismatches;
    if (grid) ++ties;
  }
  return {mismatches == 0, std::to_string(trials - mismatches) + "/" + std::to_string(trials) + " match (" +
                               std::to_string(ties) + " on tie-prone grids)"};
}

Outcome gradient_suite(double tolerance) {
  const model::ModelConfig cfg = tiny_config();
  model::TransceiverModel m = model::TransceiverModel::init(cfg, 11);
  Rng rng(12);
  const double sigma2 = 0.1;
  const model::Batch batch = random_batch(3, 2, cfg.antennas, cfg.pilot_length, sigma2, rng);

  struct Group {
    const char* name;
    std::vector<Tensor*> params;
  };
  std::vector<Group> groups(4);
  groups[0].name = "pilot";
  m.pilot.collect(groups[0].params);
  groups[1].name = "extractor";
  for (auto& x : m.extractors) x.collect(groups[1].params);
  groups[2].name = "codebook";
  for (auto& t : m.codebook.tiers) groups[2].params.push_back(&t.codewords);
  groups[3].name = "egat";
  m.egat.collect(groups[3].params);

  std::vector<Tensor*> all;
  for (const auto& g : groups) all.insert(all.end(), g.params.begin(), g.params.end());
  const auto build = [&](num::Binder& b) {
    Rng noise(99);  // same NSVQ direction on every evaluation
    return train::total_loss(b, m, batch, cfg.tiers, 1.0, sigma2, noise).loss;
  };
  num::GradCheckOptions opts;
  opts.step = 1e-5;
  opts.fourth_order = true;
  const num::GradCheckResult r = num::grad_check(build, all, opts);

  std::string detail = "max rel err " + fmt(r.max_rel_error) + " over " + std::to_string(r.checked) + " entries";
  std::size_t offset = 0;
  for (const auto& g : groups) {
    if (r.worst_param >= offset && r.worst_param < offset + g.params.size()) detail += ", worst in " + std::string(g.name);
    offset += g.params.size();
  }
  return {r.max_rel_error < tolerance, detail};
}

Outcome nsvq_exactness(std::size_t draws, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < draws; ++t) {
    const std::size_t dim = 1 + rng.below(16), tiers = 1 + rng.below(3), bits = 1 + rng.below(4);
    const rvq::RvqCodebook cb = random_codebook(dim, tiers, bits, rng, false);
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    const std::vector<double> vt = rvq::nsvq_forward(v, cb, rng);
    const BruteEncoding hard = brute_rvq(v, cb);
    double a = 0.0, b = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      a += (vt[c] - v[c]) * (vt[c] - v[c]);
      b += (hard.reconstruction[c] - v[c]) * (hard.reconstruction[c] - v[c]);
    }
    worst = std::max(worst, std::abs(std::sqrt(a) - std::sqrt(b)));
  }

  // Deployment path: repeated inference is identical and equals hard RVQ of the features.
  const model::ModelConfig cfg = tiny_config();
  const model::TransceiverModel m = model::TransceiverModel::init(cfg, 21);
  const model::Batch batch = random_batch(20, 2, cfg.antennas, cfg.pilot_length, 0.1, rng);
  const model::Inference x = model::infer(m, batch), y = model::infer(m, batch);
  bool clean = x.quantized.data().size() == y.quantized.data().size();
  for (std::size_t i = 0; clean && i < x.quantized.size(); ++i) clean = x.quantized[i] == y.quantized[i];
  const std::size_t d = cfg.feature_dim;
  for (std::size_t r = 0; clean && r < x.features.rows(); ++r) {
    const auto row = x.features.data().subspan(r * d, d);
    const BruteEncoding want = brute_rvq({row.begin(), row.end()}, m.codebook);
    for (std::size_t c = 0; c < d; ++c) clean = clean && x.quantized.at(r, c) == want.reconstruction[c];
  }
  return {worst <= 1e-12 && clean,
          "max norm gap " + fmt(worst) + " over " + std::to_string(draws) + " draws; inference " +
              (clean ? "unperturbed" : "PERTURBED")};
}

Outcome egat_equivariance(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  model::ModelConfig cfg;  // preset dimensions, untrained weights
  std::size_t failures = 0, dup_failures = 0;
  model::TransceiverModel m = model::TransceiverModel::init(cfg, seed);
  for (std::size_t t = 0; t < instances; ++t) {
    if (t % 10 == 0) m = model::TransceiverModel::init(cfg, mix_seed(seed, t));
    const std::size_t k = 2 + t % 3;
    const model::Batch batch = random_batch(1, k, cfg.antennas, cfg.pilot_length, 0.1, rng);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = k; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    if (std::is_sorted(perm.begin(), perm.end())) std::swap(perm[0], perm[1]);
    const CMatrix w = model::infer(m, batch).precoders[0];
    const CMatrix wp = model::infer(m, permute_users(batch, perm)).precoders[0];
    bool same = true;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t a = 0; a < cfg.antennas; ++a) same = same && wp.at(a, i) == w.at(a, perm[i]);
    if (!same) ++failures;

    std::vector<std::size_t> dup(k);
    std::iota(dup.begin(), dup.end(), 0);
    dup[1] = 0;
    const CMatrix wd = model::infer(m, permute_users(batch, dup)).precoders[0];
    bool twin = true;
    for (std::size_t a = 0; a < cfg.antennas; ++a) twin = twin && wd.at(a, 0) == wd.at(a, 1);
    if (!twin) ++dup_failures;
  }
  return {failures == 0 && dup_failures == 0,
          std::to_string(instances - failures) + "/" + std::to_string(instances) + " exact permutations, " +
              std::to_string(instances - dup_failures) + "/" + std::to_string(instances) + " duplicate pairs equal"};
}

Outcome zf_correctness(std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  const double power = 1.0;
  double worst = 0.0, worst_power = 0.0;
  std::size_t flagged = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t m = 8, k = 1 + t % m;
    const CMatrix h = random_channel(m, k, rng);
    const base::ZfResult zf = base::zf_precode(h, power);
    if (zf.regularized) ++flagged;
    worst = std::max(worst, max_off_diagonal(h, zf.w));
    for (std::size_t j = 0; j < k; ++j) {
      double p = 0.0;
      for (std::size_t a = 0; a < m; ++a) p += std::norm(zf.w.at(a, j));
      worst_power = std::max(worst_power, std::abs(p - power / static_cast<double>(k)));
    }
  }
  double rate_gap = 0.0;
  for (std::size_t k = 1; k <= 8; ++k) {
    const double sigma2 = 0.05 * static_cast<double>(k);
    const CMatrix h = random_orthonormal(8, k, rng);
    const CMatrix w = base::zf_precode(h, power).w;
    const double closed = std::log2(1.0 + (power / static_cast<double>(k)) / sigma2);
    const rate::SumRate lib = rate::sum_rate(h, w, sigma2);
    const std::vector<double> ref = brute_rates(h, w, sigma2);
    for (std::size_t u = 0; u < k; ++u) {
      rate_gap = std::max({rate_gap, std::abs(lib.per_user[u] - closed), std::abs(ref[u] - closed)});
    }
  }
  return {worst < 1e-9 && worst_power <= 1e-12 && flagged == 0 && rate_gap <= 1e-9,
          "max |h_k^H w_j| " + fmt(worst) + ", power gap " + fmt(worst_power) + ", orthonormal rate gap " +
              fmt(rate_gap)};
}

Outcome dkm_quality(std::size_t codebooks, std::uint64_t seed) {
  Rng rng(seed);
  double worst_ratio = 0.0, worst_row = 0.0;
  for (std::size_t t = 0; t < codebooks; ++t) {
    const std::size_t bits = 3 + rng.below(3), dim = std::size_t{4} << rng.below(4);
    const std::size_t target = 1 + rng.below(bits - 1);
    Tensor q({std::size_t{1} << bits, dim}, 0.0);
    const double s = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& x : q.data()) x = rng.uniform(-s, s);
    Rng a(mix_seed(seed, 2 * t)), b(mix_seed(seed, 2 * t + 1));
    const adapt::DkmResult r = adapt::dkm_compress(q, target, a);
    const Tensor lloyd = lloyd_oracle(q, std::size_t{1} << target, b);
    worst_ratio = std::max(worst_ratio, nearest_distortion(q, r.codewords) / nearest_distortion(q, lloyd));
    for (std::size_t i = 0; i < r.attention.rows(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < r.attention.cols(); ++j) row += r.attention.at(i, j);
      worst_row = std::max(worst_row, std::abs(row - 1.0));
    }
  }
  return {worst_ratio <= 1.1 && worst_row <= 1e-12,
          "worst distortion ratio " + fmt(worst_ratio) + " vs Lloyd, row-sum gap " + fmt(worst_row)};
}

}  // namespace fdd::checks
