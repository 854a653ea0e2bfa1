#include "fdd/rvq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fdd::rvq {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

}  // namespace

Tier Tier::random(std::size_t bits, std::size_t dim, Rng& rng) {
  Tier t;
  t.bits = bits;
  t.codewords = Tensor({std::size_t{1} << bits, dim}, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& x : t.codewords.data()) x = rng.uniform(-bound, bound);
  return t;
}

std::size_t RvqCodebook::total_bits() const {
  std::size_t b = 0;
  for (const Tier& t : tiers) b += t.bits;
  return b;
}

std::size_t RvqCodebook::total_codewords() const {
  std::size_t n = 0;
  for (const Tier& t : tiers) n += t.size();
  return n;
}

RvqCodebook RvqCodebook::truncated(std::size_t n_tiers) const {
  if (n_tiers > tiers.size()) {
    throw std::out_of_range("truncated: requested " + std::to_string(n_tiers) + " of " +
                            std::to_string(tiers.size()) + " tiers");
  }
  RvqCodebook out{dim, {tiers.begin(), tiers.begin() + static_cast<std::ptrdiff_t>(n_tiers)}};
  return out;
}

void RvqCodebook::validate() const {
  for (std::size_t n = 0; n < tiers.size(); ++n) {
    const Tier& t = tiers[n];
    if (t.codewords.rank() != 2 || t.size() != (std::size_t{1} << t.bits) || t.dim() != dim) {
      throw num::ShapeError("codebook tier " + std::to_string(n) + " has shape " +
                            num::shape_str(t.codewords.shape()) + ", expected (" +
                            std::to_string(std::size_t{1} << t.bits) + "," + std::to_string(dim) + ")");
    }
    if (!t.codewords.all_finite()) throw num::NumericalError("codebook tier has non-finite codewords");
  }
}

std::vector<std::uint8_t> FeedbackBits::packed() const {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  return out;
}

FeedbackBits FeedbackBits::unpack(std::span<const std::uint8_t> bytes, std::size_t n_bits) {
  if (bytes.size() * 8 < n_bits) throw std::invalid_argument("unpack: not enough bytes");
  FeedbackBits fb;
  fb.bits.resize(n_bits);
  for (std::size_t i = 0; i < n_bits; ++i) fb.bits[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  return fb;
}

std::size_t nearest(const Tensor& codewords, std::span<const double> r) {
  const std::size_t d = codewords.cols();
  if (r.size() != d) {
    throw num::ShapeError("nearest: vector of length " + std::to_string(r.size()) +
                          " vs codewords " + num::shape_str(codewords.shape()));
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < codewords.rows(); ++j) {
    const double dist = sq_dist(codewords.data().data() + j * d, r.data(), d);
    if (dist < best_d) {
      best_d = dist;
      best = j;
    }
  }
  return best;
}

std::vector<std::uint8_t> binarize(std::size_t index, std::size_t bits) {
  if (bits >= 64 || index < 1 || index > (std::size_t{1} << bits)) {
    throw std::out_of_range("binarize: index " + std::to_string(index) + " outside [1, 2^" +
                            std::to_string(bits) + "]");
  }
  const std::size_t v = index - 1;
  std::vector<std::uint8_t> out(bits);
  for (std::size_t i = 0; i < bits; ++i) out[i] = (v >> (bits - 1 - i)) & 1u;
  return out;
}

std::size_t debinarize(std::span<const std::uint8_t> bits) {
  std::size_t v = 0;
  for (std::uint8_t b : bits) {
    if (b > 1) throw std::invalid_argument("debinarize: entries must be 0 or 1");
    v = (v << 1) | b;
  }
  return v + 1;
}

Encoding encode(std::span<const double> v, const RvqCodebook& cb) {
  if (v.size() != cb.dim) {
    throw num::ShapeError("encode: feature length " + std::to_string(v.size()) +
                          " vs codebook dim " + std::to_string(cb.dim));
  }
  Encoding e;
  e.residuals.emplace_back(v.begin(), v.end());
  for (const Tier& t : cb.tiers) {
    const std::vector<double>& r = e.residuals.back();
    const std::size_t i = nearest(t.codewords, r);
    e.indices.push_back(i);
    const auto b = binarize(i + 1, t.bits);
    e.bits.bits.insert(e.bits.bits.end(), b.begin(), b.end());
    std::vector<double> next = r;
    for (std::size_t j = 0; j < cb.dim; ++j) next[j] -= t.codewords.at(i, j);
    e.residuals.push_back(std::move(next));
  }
  return e;
}

std::vector<double> decode_indices(std::span<const std::size_t> indices, const RvqCodebook& cb) {
  if (indices.size() != cb.tiers.size()) {
    throw std::invalid_argument("decode: " + std::to_string(indices.size()) + " indices for " +
                                std::to_string(cb.tiers.size()) + " tiers");
  }
  std::vector<double> out(cb.dim, 0.0);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const Tier& t = cb.tiers[n];
    if (indices[n] >= t.size()) throw std::out_of_range("decode: index out of range");
    for (std::size_t j = 0; j < cb.dim; ++j) out[j] += t.codewords.at(indices[n], j);
  }
  return out;
}

std::vector<double> decode(const FeedbackBits& bits, const RvqCodebook& cb) {
  if (bits.size() != cb.total_bits()) {
    throw std::invalid_argument("decode: got " + std::to_string(bits.size()) +
                                " bits, codebook expects " + std::to_string(cb.total_bits()));
  }
  std::vector<std::size_t> idx;
  std::size_t pos = 0;
  for (const Tier& t : cb.tiers) {
    idx.push_back(debinarize(std::span(bits.bits).subspan(pos, t.bits)) - 1);
    pos += t.bits;
  }
  return decode_indices(idx, cb);
}

CodewordCount codeword_count(std::size_t total_bits, std::size_t tiers) {
  if (tiers == 0 || total_bits % tiers != 0) {
    throw std::invalid_argument("codeword_count: N=" + std::to_string(tiers) +
                                " does not divide B=" + std::to_string(total_bits));
  }
  if (total_bits >= 64) throw std::out_of_range("codeword_count: B too large");
  CodewordCount c;
  c.rvq_total = static_cast<std::uint64_t>(tiers) << (total_bits / tiers);
  c.flat_total = std::uint64_t{1} << total_bits;
  c.ratio = static_cast<double>(c.rvq_total) / static_cast<double>(c.flat_total);
  return c;
}

NsvqOutput nsvq_forward(num::Binder& b, const Var& v, const RvqCodebook& cb, Rng& rng,
                        std::size_t active_tiers) {
  using namespace num;
  const std::size_t rows = v->value.rows(), d = v->value.cols();
  if (d != cb.dim) {
    throw ShapeError("nsvq_forward: features " + shape_str(v->value.shape()) + " vs codebook dim " +
                     std::to_string(cb.dim));
  }
  const std::size_t n_tiers = std::min(active_tiers, cb.tiers.size());
  const RvqCodebook active = n_tiers == cb.tiers.size() ? cb : cb.truncated(n_tiers);
  NsvqOutput out;
  out.indices.assign(rows, {});
  std::vector<std::vector<std::size_t>> per_tier(n_tiers, std::vector<std::size_t>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const Encoding e = encode(std::span(v->value.data().data() + r * d, d), active);
    out.indices[r] = e.indices;
    for (std::size_t n = 0; n < e.indices.size(); ++n) per_tier[n][r] = e.indices[n];
  }

  Var v_hat;
  for (std::size_t n = 0; n < n_tiers; ++n) {
    Var q = gather_rows(b.bind(cb.tiers[n].codewords), per_tier[n]);
    v_hat = v_hat ? add(v_hat, q) : q;
  }
  if (!v_hat) v_hat = constant(Tensor({rows, d}, 0.0));
  out.v_hat = v_hat->value;

  Tensor u_dir({rows, d}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (u_dir[r * d + j] = rng.normal()) * u_dir[r * d + j];
    const double inv = 1.0 / std::sqrt(s);
    for (std::size_t j = 0; j < d; ++j) u_dir[r * d + j] *= inv;
  }
  Var err_norm = row_norm(sub(v, v_hat));
  out.v_train = add(v, scale_rows(constant(std::move(u_dir)), err_norm));
  return out;
}

std::vector<double> nsvq_forward(std::span<const double> v, const RvqCodebook& cb, Rng& rng) {
  Tensor t({1, v.size()}, std::vector<double>(v.begin(), v.end()));
  num::Binder b;
  NsvqOutput o = nsvq_forward(b, num::constant(std::move(t)), cb, rng);
  return {o.v_train->value.data().begin(), o.v_train->value.data().end()};
}

Tensor kmeans_pp_init(const Tensor& data, std::size_t k, Rng& rng, std::size_t trials) {
  const std::size_t n = data.rows(), d = data.cols();
  if (n == 0 || k == 0) throw std::invalid_argument("kmeans_pp_init: empty data or k = 0");
  if (trials == 0) trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  Tensor c({k, d}, 0.0);
  auto copy_row = [&](std::size_t dst, std::size_t src) {
    std::copy_n(data.data().data() + src * d, d, c.data().data() + dst * d);
  };
  auto row = [&](std::size_t i) { return data.data().data() + i * d; };
  copy_row(0, rng.below(n));
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) best[i] = sq_dist(row(i), c.data().data(), d);
  for (std::size_t j = 1; j < k; ++j) {
    const double total = std::accumulate(best.begin(), best.end(), 0.0);
    std::size_t pick = 0;
    double pick_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      std::size_t cand = n - 1;
      if (total <= 0.0) {
        cand = rng.below(n);
      } else {
        double u = rng.uniform() * total;
        for (std::size_t i = 0; i < n; ++i) {
          u -= best[i];
          if (u < 0.0) {
            cand = i;
            break;
          }
        }
      }
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) potential += std::min(best[i], sq_dist(row(i), row(cand), d));
      if (potential < pick_potential) {
        pick_potential = potential;
        pick = cand;
      }
    }
    copy_row(j, pick);
    for (std::size_t i = 0; i < n; ++i) best[i] = std::min(best[i], sq_dist(row(i), row(pick), d));
  }
  return c;
}

KMeansResult kmeans(const Tensor& data, std::size_t k, Rng& rng, std::size_t max_iter) {
  const std::size_t n = data.rows(), d = data.cols();
  KMeansResult res;
  res.centroids = kmeans_pp_init(data, k, rng);
  res.assignment.assign(n, 0);
  std::vector<double> dist(n, 0.0);

  auto assign = [&] {
    double total = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest(res.centroids, std::span(data.data().data() + i * d, d));
      changed |= a != res.assignment[i];
      res.assignment[i] = a;
      dist[i] = sq_dist(data.data().data() + i * d, res.centroids.data().data() + a * d, d);
      total += dist[i];
    }
    return std::pair{total / static_cast<double>(n), changed};
  };

  assign();
  for (std::size_t it = 0; it < max_iter; ++it) {
    Tensor sums({k, d}, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = res.assignment[i];
      ++counts[a];
      for (std::size_t j = 0; j < d; ++j) sums[a * d + j] += data[i * d + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Split rule: move the empty centroid onto the worst-served point.
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy_n(data.data().data() + far * d, d, res.centroids.data().data() + c * d);
        dist[far] = 0.0;
        continue;
      }
      for (std::size_t j = 0; j < d; ++j)
        res.centroids[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
    }
    const auto [mse, changed] = assign();
    res.distortion.push_back(mse);
    if (!changed) break;
  }
  return res;
}

LloydRvqResult lloyd_train(const Tensor& data, const std::vector<std::size_t>& tier_bits, Rng& rng,
                           std::size_t max_iter) {
  if (data.rows() == 0) throw std::invalid_argument("lloyd_train: empty dataset");
  const std::size_t n = data.rows(), d = data.cols();
  LloydRvqResult res;
  res.codebook.dim = d;
  Tensor residual = data;
  for (std::size_t bits : tier_bits) {
    KMeansResult km = kmeans(residual, std::size_t{1} << bits, rng, max_iter);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = km.assignment[i];
      for (std::size_t j = 0; j < d; ++j) {
        residual[i * d + j] -= km.centroids[a * d + j];
        total += residual[i * d + j] * residual[i * d + j];
      }
    }
    res.tier_distortion.push_back(total / static_cast<double>(n));
    res.iteration_history.push_back(std::move(km.distortion));
    res.codebook.tiers.push_back({bits, std::move(km.centroids), true});
  }
  return res;
}

}  // namespace fdd::rvq
