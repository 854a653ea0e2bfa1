#include "fdd/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fdd::adapt {

ShrinkPlan plan_shrink(std::size_t b_deploy, std::size_t tier_bits, std::size_t tiers, double epsilon) {
  if (tier_bits == 0 || tiers == 0) throw std::invalid_argument("plan_shrink: empty codebook");
  if (b_deploy == 0) throw std::invalid_argument("plan_shrink: the deployed budget must be positive");
  if (b_deploy >= tiers * tier_bits) {
    throw std::invalid_argument("plan_shrink: " + std::to_string(b_deploy) + " bits is not below the trained " +
                                std::to_string(tiers * tier_bits) + "; use expand");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("plan_shrink: epsilon must be positive");
  ShrinkPlan p;
  p.reserved = b_deploy / tier_bits;
  p.remainder_bits = b_deploy - p.reserved * tier_bits;
  p.source_tier = p.reserved;
  p.epsilon = epsilon;
  return p;
}

Tensor dkm_attention(const Tensor& source, const Tensor& centers, double temperature) {
  if (source.cols() != centers.cols()) throw num::ShapeError("dkm_attention: dimension mismatch");
  if (!(temperature > 0.0)) throw std::invalid_argument("dkm_attention: temperature must be positive");
  const std::size_t n = source.rows(), k = centers.rows(), d = source.cols();
  Tensor logits({n, k}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double t = source.at(i, c) - centers.at(j, c);
        s += t * t;
      }
      logits.at(i, j) = -std::sqrt(s) / temperature;
    }
  }
  return num::softmax_rows(logits);
}

double mean_spacing(const Tensor& q) {
  const std::size_t n = q.rows(), d = q.cols();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += (q.at(i, c) - q.at(j, c)) * (q.at(i, c) - q.at(j, c));
      best = std::min(best, s);
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(n);
}

DkmResult dkm_compress_from(const Tensor& source, Tensor init, const DkmOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw std::invalid_argument("dkm_compress: epsilon must be positive");
  if (!(opts.temperature > 0.0)) throw std::invalid_argument("dkm_compress: temperature must be positive");
  double tau = opts.temperature;
  if (opts.relative_temperature) {
    const double spacing = mean_spacing(source);
    // Coincident codewords: any temperature gives the same weighted means.
    if (spacing > 0.0) tau *= spacing;
  }
  if (init.rows() > source.rows()) throw std::invalid_argument("dkm_compress: more targets than source codewords");
  const std::size_t n = source.rows(), k = init.rows(), d = source.cols();
  DkmResult best;
  best.tau = tau;
  best.displacement = std::numeric_limits<double>::infinity();
  Tensor cur = std::move(init);
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    Tensor a = dkm_attention(source, cur, tau);
    Tensor next = cur;
    for (std::size_t j = 0; j < k; ++j) {
      double w = 0.0;
      std::vector<double> acc(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        w += a.at(i, j);
        for (std::size_t c = 0; c < d; ++c) acc[c] += a.at(i, j) * source.at(i, c);
      }
      if (w > 0.0)
        for (std::size_t c = 0; c < d; ++c) next.at(j, c) = acc[c] / w;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) change += (next[i] - cur[i]) * (next[i] - cur[i]);
    const double base = cur.sq_norm();
    const double disp = base > 0.0 ? change / base : change;
    if (disp < best.displacement) {
      best.codewords = next;
      best.attention = std::move(a);
      best.iterations = it;
      best.displacement = disp;
    }
    cur = std::move(next);
    if (disp <= opts.epsilon) {
      best.converged = true;
      return best;
    }
  }
  return best;
}

DkmResult dkm_compress(const Tensor& source, std::size_t bits, Rng& rng, const DkmOptions& opts) {
  if (bits >= 63 || (std::size_t{1} << bits) > source.rows()) {
    throw std::invalid_argument("dkm_compress: 2^" + std::to_string(bits) + " targets exceed " +
                                std::to_string(source.rows()) + " source codewords");
  }
  if (opts.restarts == 0) throw std::invalid_argument("dkm_compress: restarts must be at least 1");
  DkmResult best;
  double best_distortion = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    DkmResult cur = dkm_compress_from(source, rvq::kmeans_pp_init(source, std::size_t{1} << bits, rng), opts);
    const double dist = compression_distortion(source, cur.codewords);
    if (dist < best_distortion) {
      best_distortion = dist;
      best = std::move(cur);
    }
  }
  return best;
}

double compression_distortion(const Tensor& source, const Tensor& compressed) {
  const std::size_t d = source.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < source.rows(); ++i) {
    const auto q = source.data().subspan(i * d, d);
    const std::size_t j = rvq::nearest(compressed, q);
    for (std::size_t c = 0; c < d; ++c) total += (q[c] - compressed.at(j, c)) * (q[c] - compressed.at(j, c));
  }
  return total / static_cast<double>(source.rows());
}

model::TransceiverModel shrink(const model::TransceiverModel& m, std::size_t b_deploy, std::uint64_t seed,
                               const DkmOptions& opts, DkmResult* report) {
  const std::size_t tier_bits = m.config.tier_bits, tiers = m.codebook.tiers.size();
  if (b_deploy == m.codebook.total_bits()) return m;
  for (const auto& t : m.codebook.tiers) {
    if (t.bits != tier_bits) throw std::invalid_argument("shrink: codebook tiers have unequal widths");
  }
  const ShrinkPlan plan = plan_shrink(b_deploy, tier_bits, tiers, opts.epsilon);
  model::TransceiverModel out = m;
  out.codebook = m.codebook.truncated(plan.reserved);
  if (plan.remainder_bits > 0) {
    Rng rng(seed);
    DkmResult r = dkm_compress(m.codebook.tiers[plan.source_tier].codewords, plan.remainder_bits, rng, opts);
    out.codebook.tiers.push_back({plan.remainder_bits, r.codewords, true});
    if (report) *report = std::move(r);
  }
  return out;
}

model::TransceiverModel expand(const model::TransceiverModel& m, std::size_t extra_tiers,
                               const chan::ChannelDataset& data, const train::TrainConfig& cfg) {
  if (extra_tiers == 0) throw std::invalid_argument("expand: extra_tiers must be at least 1");
  model::TransceiverModel out = m;
  const std::size_t first = out.codebook.tiers.size();
  for (auto& t : out.codebook.tiers) t.frozen = true;
  Rng rng(mix_seed(cfg.seed, 0x657870616e64));
  for (std::size_t i = 0; i < extra_tiers; ++i)
    out.codebook.tiers.push_back(rvq::Tier::random(out.config.tier_bits, out.config.feature_dim, rng));
  out.config.tiers = out.codebook.tiers.size();
  train::TrainConfig c = cfg;
  c.strategy = train::Strategy::progressive;
  train::Trainer(out, data, c, train::progressive_plan(first, first + extra_tiers, c.epochs)).run();
  return out;
}

}  // namespace fdd::adapt
