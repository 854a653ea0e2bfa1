#include "fdd/baselines.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fdd::base {

namespace {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

Mat to_eigen(const CMatrix& a) {
  Mat m(a.rows, a.cols);
  for (std::size_t c = 0; c < a.cols; ++c)
    for (std::size_t r = 0; r < a.rows; ++r) m(r, c) = a.at(r, c);
  return m;
}

Mat pilot_matrix(const pilot::PilotMatrix& x) {
  Mat m(x.antennas(), x.length());
  for (std::size_t a = 0; a < x.antennas(); ++a)
    for (std::size_t l = 0; l < x.length(); ++l) m(a, l) = x.at(a, l);
  return m;
}

Vec to_vec(std::span<const cplx> v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

std::vector<cplx> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

ZfResult zf_precode(const CMatrix& h, double power) {
  const std::size_t m = h.rows, k = h.cols;
  if (k == 0 || k > m) {
    throw std::invalid_argument("zf_precode: need 1 <= K <= M, got K=" + std::to_string(k) +
                                ", M=" + std::to_string(m));
  }
  if (!(power > 0.0)) throw std::invalid_argument("zf_precode: power must be positive");
  const Mat H = to_eigen(h);
  Mat gram = H.adjoint() * H;
  ZfResult res;
  Eigen::FullPivLU<Mat> lu(gram);
  if (lu.rank() < static_cast<Eigen::Index>(k)) {
    const double delta = 1e-9 * gram.trace().real() / static_cast<double>(k);
    gram += Mat::Identity(k, k) * std::max(delta, 1e-300);
    lu.compute(gram);
    res.regularized = true;
  }
  const Mat dir = H * lu.inverse();
  res.w = CMatrix(m, k);
  const double gamma = std::sqrt(power / static_cast<double>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const double n = dir.col(j).norm();
    if (n == 0.0) throw std::domain_error("zf_precode: zero precoding direction");
    for (std::size_t a = 0; a < m; ++a) res.w.at(a, j) = gamma * dir(a, j) / n;
  }
  return res;
}

Estimate lmmse_estimate(std::span<const cplx> y, const pilot::PilotMatrix& x, const CMatrix& cov,
                        double noise_power) {
  const std::size_t m = x.antennas(), l = x.length();
  if (y.size() != l || cov.rows != m || cov.cols != m) {
    throw num::ShapeError("lmmse_estimate: y has " + std::to_string(y.size()) + " entries, pilot is " +
                          std::to_string(m) + "x" + std::to_string(l) + ", covariance " +
                          std::to_string(cov.rows) + "x" + std::to_string(cov.cols));
  }
  if (noise_power < 0.0) throw std::invalid_argument("lmmse_estimate: negative noise power");
  const Mat X = pilot_matrix(x);
  const Mat C = to_eigen(cov);
  const Mat inner = X.adjoint() * C * X + Mat::Identity(l, l) * noise_power;
  const Vec yv = to_vec(y);
  Estimate est;
  Eigen::FullPivLU<Mat> lu(inner);
  Vec z;
  if (lu.isInvertible()) {
    z = lu.solve(yv);
  } else {
    z = inner.completeOrthogonalDecomposition().solve(yv);
    est.pseudo_inverse = true;
  }
  est.h = from_vec(C * X * z);
  return est;
}

std::vector<cplx> ls_estimate(std::span<const cplx> y, const pilot::PilotMatrix& x) {
  const std::size_t m = x.antennas(), l = x.length();
  if (y.size() != l) throw num::ShapeError("ls_estimate: y length does not match the pilot");
  if (l < m) throw std::invalid_argument("ls_estimate: needs L >= M");
  const Mat X = pilot_matrix(x);
  Eigen::FullPivLU<Mat> lu(X * X.adjoint());
  if (!lu.isInvertible()) throw std::domain_error("ls_estimate: pilot is rank deficient");
  return from_vec(lu.solve(X * to_vec(y)));
}

CMatrix sample_covariance(const chan::ChannelDataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("sample_covariance: no samples");
  const std::size_t m = data.antennas;
  Mat c = Mat::Zero(m, m);
  for (std::size_t i : indices) {
    const Vec h = to_vec(data.sample(i));
    c += h * h.adjoint();
  }
  c /= static_cast<double>(indices.size());
  CMatrix out(m, m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) out.at(a, b) = c(a, b);
  return out;
}

num::Tensor stack_real(const chan::ChannelDataset& data, std::span<const std::size_t> indices) {
  const std::size_t m = data.antennas;
  num::Tensor t({indices.size(), 2 * m}, 0.0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto v = stack_real(data.sample(indices[r]));
    std::copy(v.begin(), v.end(), t.data().begin() + static_cast<std::ptrdiff_t>(r * 2 * m));
  }
  return t;
}

std::vector<double> stack_real(std::span<const cplx> h) {
  std::vector<double> v(2 * h.size());
  for (std::size_t a = 0; a < h.size(); ++a) {
    v[a] = h[a].real();
    v[h.size() + a] = h[a].imag();
  }
  return v;
}

std::vector<cplx> unstack_real(std::span<const double> v) {
  if (v.size() % 2 != 0) throw num::ShapeError("unstack_real: odd length");
  const std::size_t m = v.size() / 2;
  std::vector<cplx> h(m);
  for (std::size_t a = 0; a < m; ++a) h[a] = {v[a], v[m + a]};
  return h;
}

rvq::LloydRvqResult train_lloyd_feedback(const chan::ChannelDataset& data, std::span<const std::size_t> indices,
                                         const std::vector<std::size_t>& tier_bits, Rng& rng,
                                         std::size_t max_iter) {
  return rvq::lloyd_train(stack_real(data, indices), tier_bits, rng, max_iter);
}

ZfResult lloyd_feedback_zf(const CMatrix& h, const rvq::RvqCodebook& codebook, double power) {
  if (codebook.dim != 2 * h.rows) {
    throw num::ShapeError("lloyd_feedback_zf: codebook dim " + std::to_string(codebook.dim) +
                          " for M=" + std::to_string(h.rows));
  }
  CMatrix q(h.rows, h.cols);
  for (std::size_t k = 0; k < h.cols; ++k) {
    const auto e = rvq::encode(stack_real(h.column(k)), codebook);
    const auto rec = unstack_real(rvq::decode_indices(e.indices, codebook));
    std::copy(rec.begin(), rec.end(), q.column(k).begin());
  }
  return zf_precode(q, power);
}

}  // namespace fdd::base
