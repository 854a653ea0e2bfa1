#pragma once

#include <complex>
#include <span>
#include <vector>

namespace fdd {

using cplx = std::complex<double>;

// Dense complex matrix stored column by column: data[c*rows + r] = A(r, c).
// Channel matrices hold h_k as column k; precoders hold w_k as column k.
struct CMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<cplx> data;

  CMatrix() = default;
  CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  cplx& at(std::size_t r, std::size_t c) { return data[c * rows + r]; }
  cplx at(std::size_t r, std::size_t c) const { return data[c * rows + r]; }
  std::span<cplx> column(std::size_t c) { return {data.data() + c * rows, rows}; }
  std::span<const cplx> column(std::size_t c) const { return {data.data() + c * rows, rows}; }
  double fro_sq() const {
    double s = 0.0;
    for (const cplx& x : data) s += std::norm(x);
    return s;
  }
};

}  // namespace fdd
