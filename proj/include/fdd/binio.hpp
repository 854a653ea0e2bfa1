#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fdd/tensor.hpp"

namespace fdd::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

class TruncatedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buf_.append(b, sizeof(T));
  }
  void bytes(std::string_view s) { buf_.append(s); }
  void str(std::string_view s) {
    put<std::uint64_t>(s.size());
    buf_.append(s);
  }
  void tensor(const num::Tensor& t) {
    put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(d);
    for (double x : t.data()) put<double>(x);
  }
  const std::string& buffer() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(bytes(get<std::uint64_t>())); }
  num::Tensor tensor() {
    const auto rank = get<std::uint32_t>();
    if (rank > 8) throw TruncatedError("corrupt tensor rank " + std::to_string(rank));
    num::Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>();
    const std::size_t n = num::shape_size(shape);
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return num::Tensor(std::move(shape), std::move(v));
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw TruncatedError("unexpected end of data: need " + std::to_string(n) + " bytes, have " +
                           std::to_string(data_.size() - pos_));
    }
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
// Writes to `path + ".tmp"` and renames into place.
void write_file_atomic(const std::string& path, std::string_view contents);
std::uint64_t fnv1a64(std::string_view s);

}  // namespace fdd::io
