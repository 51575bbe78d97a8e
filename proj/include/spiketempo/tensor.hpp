#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace spiketempo {

// Dense (time, batch, unit) tensor, row-major with time slowest.
// Spike rasters, membrane traces and layer activations all use this type.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t t_len, std::size_t batch, std::size_t units, double fill = 0.0);

  std::size_t t_len() const { return t_len_; }
  std::size_t batch() const { return batch_; }
  std::size_t units() const { return units_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t t, std::size_t b, std::size_t n) {
    return data_[(t * batch_ + b) * units_ + n];
  }
  double operator()(std::size_t t, std::size_t b, std::size_t n) const {
    return data_[(t * batch_ + b) * units_ + n];
  }

  // All batch rows of one time step, contiguous (batch * units values).
  std::span<double> frame(std::size_t t) {
    return {data_.data() + t * batch_ * units_, batch_ * units_};
  }
  std::span<const double> frame(std::size_t t) const {
    return {data_.data() + t * batch_ * units_, batch_ * units_};
  }
  // One (t, b) row of units values.
  std::span<double> row(std::size_t t, std::size_t b) {
    return {data_.data() + (t * batch_ + b) * units_, units_};
  }
  std::span<const double> row(std::size_t t, std::size_t b) const {
    return {data_.data() + (t * batch_ + b) * units_, units_};
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Tensor3& other) const {
    return t_len_ == other.t_len_ && batch_ == other.batch_ && units_ == other.units_;
  }
  std::string shape_string() const;

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t t_len_ = 0;
  std::size_t batch_ = 0;
  std::size_t units_ = 0;
  std::vector<double> data_;
};

// Spike rasters are Tensor3 values holding {0,1}, or small non-negative
// integers once residual addition has produced strong spikes.
using SpikeRaster = Tensor3;

bool is_binary(const Tensor3& x);
bool is_nonnegative_finite(const Tensor3& x);
double max_value(const Tensor3& x);
double sum(const Tensor3& x);

// Concatenates single-sample rasters (batch 1) along the batch axis.
Tensor3 stack_batch(std::span<const Tensor3* const> samples);
// Extracts batch row b as a batch-1 tensor.
Tensor3 batch_slice(const Tensor3& x, std::size_t b);

// Row-major (rows, cols) matrix, used for logits.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

}  // namespace spiketempo
