#include "spiketempo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spiketempo/error.hpp"

namespace spiketempo {

Tensor3::Tensor3(std::size_t t_len, std::size_t batch, std::size_t units, double fill)
    : t_len_(t_len), batch_(batch), units_(units), data_(t_len * batch * units, fill) {}

std::string Tensor3::shape_string() const {
  return "(" + std::to_string(t_len_) + "," + std::to_string(batch_) + "," +
         std::to_string(units_) + ")";
}

bool is_binary(const Tensor3& x) {
  return std::all_of(x.values().begin(), x.values().end(),
                     [](double v) { return v == 0.0 || v == 1.0; });
}

bool is_nonnegative_finite(const Tensor3& x) {
  return std::all_of(x.values().begin(), x.values().end(),
                     [](double v) { return std::isfinite(v) && v >= 0.0; });
}

double max_value(const Tensor3& x) {
  if (x.empty()) return 0.0;
  return *std::max_element(x.values().begin(), x.values().end());
}

double sum(const Tensor3& x) { return std::accumulate(x.values().begin(), x.values().end(), 0.0); }

Tensor3 stack_batch(std::span<const Tensor3* const> samples) {
  if (samples.empty()) throw ShapeError("stack_batch: no samples");
  const auto t_len = samples.front()->t_len();
  const auto units = samples.front()->units();
  for (const auto* s : samples) {
    if (s->batch() != 1 || s->t_len() != t_len || s->units() != units)
      throw ShapeError("stack_batch: sample shape " + s->shape_string() + " does not match (" +
                       std::to_string(t_len) + ",1," + std::to_string(units) + ")");
  }
  Tensor3 out(t_len, samples.size(), units);
  for (std::size_t b = 0; b < samples.size(); ++b)
    for (std::size_t t = 0; t < t_len; ++t) {
      auto src = samples[b]->row(t, 0);
      std::copy(src.begin(), src.end(), out.row(t, b).begin());
    }
  return out;
}

Tensor3 batch_slice(const Tensor3& x, std::size_t b) {
  if (b >= x.batch()) throw ShapeError("batch_slice: index out of range");
  Tensor3 out(x.t_len(), 1, x.units());
  for (std::size_t t = 0; t < x.t_len(); ++t) {
    auto src = x.row(t, b);
    std::copy(src.begin(), src.end(), out.row(t, 0).begin());
  }
  return out;
}

}  // namespace spiketempo
