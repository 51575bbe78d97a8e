#include "spiketempo/kernels.hpp"

#include <algorithm>

#include "spiketempo/error.hpp"

namespace spiketempo {

GroupPlan plan_groups(std::size_t t_len, const TrConfig& cfg) {
  cfg.validate();
  if (t_len < 1) throw ShapeError("temporal reconstruction: empty time axis");
  if (cfg.len > t_len)
    throw ShapeError("temporal reconstruction: len " + std::to_string(cfg.len) +
                     " exceeds time length " + std::to_string(t_len));
  GroupPlan plan;
  plan.len = cfg.len;
  if (cfg.variant == TrVariant::no_overlap) {
    const std::size_t step = cfg.len + cfg.stride - 1;
    const std::size_t full = (t_len - cfg.len) / step + 1;
    for (std::size_t k = 0; k < full; ++k) plan.starts.push_back(k * step);
  } else {
    const std::size_t full = (t_len - cfg.len) / cfg.stride + 1;
    for (std::size_t k = 0; k < full; ++k) plan.starts.push_back(k * cfg.stride);
  }
  // Time points left uncovered after the last full group become one frame
  // copied from x[T-1]; plain pooling truncates them instead.
  plan.tail = cfg.variant != TrVariant::pool && plan.starts.back() + cfg.len < t_len;
  return plan;
}

namespace kernels {

namespace {

// Nonzero entries of every (t, b) row, stored CSR-style.
struct SparseRows {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

SparseRows compress_rows(const Tensor3& x) {
  SparseRows s;
  const std::size_t rows = x.t_len() * x.batch();
  s.offsets.reserve(rows + 1);
  s.offsets.push_back(0);
  const auto& v = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t n = 0; n < x.units(); ++n) {
      const double val = v[r * x.units() + n];
      if (val != 0.0) {
        s.index.push_back(static_cast<std::uint32_t>(n));
        s.value.push_back(val);
      }
    }
    s.offsets.push_back(s.index.size());
  }
  return s;
}

void check_layer(const Tensor3& x, const DelayLayer& layer) {
  if (x.units() != layer.n_in)
    throw ShapeError("delay_conv: input has " + std::to_string(x.units()) + " units, layer expects " +
                     std::to_string(layer.n_in));
  if (layer.weights.size() != layer.taps() * layer.n_in * layer.n_out || layer.bias.size() != layer.n_out)
    throw ShapeError("delay_conv: parameter storage does not match layer dimensions");
}

}  // namespace

Tensor3 delay_conv_forward(const Tensor3& x, const DelayLayer& layer) {
  check_layer(x, layer);
  const std::size_t t_out = x.t_len() + layer.max_delay;
  const std::size_t batch = x.batch();
  const std::size_t n_out = layer.n_out;
  const SparseRows sp = compress_rows(x);
  Tensor3 y(t_out, batch, n_out);
  const double* w = layer.weights.data();
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < t_out * batch; ++r) {
    const std::size_t t = r / batch, b = r % batch;
    double* out = y.values().data() + r * n_out;
    std::copy(layer.bias.begin(), layer.bias.end(), out);
    for (std::size_t d = 0; d <= layer.max_delay; ++d) {
      if (d > t || t - d >= x.t_len()) continue;
      const std::size_t src = (t - d) * batch + b;
      for (std::size_t k = sp.offsets[src]; k < sp.offsets[src + 1]; ++k) {
        const double v = sp.value[k];
        const double* wrow = w + (d * layer.n_in + sp.index[k]) * n_out;
        for (std::size_t o = 0; o < n_out; ++o) out[o] += v * wrow[o];
      }
    }
  }
  return y;
}

void delay_conv_backward(const Tensor3& x, const DelayLayer& layer, const Tensor3& grad_y,
                         DelayLayerGrad& grad, Tensor3* grad_x) {
  check_layer(x, layer);
  const std::size_t batch = x.batch();
  const std::size_t n_out = layer.n_out;
  const std::size_t n_in = layer.n_in;
  if (grad_y.t_len() != x.t_len() + layer.max_delay || grad_y.batch() != batch || grad_y.units() != n_out)
    throw ShapeError("delay_conv_backward: gradient shape " + grad_y.shape_string());
  if (grad.weights.empty()) grad.weights.assign(layer.weights.size(), 0.0);
  if (grad.bias.empty()) grad.bias.assign(n_out, 0.0);

  for (std::size_t r = 0; r < grad_y.t_len() * batch; ++r) {
    const double* g = grad_y.values().data() + r * n_out;
    for (std::size_t o = 0; o < n_out; ++o) grad.bias[o] += g[o];
  }

  const SparseRows sp = compress_rows(x);
  // Each tap owns a disjoint slice of the weight gradient.
#pragma omp parallel for schedule(static)
  for (std::size_t d = 0; d <= layer.max_delay; ++d) {
    double* gw_tap = grad.weights.data() + d * n_in * n_out;
    for (std::size_t t = 0; t < x.t_len(); ++t)
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t src = t * batch + b;
        const double* g = grad_y.values().data() + ((t + d) * batch + b) * n_out;
        for (std::size_t k = sp.offsets[src]; k < sp.offsets[src + 1]; ++k) {
          const double v = sp.value[k];
          double* gw = gw_tap + sp.index[k] * n_out;
          for (std::size_t o = 0; o < n_out; ++o) gw[o] += v * g[o];
        }
      }
  }

  if (grad_x == nullptr) return;
  *grad_x = Tensor3(x.t_len(), batch, n_in);
  const double* w = layer.weights.data();
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < x.t_len() * batch; ++r) {
    const std::size_t t = r / batch, b = r % batch;
    double* gx = grad_x->values().data() + r * n_in;
    for (std::size_t d = 0; d <= layer.max_delay; ++d) {
      const double* g = grad_y.values().data() + ((t + d) * batch + b) * n_out;
      for (std::size_t i = 0; i < n_in; ++i) {
        const double* wrow = w + (d * n_in + i) * n_out;
        double acc = 0.0;
        for (std::size_t o = 0; o < n_out; ++o) acc += wrow[o] * g[o];
        gx[i] += acc;
      }
    }
  }
}

Tensor3 group_max(const Tensor3& x, const GroupPlan& plan, Reduction reduction,
                  std::vector<std::int32_t>* source_time) {
  const std::size_t width = x.batch() * x.units();
  const std::size_t frames = plan.frames();
  Tensor3 y(frames, x.batch(), x.units());
  if (source_time) source_time->assign(frames * width, 0);
  const double cap = reduction == Reduction::logical_or ? 1.0 : 0.0;
#pragma omp parallel for schedule(static)
  for (std::size_t g = 0; g < frames; ++g) {
    auto out = y.frame(g);
    std::int32_t* src = source_time ? source_time->data() + g * width : nullptr;
    if (g == plan.starts.size()) {
      // trailing frame: the raw last time point
      auto last = x.frame(x.t_len() - 1);
      std::copy(last.begin(), last.end(), out.begin());
      if (src) std::fill(src, src + width, static_cast<std::int32_t>(x.t_len() - 1));
    } else {
      const std::size_t start = plan.starts[g];
      auto first = x.frame(start);
      std::copy(first.begin(), first.end(), out.begin());
      if (src) std::fill(src, src + width, static_cast<std::int32_t>(start));
      for (std::size_t t = start + 1; t < start + plan.len; ++t) {
        auto in = x.frame(t);
        for (std::size_t k = 0; k < width; ++k)
          if (in[k] > out[k]) {
            out[k] = in[k];
            if (src) src[k] = static_cast<std::int32_t>(t);
          }
      }
    }
    if (cap > 0.0)
      for (auto& v : out) v = v > 0.0 ? cap : 0.0;
  }
  return y;
}

}  // namespace kernels
}  // namespace spiketempo
