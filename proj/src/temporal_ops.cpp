#include "spiketempo/temporal_ops.hpp"

#include <algorithm>

#include "spiketempo/error.hpp"
#include "spiketempo/kernels.hpp"

namespace spiketempo {

void TrConfig::validate() const {
  if (len < 1) throw ConfigError("temporal reconstruction: len must be >= 1");
  if (stride < 1) throw ConfigError("temporal reconstruction: stride must be >= 1");
}

const char* to_string(TrVariant v) {
  switch (v) {
    case TrVariant::overlap: return "overlap";
    case TrVariant::no_overlap: return "no_overlap";
    case TrVariant::pool: return "pool";
  }
  return "?";
}

TrVariant parse_tr_variant(const std::string& s) {
  if (s == "overlap" || s == "o" || s == "tr-o") return TrVariant::overlap;
  if (s == "no_overlap" || s == "no" || s == "tr-no") return TrVariant::no_overlap;
  if (s == "pool") return TrVariant::pool;
  throw ConfigError("unknown TR variant '" + s + "'");
}

const char* to_string(Reduction r) { return r == Reduction::max ? "max" : "or"; }

Reduction parse_reduction(const std::string& s) {
  if (s == "max") return Reduction::max;
  if (s == "or") return Reduction::logical_or;
  throw ConfigError("unknown reduction '" + s + "'");
}

std::size_t tr_output_length(std::size_t t_len, const TrConfig& cfg) {
  cfg.validate();
  if (t_len < 1 || cfg.len > t_len)
    throw ShapeError("temporal reconstruction: len " + std::to_string(cfg.len) +
                     " exceeds time length " + std::to_string(t_len));
  const std::size_t span = t_len - cfg.len;
  switch (cfg.variant) {
    case TrVariant::overlap:
      return span / cfg.stride + 1 + (span % cfg.stride != 0 ? 1 : 0);
    case TrVariant::pool:
      return span / cfg.stride + 1;
    case TrVariant::no_overlap: {
      const std::size_t step = cfg.len + cfg.stride - 1;
      const std::size_t full = span / step + 1;
      return full + ((full - 1) * step + cfg.len < t_len ? 1 : 0);
    }
  }
  return 0;
}

SpikeRaster tr_apply(const SpikeRaster& x, const TrConfig& cfg) {
  return kernels::group_max(x, plan_groups(x.t_len(), cfg), cfg.reduction, nullptr);
}

SpikeRaster tr_overlap(const SpikeRaster& x, std::size_t len, std::size_t stride) {
  return tr_apply(x, {TrVariant::overlap, len, stride, Reduction::max});
}

SpikeRaster tr_no_overlap(const SpikeRaster& x, std::size_t len, std::size_t stride) {
  return tr_apply(x, {TrVariant::no_overlap, len, stride, Reduction::max});
}

SpikeRaster max_pool_truncating(const SpikeRaster& x, std::size_t len, std::size_t stride) {
  return tr_apply(x, {TrVariant::pool, len, stride, Reduction::max});
}

SpikeRaster tr_apply_tracked(const Tensor3& x, const TrConfig& cfg,
                             std::vector<std::int32_t>& source_time) {
  return kernels::group_max(x, plan_groups(x.t_len(), cfg), cfg.reduction, &source_time);
}

Tensor3 tr_backward(const Tensor3& grad_out, const std::vector<std::int32_t>& source_time,
                    std::size_t input_t_len) {
  if (source_time.size() != grad_out.size())
    throw ShapeError("tr_backward: source map does not match gradient");
  const std::size_t width = grad_out.batch() * grad_out.units();
  Tensor3 grad_in(input_t_len, grad_out.batch(), grad_out.units());
  // Overlapping groups may route to the same input element, so frames are
  // accumulated serially.
  for (std::size_t g = 0; g < grad_out.t_len(); ++g) {
    auto gy = grad_out.frame(g);
    for (std::size_t k = 0; k < width; ++k)
      grad_in.frame(static_cast<std::size_t>(source_time[g * width + k]))[k] += gy[k];
  }
  return grad_in;
}

SpikeRaster tr_oracle(const SpikeRaster& x, const TrConfig& cfg) {
  return reference::temporal_reconstruction(x, cfg);
}

std::pair<SpikeRaster, SpikeRaster> nar_align(const SpikeRaster& a, const SpikeRaster& b) {
  if (a.batch() != b.batch() || a.units() != b.units())
    throw ShapeError("nar_align: " + a.shape_string() + " and " + b.shape_string() +
                     " differ in batch or unit dimensions");
  const std::size_t target = std::max(a.t_len(), b.t_len());
  auto pad = [target](const SpikeRaster& x) {
    if (x.t_len() == target) return x;
    SpikeRaster out(target, x.batch(), x.units());
    std::copy(x.values().begin(), x.values().end(), out.values().begin());
    return out;
  };
  return {pad(a), pad(b)};
}

SpikeRaster nar_residual(const SpikeRaster& x, const SpikeRaster& d) {
  auto [xa, da] = nar_align(x, d);
  auto& out = da.values();
  const auto& add = xa.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += add[k];
  return da;
}

std::pair<Tensor3, Tensor3> nar_backward(const Tensor3& grad_y, std::size_t x_t_len,
                                         std::size_t d_t_len) {
  if (std::max(x_t_len, d_t_len) != grad_y.t_len())
    throw ShapeError("nar_backward: gradient length does not match aligned length");
  auto crop = [&grad_y](std::size_t t_len) {
    Tensor3 out(t_len, grad_y.batch(), grad_y.units());
    std::copy_n(grad_y.values().begin(), out.size(), out.values().begin());
    return out;
  };
  return {crop(x_t_len), crop(d_t_len)};
}

}  // namespace spiketempo
