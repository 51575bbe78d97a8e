#include <algorithm>

#include "spiketempo/error.hpp"
#include "spiketempo/kernels.hpp"

namespace spiketempo::reference {

Tensor3 delay_conv_forward(const Tensor3& x, const DelayLayer& layer) {
  if (x.units() != layer.n_in) throw ShapeError("reference delay_conv: unit mismatch");
  const std::size_t t_out = x.t_len() + layer.max_delay;
  Tensor3 y(t_out, x.batch(), layer.n_out);
  for (std::size_t t = 0; t < t_out; ++t)
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t o = 0; o < layer.n_out; ++o) {
        double acc = layer.bias[o];
        for (std::size_t d = 0; d <= layer.max_delay; ++d) {
          if (t < d || t - d >= x.t_len()) continue;
          for (std::size_t i = 0; i < layer.n_in; ++i) {
            const double v = x(t - d, b, i);
            if (v != 0.0) acc += v * layer.w(o, i, d);
          }
        }
        y(t, b, o) = acc;
      }
  return y;
}

// Walks the time axis group by group, collecting explicit index lists, then
// reduces each list. No closed-form frame counts are used.
Tensor3 temporal_reconstruction(const Tensor3& x, const TrConfig& cfg) {
  cfg.validate();
  const std::size_t T = x.t_len();
  if (T < 1 || cfg.len > T) throw ShapeError("reference TR: len exceeds time length");

  std::vector<std::vector<std::size_t>> groups;
  const std::size_t advance =
      cfg.variant == TrVariant::no_overlap ? cfg.len + cfg.stride - 1 : cfg.stride;
  std::size_t start = 0;
  std::size_t covered_end = 0;
  while (start + cfg.len <= T) {
    std::vector<std::size_t> members;
    for (std::size_t t = start; t < start + cfg.len; ++t) members.push_back(t);
    groups.push_back(members);
    covered_end = start + cfg.len;
    start += advance;
  }
  if (cfg.variant != TrVariant::pool && covered_end < T) groups.push_back({T - 1});

  Tensor3 y(groups.size(), x.batch(), x.units());
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t n = 0; n < x.units(); ++n) {
        double best = x(groups[g][0], b, n);
        for (std::size_t t : groups[g]) best = std::max(best, x(t, b, n));
        if (cfg.reduction == Reduction::logical_or) best = best > 0.0 ? 1.0 : 0.0;
        y(g, b, n) = best;
      }
  return y;
}

}  // namespace spiketempo::reference
