#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spiketempo/temporal_ops.hpp"
#include "spiketempo/tensor.hpp"

namespace spiketempo {

// Synaptic stage of a delay module: a full zero-padded temporal convolution
// with one weight per (output, input, delay tap). Storage is tap-major
// ([tap][in][out]) so the innermost loop runs over contiguous outputs.
struct DelayLayer {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::size_t max_delay = 0;
  std::vector<double> weights;  // (max_delay + 1) * n_in * n_out
  std::vector<double> bias;     // n_out

  DelayLayer() = default;
  DelayLayer(std::size_t in, std::size_t out, std::size_t delay)
      : n_in(in), n_out(out), max_delay(delay), weights((delay + 1) * in * out, 0.0), bias(out, 0.0) {}

  std::size_t taps() const { return max_delay + 1; }
  double& w(std::size_t o, std::size_t i, std::size_t d) { return weights[(d * n_in + i) * n_out + o]; }
  double w(std::size_t o, std::size_t i, std::size_t d) const {
    return weights[(d * n_in + i) * n_out + o];
  }
};

struct DelayLayerGrad {
  std::vector<double> weights;
  std::vector<double> bias;
};

// Group layout shared by the TR kernels.
struct GroupPlan {
  std::vector<std::size_t> starts;  // start time of each full group
  std::size_t len = 0;
  bool tail = false;                // append a frame copied from the last time point
  std::size_t frames() const { return starts.size() + (tail ? 1 : 0); }
};
GroupPlan plan_groups(std::size_t t_len, const TrConfig& cfg);

namespace kernels {

// y[t] = bias + sum_d W[:,:,d] x[t-d], output length T + D. Zero inputs are
// skipped, so cost scales with the number of spikes.
Tensor3 delay_conv_forward(const Tensor3& x, const DelayLayer& layer);

// Accumulates parameter gradients into `grad` (sized on first use) and, when
// grad_x is non-null, writes dL/dx.
void delay_conv_backward(const Tensor3& x, const DelayLayer& layer, const Tensor3& grad_y,
                         DelayLayerGrad& grad, Tensor3* grad_x);

Tensor3 group_max(const Tensor3& x, const GroupPlan& plan, Reduction reduction,
                  std::vector<std::int32_t>* source_time);

}  // namespace kernels

// Serial implementations written as literal loops. Kept as test oracles and
// as the baseline in the benchmark target.
namespace reference {

Tensor3 delay_conv_forward(const Tensor3& x, const DelayLayer& layer);
Tensor3 temporal_reconstruction(const Tensor3& x, const TrConfig& cfg);

}  // namespace reference

}  // namespace spiketempo
