#pragma once

#include <span>
#include <vector>

#include "spiketempo/tensor.hpp"

namespace spiketempo {

enum class ResetMode { hard, soft };

struct LifParams {
  double eta = 0.5;      // membrane decay, in (0, 1]
  double v_th = 1.0;     // firing threshold
  double v_reset = 0.0;  // hard reset target
  ResetMode reset = ResetMode::hard;
  double alpha = 2.0;    // surrogate sharpness

  void validate() const;
  bool operator==(const LifParams&) const = default;
};

// How spikes are produced from the membrane potential. `sigmoid` replaces the
// step by 1/(1+exp(-alpha*(U-V_th))) so the whole forward is differentiable;
// it exists for gradient verification only.
enum class FiringMode { heaviside, sigmoid };

// Post-reset potential H[t-1] for every (batch, unit) neuron.
struct LifState {
  std::size_t batch = 0;
  std::size_t units = 0;
  std::vector<double> h;

  static LifState zeros(std::size_t batch, std::size_t units) {
    return {batch, units, std::vector<double>(batch * units, 0.0)};
  }
};

// 1 iff v >= 0.
inline double heaviside(double v) { return v >= 0.0 ? 1.0 : 0.0; }

// Arctangent surrogate: alpha / (2 * (1 + (pi * alpha * v / 2)^2)).
double surrogate_grad(double v, double alpha);

struct LifStepResult {
  std::vector<double> spikes;
  std::vector<double> membrane;
  LifState state;
};

// U = eta * H + I; S = heaviside(U - V_th); H' per the reset mode.
LifStepResult lif_step(std::span<const double> current, const LifState& state, const LifParams& p);

struct LifTrace {
  Tensor3 spikes;
  Tensor3 membrane;
};

// Unrolls lif_step over time from H = 0.
LifTrace lif_forward(const Tensor3& current, const LifParams& p,
                     FiringMode mode = FiringMode::heaviside);

// Reverse pass of lif_forward. Returns dL/dI given dL/dS.
//
// With detach_reset the spike S inside the reset expression is treated as a
// constant, so dH/dU is (1 - S) for hard reset and 1 for soft reset. Without
// it the reset term is differentiated through S as well, which is exact for
// the sigmoid firing mode.
Tensor3 lif_backward(const Tensor3& grad_spikes, const LifTrace& trace, const LifParams& p,
                     FiringMode mode, bool detach_reset);

}  // namespace spiketempo
