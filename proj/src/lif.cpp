#include "spiketempo/lif.hpp"

#include <cmath>
#include <numbers>

#include "spiketempo/error.hpp"

namespace spiketempo {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double fire(double u, const LifParams& p, FiringMode mode) {
  return mode == FiringMode::heaviside ? heaviside(u - p.v_th) : sigmoid(p.alpha * (u - p.v_th));
}

double reset(double u, double s, const LifParams& p) {
  return p.reset == ResetMode::hard ? u * (1.0 - s) + p.v_reset * s : u - p.v_th * s;
}

}  // namespace

void LifParams::validate() const {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("lif: eta must be in (0, 1]");
  if (!(v_th > 0.0)) throw ConfigError("lif: v_th must be > 0");
  if (!(alpha > 0.0)) throw ConfigError("lif: alpha must be > 0");
  if (!std::isfinite(v_reset)) throw ConfigError("lif: v_reset must be finite");
}

double surrogate_grad(double v, double alpha) {
  const double x = std::numbers::pi * alpha * v / 2.0;
  return alpha / (2.0 * (1.0 + x * x));
}

LifStepResult lif_step(std::span<const double> current, const LifState& state, const LifParams& p) {
  if (current.size() != state.h.size())
    throw ShapeError("lif_step: current has " + std::to_string(current.size()) +
                     " values, state has " + std::to_string(state.h.size()));
  LifStepResult r{std::vector<double>(current.size()), std::vector<double>(current.size()), state};
  for (std::size_t k = 0; k < current.size(); ++k) {
    if (!std::isfinite(current[k])) throw NumericError("lif_step: non-finite input current");
    const double u = p.eta * state.h[k] + current[k];
    const double s = heaviside(u - p.v_th);
    r.membrane[k] = u;
    r.spikes[k] = s;
    r.state.h[k] = reset(u, s, p);
  }
  return r;
}

LifTrace lif_forward(const Tensor3& current, const LifParams& p, FiringMode mode) {
  if (current.t_len() < 1) throw ShapeError("lif_forward: empty time axis");
  const std::size_t width = current.batch() * current.units();
  LifTrace trace{Tensor3(current.t_len(), current.batch(), current.units()),
                 Tensor3(current.t_len(), current.batch(), current.units())};
  bool finite = true;
  // Neurons are independent; the time loop is sequential per neuron.
#pragma omp parallel for schedule(static) reduction(&& : finite)
  for (std::size_t k = 0; k < width; ++k) {
    double hk = 0.0;
    for (std::size_t t = 0; t < current.t_len(); ++t) {
      const double in = current.frame(t)[k];
      finite = finite && std::isfinite(in);
      const double u = p.eta * hk + in;
      const double s = fire(u, p, mode);
      trace.membrane.frame(t)[k] = u;
      trace.spikes.frame(t)[k] = s;
      hk = reset(u, s, p);
    }
  }
  if (!finite) throw NumericError("lif_forward: non-finite input current");
  return trace;
}

Tensor3 lif_backward(const Tensor3& grad_spikes, const LifTrace& trace, const LifParams& p,
                     FiringMode mode, bool detach_reset) {
  if (!grad_spikes.same_shape(trace.spikes))
    throw ShapeError("lif_backward: gradient shape " + grad_spikes.shape_string() +
                     " vs trace " + trace.spikes.shape_string());
  const std::size_t width = grad_spikes.batch() * grad_spikes.units();
  const std::size_t steps = grad_spikes.t_len();
  Tensor3 grad_current(steps, grad_spikes.batch(), grad_spikes.units());
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < width; ++k) {
    double grad_h = 0.0;  // dL/dH[t], carried backwards
    for (std::size_t t = steps; t-- > 0;) {
      const double u = trace.membrane.frame(t)[k];
      const double s = trace.spikes.frame(t)[k];
      double ds_du;
      if (mode == FiringMode::heaviside) {
        ds_du = surrogate_grad(u - p.v_th, p.alpha);
      } else {
        ds_du = p.alpha * s * (1.0 - s);
      }
      double dh_du;
      if (p.reset == ResetMode::hard) {
        dh_du = 1.0 - s;
        if (!detach_reset) dh_du += (p.v_reset - u) * ds_du;
      } else {
        dh_du = 1.0;
        if (!detach_reset) dh_du -= p.v_th * ds_du;
      }
      const double grad_u = grad_spikes.frame(t)[k] * ds_du + grad_h * dh_du;
      grad_current.frame(t)[k] = grad_u;
      grad_h = p.eta * grad_u;
    }
  }
  return grad_current;
}

}  // namespace spiketempo
