#include "spiketempo/delay_net.hpp"

#include <cmath>

#include "spiketempo/error.hpp"
#include "spiketempo/rng.hpp"

namespace spiketempo {

BatchNormParams BatchNormParams::identity(std::size_t units) {
  BatchNormParams p;
  p.gamma.assign(units, 1.0);
  p.beta.assign(units, 0.0);
  p.running_mean.assign(units, 0.0);
  p.running_var.assign(units, 1.0);
  return p;
}

Tensor3 batchnorm_forward(const Tensor3& x, BatchNormParams& p, bool training, BatchNormTape* tape,
                          bool update_running) {
  const std::size_t units = x.units();
  if (p.gamma.size() != units || p.beta.size() != units || p.running_mean.size() != units ||
      p.running_var.size() != units)
    throw ShapeError("batchnorm: parameters sized for " + std::to_string(p.gamma.size()) +
                     " units, input has " + std::to_string(units));
  if (!(p.epsilon > 0.0)) throw ConfigError("batchnorm: epsilon must be > 0");
  const std::size_t rows = x.t_len() * x.batch();
  if (training && rows < 2)
    throw ConfigError("batchnorm: training needs at least 2 (time, batch) elements per unit");

  std::vector<double> mean(units, 0.0), inv_std(units, 0.0);
  if (training) {
    std::vector<double> var(units, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* v = x.values().data() + r * units;
      for (std::size_t n = 0; n < units; ++n) mean[n] += v[n];
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* v = x.values().data() + r * units;
      for (std::size_t n = 0; n < units; ++n) {
        const double c = v[n] - mean[n];
        var[n] += c * c;
      }
    }
    for (std::size_t n = 0; n < units; ++n) {
      var[n] /= static_cast<double>(rows);
      inv_std[n] = 1.0 / std::sqrt(var[n] + p.epsilon);
      if (update_running) {
        const double unbiased = var[n] * static_cast<double>(rows) / static_cast<double>(rows - 1);
        p.running_mean[n] = (1.0 - p.momentum) * p.running_mean[n] + p.momentum * mean[n];
        p.running_var[n] = (1.0 - p.momentum) * p.running_var[n] + p.momentum * unbiased;
      }
    }
  } else {
    for (std::size_t n = 0; n < units; ++n) {
      mean[n] = p.running_mean[n];
      inv_std[n] = 1.0 / std::sqrt(p.running_var[n] + p.epsilon);
    }
  }

  Tensor3 y(x.t_len(), x.batch(), units);
  Tensor3 normalized;
  if (tape) normalized = Tensor3(x.t_len(), x.batch(), units);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = x.values().data() + r * units;
    double* out = y.values().data() + r * units;
    for (std::size_t n = 0; n < units; ++n) {
      const double z = (v[n] - mean[n]) * inv_std[n];
      if (tape) normalized.values()[r * units + n] = z;
      out[n] = p.gamma[n] * z + p.beta[n];
    }
  }
  if (tape) *tape = {std::move(normalized), std::move(inv_std), training};
  return y;
}

Tensor3 dropout_forward(const Tensor3& x, double p, std::uint64_t seed, bool training, Tensor3* mask) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: p must be in [0, 1)");
  if (!training || p == 0.0) {
    if (mask) *mask = Tensor3();
    return x;
  }
  Rng rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor3 y = x;
  Tensor3 m(x.t_len(), x.batch(), x.units());
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double f = rng.uniform() < p ? 0.0 : keep_scale;
    m.values()[k] = f;
    y.values()[k] *= f;
  }
  if (mask) *mask = std::move(m);
  return y;
}

std::vector<ParamView> Network::parameters() {
  std::vector<ParamView> out;
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    const std::string prefix = "hidden" + std::to_string(k) + ".";
    auto& m = hidden[k];
    out.push_back({prefix + "weights", m.conv.weights});
    out.push_back({prefix + "bias", m.conv.bias});
    out.push_back({prefix + "gamma", m.bn.gamma});
    out.push_back({prefix + "beta", m.bn.beta});
  }
  out.push_back({"output.weights", output.weights});
  out.push_back({"output.bias", output.bias});
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = output.weights.size() + output.bias.size();
  for (const auto& m : hidden)
    n += m.conv.weights.size() + m.conv.bias.size() + m.bn.gamma.size() + m.bn.beta.size();
  return n;
}

namespace {

DelayLayer init_layer(std::size_t n_in, std::size_t n_out, std::size_t delay, Rng& rng) {
  DelayLayer layer(n_in, n_out, delay);
  const double bound = std::sqrt(1.0 / static_cast<double>(n_in * (delay + 1)));
  // draw in (n_out, n_in, tap) order so the stream matches the declared layout
  for (std::size_t o = 0; o < n_out; ++o)
    for (std::size_t i = 0; i < n_in; ++i)
      for (std::size_t d = 0; d <= delay; ++d) layer.w(o, i, d) = rng.uniform(-bound, bound);
  for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
  return layer;
}

double row_sum(const Tensor3& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return s;
}

std::size_t nonzero(const Tensor3& x) {
  std::size_t c = 0;
  for (double v : x.values()) c += v != 0.0;
  return c;
}

}  // namespace

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec = spec;
  for (std::size_t k = 0; k < spec.hidden.size(); ++k) {
    Rng rng(mix_seed(seed, k));
    const auto& m = spec.hidden[k];
    net.hidden.push_back({init_layer(spec.module_input_size(k), m.size, m.max_delay, rng),
                          BatchNormParams::identity(m.size)});
  }
  Rng rng(mix_seed(seed, spec.hidden.size()));
  net.output = init_layer(spec.hidden.back().size, spec.n_classes, spec.readout.max_delay, rng);
  return net;
}

ForwardResult network_forward(Network& net, const SpikeRaster& x, const ForwardOptions& opts,
                              ForwardTape* tape) {
  const NetworkSpec& spec = net.spec;
  if (x.units() != spec.n_inputs)
    throw ShapeError("network_forward: input has " + std::to_string(x.units()) +
                     " units, network expects " + std::to_string(spec.n_inputs));
  if (x.t_len() < 1 || x.batch() < 1) throw ShapeError("network_forward: empty input " + x.shape_string());

  ForwardResult result;
  ActivationRecord& rec = result.record;
  if (tape) {
    *tape = {};
    tape->options = opts;
    tape->modules.resize(spec.hidden.size());
    tape->tr.resize(spec.tr.size());
  }
  rec.stage_t_lens.push_back(x.t_len());

  Tensor3 h = x;
  for (std::size_t k = 0; k < spec.hidden.size(); ++k) {
    const ModuleSpec& ms = spec.hidden[k];
    HiddenModule& mod = net.hidden[k];
    LayerActivity act{"hidden" + std::to_string(k), mod.conv.n_in, mod.conv.n_out, mod.conv.taps(),
                      h.t_len(), h.t_len() + ms.max_delay, h.batch()};
    act.input_value_sum = row_sum(h);
    act.input_nonzero = nonzero(h);

    Tensor3 z = kernels::delay_conv_forward(h, mod.conv);
    BatchNormTape bn_tape;
    Tensor3 a = batchnorm_forward(z, mod.bn, opts.training, tape ? &bn_tape : nullptr,
                                  opts.update_running_stats);
    LifTrace trace;
    Tensor3 spikes;
    if (ms.bypass_lif) {
      spikes = std::move(a);
    } else {
      trace = lif_forward(a, ms.lif, opts.firing);
      spikes = trace.spikes;
    }
    act.output_spike_count = row_sum(spikes);
    act.bn_elements = z.size();
    act.bias_elements = z.size();
    Tensor3 mask;
    Tensor3 d = dropout_forward(spikes, ms.dropout, mix_seed(opts.dropout_seed, k), opts.training,
                                tape ? &mask : nullptr);
    Tensor3 next = spec.nar[k] ? nar_residual(h, d) : d;
    rec.layers.push_back(act);

    if (tape) {
      ModuleTape& mt = tape->modules[k];
      mt.input = std::move(h);
      mt.conv_out = std::move(z);
      mt.bn = std::move(bn_tape);
      mt.lif = std::move(trace);
      mt.mask = std::move(mask);
      mt.output = std::move(d);
    }
    h = std::move(next);
    rec.stage_t_lens.push_back(h.t_len());

    for (std::size_t s = 0; s < spec.tr.size(); ++s) {
      if (spec.tr[s].after != k) continue;
      if (tape) {
        tape->tr[s].input_t_len = h.t_len();
        h = tr_apply_tracked(h, spec.tr[s].config, tape->tr[s].source_time);
      } else {
        h = tr_apply(h, spec.tr[s].config);
      }
      rec.stage_t_lens.push_back(h.t_len());
    }
  }

  LayerActivity out_act{"output", net.output.n_in, net.output.n_out, net.output.taps(),
                        h.t_len(), h.t_len() + net.output.max_delay, h.batch()};
  out_act.input_value_sum = row_sum(h);
  out_act.input_nonzero = nonzero(h);
  Tensor3 z = kernels::delay_conv_forward(h, net.output);
  out_act.bias_elements = z.size();
  out_act.readout_elements = z.size();
  rec.layers.push_back(out_act);

  const std::size_t classes = spec.n_classes;
  const double eta = spec.readout.eta;
  result.logits = Matrix(x.batch(), classes);
  std::vector<double> v(x.batch() * classes, 0.0);
  for (std::size_t t = 0; t < z.t_len(); ++t) {
    auto frame = z.frame(t);
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = eta * v[k] + frame[k];
      result.logits.data[k] += v[k];
    }
  }
  for (auto& l : result.logits.data) {
    l /= static_cast<double>(z.t_len());
    if (!std::isfinite(l)) throw NumericError("network_forward: non-finite logits");
  }

  if (tape) {
    tape->output_input = std::move(h);
    tape->output_conv = std::move(z);
  }
  return result;
}

}  // namespace spiketempo
