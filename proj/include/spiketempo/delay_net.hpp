#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spiketempo/kernels.hpp"
#include "spiketempo/lif.hpp"
#include "spiketempo/temporal_ops.hpp"
#include "spiketempo/tensor.hpp"

namespace spiketempo {

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double epsilon = 1e-5;
  double momentum = 0.1;

  static BatchNormParams identity(std::size_t units);
};

// Per-unit normalization cache needed by the backward pass.
struct BatchNormTape {
  Tensor3 normalized;           // (x - mean) * inv_std
  std::vector<double> inv_std;  // per unit
  bool batch_stats = false;
};

// Normalizes every unit over the joint (time, batch) axes. Training mode uses
// batch statistics and updates the running estimates (when update_running is
// set); inference uses the running estimates.
Tensor3 batchnorm_forward(const Tensor3& x, BatchNormParams& p, bool training,
                          BatchNormTape* tape = nullptr, bool update_running = true);

// Inverted dropout. Training zeroes each element with probability p and scales
// survivors by 1/(1-p); the mask is a pure function of `seed`.
Tensor3 dropout_forward(const Tensor3& x, double p, std::uint64_t seed, bool training,
                        Tensor3* mask = nullptr);

// y = W x + b with W of (n_out, n_in, D+1); full convolution, length T + D.
inline Tensor3 delay_conv_forward(const Tensor3& x, const DelayLayer& layer) {
  return kernels::delay_conv_forward(x, layer);
}

struct ModuleSpec {
  std::size_t size = 0;
  std::size_t max_delay = 0;
  double dropout = 0.0;
  LifParams lif;
  bool bypass_lif = false;                  // linear module, used for gradient checks
  std::optional<std::size_t> kernel_count;  // kc(m); realized as dense taps

  bool operator==(const ModuleSpec&) const = default;
};

struct TrStage {
  TrConfig config;
  std::size_t after = 0;  // index of the hidden module whose output (post-residual) is reduced
  bool operator==(const TrStage&) const = default;
};

struct ReadoutSpec {
  double eta = 0.8;
  std::size_t max_delay = 0;
  bool operator==(const ReadoutSpec&) const = default;
};

struct NetworkSpec {
  std::size_t n_inputs = 0;
  std::size_t n_classes = 0;
  std::vector<ModuleSpec> hidden;
  std::vector<bool> nar;  // one flag per hidden module
  std::vector<TrStage> tr;
  ReadoutSpec readout;

  // Throws ConfigError on any inconsistency.
  void validate() const;
  // Non-fatal notes produced while validating (e.g. kc(m) mapped to dense).
  std::vector<std::string> warnings() const;
  std::size_t module_input_size(std::size_t k) const {
    return k == 0 ? n_inputs : hidden[k - 1].size;
  }

  bool operator==(const NetworkSpec&) const = default;
};

// Key-value document, keys: inputs, classes, hidden[{size,max_delay,dropout,
// lif{eta,v_th,v_reset,reset,alpha,bypass},kernel_count}], nar[bool],
// tr{variant,len,stride,after,reduction} (object or list), readout{eta,max_delay}.
NetworkSpec parse_network_spec(const std::string& text);
NetworkSpec load_network_spec(const std::filesystem::path& path);
std::string dump_network_spec(const NetworkSpec& spec);

struct HiddenModule {
  DelayLayer conv;
  BatchNormParams bn;
};

struct ParamView {
  std::string name;
  std::span<double> values;
};

class Network {
 public:
  NetworkSpec spec;
  std::vector<HiddenModule> hidden;
  DelayLayer output;

  // Trainable tensors in declared order: per hidden module weights, bias,
  // gamma, beta; then output weights, bias.
  std::vector<ParamView> parameters();
  std::size_t parameter_count() const;
};

// Weights and biases drawn uniformly from +-sqrt(1 / (n_in * (D + 1))).
Network build_network(const NetworkSpec& spec, std::uint64_t seed);

struct ForwardOptions {
  bool training = false;
  FiringMode firing = FiringMode::heaviside;
  std::uint64_t dropout_seed = 0;
  bool update_running_stats = true;  // only meaningful when training
};

// Per synaptic layer activity, consumed by the profiler.
struct LayerActivity {
  std::string name;
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  std::size_t taps = 0;
  std::size_t t_in = 0;
  std::size_t t_out = 0;
  std::size_t batch = 0;
  double input_value_sum = 0.0;      // strong spikes contribute 2
  std::size_t input_nonzero = 0;
  double output_spike_count = 0.0;   // spikes emitted by the layer's neurons
  std::size_t bn_elements = 0;       // elements passed through batch norm
  std::size_t bias_elements = 0;     // bias additions at full time length
  std::size_t readout_elements = 0;  // leaky-integrator updates
};

struct ActivationRecord {
  std::vector<LayerActivity> layers;   // hidden modules, then the output layer
  std::vector<std::size_t> stage_t_lens;  // input, each hidden module, each TR stage
};

struct ModuleTape {
  Tensor3 input;
  Tensor3 conv_out;
  BatchNormTape bn;
  LifTrace lif;    // empty when the module bypasses LIF
  Tensor3 mask;    // dropout multipliers, empty when no dropout was applied
  Tensor3 output;  // after dropout
};

struct TrTape {
  std::size_t input_t_len = 0;
  std::vector<std::int32_t> source_time;
};

struct ForwardTape {
  ForwardOptions options;
  std::vector<ModuleTape> modules;
  std::vector<TrTape> tr;      // aligned with spec.tr
  Tensor3 output_input;
  Tensor3 output_conv;
};

struct ForwardResult {
  Matrix logits;  // (batch, classes)
  ActivationRecord record;
};

// logits = time-mean of the readout membrane V[t] = eta V[t-1] + z[t].
ForwardResult network_forward(Network& net, const SpikeRaster& x, const ForwardOptions& opts = {},
                              ForwardTape* tape = nullptr);

// Checkpoint: "STNET1", u32 spec length, spec document, then every tensor as
// f64 little-endian in declared order (hidden: weights (n_out,n_in,D+1),
// bias, gamma, beta, running mean, running var; output: weights, bias).
std::string encode_checkpoint(const Network& net);
Network decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);
// Size in bytes of the tensor section alone.
std::size_t checkpoint_tensor_bytes(const Network& net);

}  // namespace spiketempo
