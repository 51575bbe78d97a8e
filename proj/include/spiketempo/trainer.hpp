#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spiketempo/delay_net.hpp"
#include "spiketempo/spike_core.hpp"

namespace spiketempo {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;  // sgd
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool soft_forward = false;  // sigmoid firing; meant for gradient verification

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainRun {
  TrainConfig config;
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 0 means the untrained network was kept
  double best_valid_accuracy = 0.0;
  double test_accuracy = 0.0;

  // Equality of everything except wall-clock timings.
  bool same_results(const TrainRun& other) const;
  std::string to_json() const;
};

// One tensor per entry of Network::parameters(), in the same order.
struct Gradients {
  std::vector<std::vector<double>> tensors;
};

struct BackwardOptions {
  bool detach_reset = true;
  bool want_input_grad = false;
};

struct BackwardResult {
  Gradients grads;
  Tensor3 grad_input;                   // filled when want_input_grad
  std::vector<Tensor3> grad_module_out; // dL/d(module k output after residual)
};

// Mean over the batch of -log softmax(logits)[label]. Writes dL/dlogits when
// grad is non-null.
double loss_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad = nullptr);

// Reverse-mode pass over a recorded forward. Throws NumericError naming the
// layer when a gradient becomes non-finite.
BackwardResult network_backward(const Network& net, const ForwardTape& tape, const Matrix& grad_logits,
                                const BackwardOptions& opts = {});

struct Batch {
  Tensor3 x;
  std::vector<int> labels;
};
Batch make_batch(const Dataset& d, std::span<const std::size_t> indices);
Batch make_batch(const Dataset& d);

struct LossAndGradients {
  double loss = 0.0;
  Matrix logits;
  BackwardResult backward;
};

// Forward with tape, cross-entropy, backward.
LossAndGradients compute_gradients(Network& net, const Batch& batch, const ForwardOptions& fwd,
                                   const BackwardOptions& bwd = {});

// argmax per row; -1 when the maximum is tied.
std::vector<int> predict(Network& net, const Tensor3& x);
// Fraction of samples whose unique argmax equals the label.
double evaluate(Network& net, const Dataset& d, std::size_t batch_size = 64);

// Trains in place and leaves the best-validation weights in `net`.
TrainRun train(Network& net, const DatasetSplits& data, const TrainConfig& config);

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t max_params = 256;  // sampled uniformly across all tensors
  std::uint64_t seed = 0;
  bool training = true;          // batch statistics in batch norm
  std::uint64_t dropout_seed = 7;
  double denominator_floor = 1e-6;
  // Five-point central stencil (error O(eps^4)) instead of the two-point one.
  bool fourth_order = false;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double mean_rel_error = 0.0;
  bool reliable = true;
  std::string note;
};

// Compares reverse-mode gradients with central differences under the sigmoid
// firing mode, without reset detaching. Relative error is
// |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(Network& net, const Batch& batch, const GradCheckOptions& opts = {});

}  // namespace spiketempo
