#include "spiketempo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "spiketempo/error.hpp"
#include "spiketempo/rng.hpp"

namespace spiketempo {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train: adam betas must be in [0, 1)");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
}

bool TrainRun::same_results(const TrainRun& o) const {
  if (epochs.size() != o.epochs.size() || best_epoch != o.best_epoch ||
      best_valid_accuracy != o.best_valid_accuracy || test_accuracy != o.test_accuracy)
    return false;
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const auto &a = epochs[e], &b = o.epochs[e];
    if (a.train_loss != b.train_loss || a.train_accuracy != b.train_accuracy ||
        a.valid_accuracy != b.valid_accuracy)
      return false;
  }
  return true;
}

std::string TrainRun::to_json() const {
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : epochs)
    ep.push_back({{"epoch", e.epoch},
                  {"train_loss", e.train_loss},
                  {"train_accuracy", e.train_accuracy},
                  {"valid_accuracy", e.valid_accuracy},
                  {"seconds", e.seconds}});
  nlohmann::json j = {
      {"config",
       {{"epochs", config.epochs},
        {"batch_size", config.batch_size},
        {"learning_rate", config.learning_rate},
        {"optimizer", config.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
        {"momentum", config.momentum},
        {"beta1", config.beta1},
        {"beta2", config.beta2},
        {"soft_forward", config.soft_forward}}},
      {"seed", config.seed},
      {"epochs", ep},
      {"best_epoch", best_epoch},
      {"best_valid_accuracy", best_valid_accuracy},
      {"test_accuracy", test_accuracy}};
  return j.dump(2);
}

double loss_cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
  if (labels.size() != logits.rows) throw ShapeError("loss: label count does not match batch");
  if (grad) *grad = Matrix(logits.rows, logits.cols);
  double total = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t b = 0; b < logits.rows; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= logits.cols)
      throw ConfigError("loss: label " + std::to_string(label) + " out of range");
    auto row = logits.row(b);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double log_z = m + std::log(z);
    total += log_z - row[label];
    if (grad)
      for (std::size_t c = 0; c < logits.cols; ++c)
        (*grad)(b, c) = (std::exp(row[c] - log_z) - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv_batch;
  }
  return total * inv_batch;
}

namespace {

void require_finite(const std::vector<double>& v, const std::string& layer) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError("non-finite gradient in " + layer);
}

// dL/dz for batch norm given dL/dy; also accumulates gamma/beta gradients.
Tensor3 batchnorm_backward(const Tensor3& grad_y, const BatchNormTape& tape, const BatchNormParams& p,
                           std::vector<double>& grad_gamma, std::vector<double>& grad_beta) {
  const std::size_t units = grad_y.units();
  const std::size_t rows = grad_y.t_len() * grad_y.batch();
  grad_gamma.assign(units, 0.0);
  grad_beta.assign(units, 0.0);
  std::vector<double> sum_g(units, 0.0), sum_gz(units, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t n = 0; n < units; ++n) {
      const double g = grad_y.values()[r * units + n];
      const double z = tape.normalized.values()[r * units + n];
      grad_gamma[n] += g * z;
      grad_beta[n] += g;
      const double gz = g * p.gamma[n];
      sum_g[n] += gz;
      sum_gz[n] += gz * z;
    }
  Tensor3 grad_x(grad_y.t_len(), grad_y.batch(), units);
  const double m = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t n = 0; n < units; ++n) {
      const double gz = grad_y.values()[r * units + n] * p.gamma[n];
      double g = gz * tape.inv_std[n];
      if (tape.batch_stats) {
        const double z = tape.normalized.values()[r * units + n];
        g = tape.inv_std[n] / m * (m * gz - sum_g[n] - z * sum_gz[n]);
      }
      grad_x.values()[r * units + n] = g;
    }
  return grad_x;
}

void add_into(Tensor3& acc, const Tensor3& g) {
  for (std::size_t k = 0; k < acc.size(); ++k) acc.values()[k] += g.values()[k];
}

}  // namespace

BackwardResult network_backward(const Network& net, const ForwardTape& tape, const Matrix& grad_logits,
                                const BackwardOptions& opts) {
  const NetworkSpec& spec = net.spec;
  const std::size_t K = spec.hidden.size();
  if (tape.modules.size() != K || tape.tr.size() != spec.tr.size())
    throw ShapeError("backward: tape does not match network");
  BackwardResult res;
  res.grads.tensors.resize(4 * K + 2);
  res.grad_module_out.resize(K);

  // readout: logits = mean_t V_t, V_t = eta V_{t-1} + z_t
  const Tensor3& z = tape.output_conv;
  const std::size_t width = z.batch() * z.units();
  if (grad_logits.data.size() != width) throw ShapeError("backward: logits gradient shape");
  Tensor3 grad_z(z.t_len(), z.batch(), z.units());
  {
    const double inv_t = 1.0 / static_cast<double>(z.t_len());
    std::vector<double> acc(width, 0.0);
    for (std::size_t t = z.t_len(); t-- > 0;) {
      auto g = grad_z.frame(t);
      for (std::size_t k = 0; k < width; ++k) {
        acc[k] = grad_logits.data[k] * inv_t + spec.readout.eta * acc[k];
        g[k] = acc[k];
      }
    }
  }
  DelayLayerGrad out_grad;
  Tensor3 grad_h;
  kernels::delay_conv_backward(tape.output_input, net.output, grad_z, out_grad, &grad_h);
  require_finite(out_grad.weights, "output");
  res.grads.tensors[4 * K] = std::move(out_grad.weights);
  res.grads.tensors[4 * K + 1] = std::move(out_grad.bias);

  for (std::size_t k = K; k-- > 0;) {
    for (std::size_t s = spec.tr.size(); s-- > 0;)
      if (spec.tr[s].after == k) grad_h = tr_backward(grad_h, tape.tr[s].source_time, tape.tr[s].input_t_len);
    res.grad_module_out[k] = grad_h;

    const ModuleTape& mt = tape.modules[k];
    const ModuleSpec& ms = spec.hidden[k];
    const std::string name = "hidden" + std::to_string(k);
    Tensor3 grad_d;
    Tensor3 grad_skip;
    if (spec.nar[k]) {
      auto [gx, gd] = nar_backward(grad_h, mt.input.t_len(), mt.output.t_len());
      grad_skip = std::move(gx);
      grad_d = std::move(gd);
    } else {
      grad_d = std::move(grad_h);
    }
    if (!mt.mask.empty())
      for (std::size_t i = 0; i < grad_d.size(); ++i) grad_d.values()[i] *= mt.mask.values()[i];
    Tensor3 grad_a = ms.bypass_lif
                         ? std::move(grad_d)
                         : lif_backward(grad_d, mt.lif, ms.lif, tape.options.firing, opts.detach_reset);
    std::vector<double> grad_gamma, grad_beta;
    Tensor3 grad_conv = batchnorm_backward(grad_a, mt.bn, net.hidden[k].bn, grad_gamma, grad_beta);

    DelayLayerGrad g;
    const bool need_x = k > 0 || opts.want_input_grad;
    Tensor3 grad_x;
    kernels::delay_conv_backward(mt.input, net.hidden[k].conv, grad_conv, g, need_x ? &grad_x : nullptr);
    require_finite(g.weights, name);
    require_finite(g.bias, name);
    require_finite(grad_gamma, name);
    res.grads.tensors[4 * k] = std::move(g.weights);
    res.grads.tensors[4 * k + 1] = std::move(g.bias);
    res.grads.tensors[4 * k + 2] = std::move(grad_gamma);
    res.grads.tensors[4 * k + 3] = std::move(grad_beta);

    if (need_x) {
      if (spec.nar[k]) add_into(grad_x, grad_skip);
      grad_h = std::move(grad_x);
    }
  }
  if (opts.want_input_grad) res.grad_input = std::move(grad_h);
  return res;
}

Batch make_batch(const Dataset& d, std::span<const std::size_t> indices) {
  std::vector<const Tensor3*> rasters;
  Batch batch;
  for (std::size_t i : indices) {
    rasters.push_back(&d.samples.at(i).raster);
    batch.labels.push_back(d.samples[i].label);
  }
  batch.x = stack_batch(rasters);
  return batch;
}

Batch make_batch(const Dataset& d) {
  std::vector<std::size_t> all(d.size());
  std::iota(all.begin(), all.end(), 0);
  return make_batch(d, all);
}

LossAndGradients compute_gradients(Network& net, const Batch& batch, const ForwardOptions& fwd,
                                   const BackwardOptions& bwd) {
  ForwardTape tape;
  LossAndGradients out;
  out.logits = network_forward(net, batch.x, fwd, &tape).logits;
  Matrix grad;
  out.loss = loss_cross_entropy(out.logits, batch.labels, &grad);
  out.backward = network_backward(net, tape, grad, bwd);
  return out;
}

std::vector<int> predict(Network& net, const Tensor3& x) {
  const Matrix logits = network_forward(net, x, {}).logits;
  std::vector<int> out(logits.rows, -1);
  for (std::size_t b = 0; b < logits.rows; ++b) {
    auto row = logits.row(b);
    const auto best = std::max_element(row.begin(), row.end());
    if (std::count(row.begin(), row.end(), *best) == 1) out[b] = static_cast<int>(best - row.begin());
  }
  return out;
}

double evaluate(Network& net, const Dataset& d, std::size_t batch_size) {
  if (d.empty()) throw ConfigError("evaluate: empty dataset");
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < d.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(d.size(), start + batch_size); ++i) idx.push_back(i);
    const Batch batch = make_batch(d, idx);
    const auto pred = predict(net, batch.x);
    for (std::size_t b = 0; b < pred.size(); ++b) correct += pred[b] == batch.labels[b];
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, Network& net) : cfg_(cfg) {
    for (auto& p : net.parameters()) {
      first_.emplace_back(p.values.size(), 0.0);
      second_.emplace_back(cfg.optimizer == OptimizerKind::adam ? p.values.size() : 0, 0.0);
    }
  }

  void step(Network& net, const Gradients& g) {
    ++t_;
    auto params = net.parameters();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto w = params[p].values;
      const auto& grad = g.tensors[p];
      auto& m = first_[p];
      if (cfg_.optimizer == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg_.momentum * m[i] + grad[i];
          w[i] -= cfg_.learning_rate * m[i];
        }
      } else {
        auto& v = second_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
          v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
          w[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_epsilon);
        }
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t t_ = 0;
};

}  // namespace

TrainRun train(Network& net, const DatasetSplits& data, const TrainConfig& config) {
  config.validate();
  for (const Dataset* d : {&data.train, &data.valid, &data.test})
    if (d->n_units != net.spec.n_inputs || d->n_classes != net.spec.n_classes)
      throw ConfigError("train: dataset dimensions do not match the network");
  if (data.train.empty() || data.valid.empty() || data.test.empty())
    throw ConfigError("train: every split must be non-empty");

  TrainRun run;
  run.config = config;
  Network best = net;
  run.best_valid_accuracy = evaluate(net, data.valid);

  Optimizer opt(config, net);
  Rng rng(mix_seed(config.seed, 0x7a1));
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  ForwardOptions fwd;
  fwd.training = true;
  fwd.firing = config.soft_forward ? FiringMode::sigmoid : FiringMode::heaviside;
  BackwardOptions bwd;
  bwd.detach_reset = !config.soft_forward;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Batch batch =
          make_batch(data.train, std::span<const std::size_t>(order.data() + start, end - start));
      fwd.dropout_seed = mix_seed(config.seed, ++step);
      auto lg = compute_gradients(net, batch, fwd, bwd);
      if (!std::isfinite(lg.loss))
        throw NumericError("train: loss diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      loss_sum += lg.loss * static_cast<double>(end - start);
      for (std::size_t b = 0; b < lg.logits.rows; ++b) {
        auto row = lg.logits.row(b);
        const auto best_it = std::max_element(row.begin(), row.end());
        if (best_it - row.begin() == batch.labels[b] && std::count(row.begin(), row.end(), *best_it) == 1)
          ++correct;
      }
      opt.step(net, lg.backward.grads);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    stats.valid_accuracy = evaluate(net, data.valid);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (stats.valid_accuracy > run.best_valid_accuracy) {
      run.best_valid_accuracy = stats.valid_accuracy;
      run.best_epoch = epoch;
      best = net;
    }
    run.epochs.push_back(stats);
  }
  net = std::move(best);
  run.test_accuracy = evaluate(net, data.test);
  return run;
}

GradCheckReport grad_check(Network& net, const Batch& batch, const GradCheckOptions& opts) {
  GradCheckReport report;
  if (opts.epsilon < 1e-6 || opts.epsilon > 1e-3) {
    report.reliable = false;
    report.note = "epsilon " + std::to_string(opts.epsilon) +
                  " outside [1e-6, 1e-3]; finite differences are not a reliable reference";
  }
  ForwardOptions fwd;
  fwd.training = opts.training;
  fwd.firing = FiringMode::sigmoid;
  fwd.dropout_seed = opts.dropout_seed;
  fwd.update_running_stats = false;
  BackwardOptions bwd;
  bwd.detach_reset = false;
  const auto analytic = compute_gradients(net, batch, fwd, bwd).backward.grads;

  auto params = net.parameters();
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].values.size(); ++i) all.emplace_back(p, i);
  Rng rng(mix_seed(opts.seed, 0x9c));
  const std::size_t count = std::min(opts.max_params, all.size());
  for (std::size_t k = 0; k < count; ++k) std::swap(all[k], all[k + rng.below(all.size() - k)]);

  auto loss_at = [&]() {
    return loss_cross_entropy(network_forward(net, batch.x, fwd).logits, batch.labels);
  };
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const auto [p, i] = all[k];
    double& w = params[p].values[i];
    const double saved = w;
    auto at = [&](double delta) {
      w = saved + delta;
      return loss_at();
    };
    const double h = opts.epsilon;
    const double d1 = at(h) - at(-h);
    const double numeric =
        opts.fourth_order ? (8.0 * d1 - (at(2 * h) - at(-2 * h))) / (12.0 * h) : d1 / (2.0 * h);
    w = saved;
    const double a = analytic.tensors[p][i];
    const double denom = std::max({std::abs(a), std::abs(numeric), opts.denominator_floor});
    const double rel = std::abs(a - numeric) / denom;
    report.max_rel_error = std::max(report.max_rel_error, rel);
    total += rel;
  }
  report.checked = count;
  report.mean_rel_error = count ? total / static_cast<double>(count) : 0.0;
  return report;
}

}  // namespace spiketempo
