#include "spiketempo/profiler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spiketempo/error.hpp"
#include "spiketempo/parallel.hpp"
#include "spiketempo/rng.hpp"

namespace spiketempo {

namespace {

void check_record(const ActivationRecord& record, const Network& net) {
  if (record.layers.size() != net.hidden.size() + 1)
    throw ConfigError("profiler: record has " + std::to_string(record.layers.size()) +
                      " layers, network has " + std::to_string(net.hidden.size() + 1));
  auto check = [](const LayerActivity& a, const DelayLayer& l) {
    if (a.n_in != l.n_in || a.n_out != l.n_out || a.taps != l.taps())
      throw ConfigError("profiler: record layer '" + a.name + "' does not match the network");
  };
  for (std::size_t k = 0; k < net.hidden.size(); ++k) check(record.layers[k], net.hidden[k].conv);
  check(record.layers.back(), net.output);
}

std::uint64_t layer_ac(const LayerActivity& a) {
  const double value = std::llround(a.input_value_sum);
  return static_cast<std::uint64_t>(value) * a.n_out * a.taps;
}

std::uint64_t layer_mac(const LayerActivity& a, bool fold_bn) {
  return (fold_bn ? 0 : 2 * a.bn_elements) + a.bias_elements + a.readout_elements;
}

}  // namespace

EnergyReport EnergyReport::from_counts(std::uint64_t ac_ops, std::uint64_t mac_flops) {
  EnergyReport r;
  r.ac_ops = ac_ops;
  r.mac_flops = mac_flops;
  r.energy_pj = static_cast<double>(ac_ops) * kAccumulatePj +
                static_cast<double>(mac_flops) * kMultiplyAccumulatePj;
  return r;
}

std::string EnergyReport::to_json() const {
  nlohmann::json layers_json = nlohmann::json::array();
  for (const auto& l : layers)
    layers_json.push_back({{"name", l.name}, {"ac_ops", l.ac_ops}, {"mac_flops", l.mac_flops}});
  return nlohmann::json{{"ac_ops", ac_ops},
                        {"mac_flops", mac_flops},
                        {"energy_pj", energy_pj},
                        {"fold_bn", fold_bn},
                        {"pure", pure},
                        {"layers", layers_json}}
      .dump(2);
}

std::string EnergyReport::to_text() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %14s %14s\n", "layer", "AC ops", "MAC FLOPs");
  out << buf;
  for (const auto& l : layers) {
    std::snprintf(buf, sizeof buf, "%-10s %14llu %14llu\n", l.name.c_str(),
                  static_cast<unsigned long long>(l.ac_ops), static_cast<unsigned long long>(l.mac_flops));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-10s %14llu %14llu\nconsumption(pJ) %.6g  [%s%s]\n", "total",
                static_cast<unsigned long long>(ac_ops), static_cast<unsigned long long>(mac_flops), energy_pj,
                pure ? "pure" : "non-pure", fold_bn ? ", bn folded" : ", bn unfolded");
  out << buf;
  return out.str();
}

std::uint64_t count_ac_ops(const ActivationRecord& record, const Network& net) {
  check_record(record, net);
  std::uint64_t total = 0;
  for (const auto& a : record.layers) total += layer_ac(a);
  return total;
}

std::uint64_t count_mac_flops(const Network& net, const ActivationRecord& record, bool fold_bn) {
  check_record(record, net);
  std::uint64_t total = 0;
  for (const auto& a : record.layers) total += layer_mac(a, fold_bn);
  return total;
}

EnergyReport energy(const ActivationRecord& record, const Network& net, const EnergyOptions& opts) {
  const std::uint64_t ac = count_ac_ops(record, net);
  const std::uint64_t mac = opts.pure ? 0 : count_mac_flops(net, record, opts.fold_bn);
  EnergyReport r = EnergyReport::from_counts(ac, mac);
  r.fold_bn = opts.fold_bn;
  r.pure = opts.pure;
  for (const auto& a : record.layers)
    r.layers.push_back({a.name, layer_ac(a), opts.pure ? 0 : layer_mac(a, opts.fold_bn)});
  return r;
}

std::string ThroughputReport::to_json() const {
  return nlohmann::json{{"t_len", shape.t_len},
                        {"batch", shape.batch},
                        {"iterations", iterations},
                        {"elapsed_seconds", elapsed_seconds},
                        {"samples_per_second", samples_per_second},
                        {"threads", threads}}
      .dump(2);
}

std::string ThroughputReport::to_text() const {
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "batch (T=%zu, B=%zu)  iterations %zu  elapsed %.4f s  threads %d\n"
                "throughput(samples/s) %.2f\n",
                shape.t_len, shape.batch, iterations, elapsed_seconds, threads, samples_per_second);
  return buf;
}

ThroughputReport throughput(Network& net, BatchShape shape, const ThroughputOptions& opts) {
  if (opts.iterations < 1) throw ConfigError("throughput: iterations must be >= 1");
  if (shape.t_len < 1 || shape.batch < 1) throw ConfigError("throughput: empty batch shape");
  Tensor3 x(shape.t_len, shape.batch, net.spec.n_inputs);
  Rng rng(mix_seed(opts.seed, 0x7b));
  for (auto& v : x.values()) v = rng.uniform() < opts.density ? 1.0 : 0.0;

  ThroughputReport r;
  r.shape = shape;
  r.iterations = opts.iterations;
  r.threads = opts.parallel ? configured_threads() : 1;
  ThreadScope scope(r.threads);
  network_forward(net, x, {});
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < opts.iterations; ++i) network_forward(net, x, {});
  r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.samples_per_second =
      static_cast<double>(opts.iterations * shape.batch) / std::max(r.elapsed_seconds, 1e-12);
  return r;
}

std::string format_results_table(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %11s %22s %16s %8s\n", "Methods", "#Params(M)",
                "throughput(samples/s)", "consumption(pJ)", "Acc(%)");
  out << buf;
  for (const auto& r : rows) {
    char tp[32] = "N/a", en[32] = "N/a", acc[32] = "N/a";
    if (r.samples_per_second) std::snprintf(tp, sizeof tp, "%.2f", *r.samples_per_second);
    if (r.energy_pj) std::snprintf(en, sizeof en, "%.1E", *r.energy_pj);
    if (r.accuracy) std::snprintf(acc, sizeof acc, "%.2f", *r.accuracy * 100.0);
    std::snprintf(buf, sizeof buf, "%-28s %11.4f %22s %16s %8s\n", r.method.c_str(),
                  static_cast<double>(r.params) / 1e6, tp, en, acc);
    out << buf;
  }
  return out.str();
}

}  // namespace spiketempo
