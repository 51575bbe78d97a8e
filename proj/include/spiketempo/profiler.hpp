#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spiketempo/delay_net.hpp"

namespace spiketempo {

inline constexpr double kAccumulatePj = 0.9;
inline constexpr double kMultiplyAccumulatePj = 4.6;

struct LayerEnergy {
  std::string name;
  std::uint64_t ac_ops = 0;
  std::uint64_t mac_flops = 0;
};

struct EnergyReport {
  std::uint64_t ac_ops = 0;
  std::uint64_t mac_flops = 0;
  double energy_pj = 0.0;  // ac_ops * 0.9 + mac_flops * 4.6
  std::vector<LayerEnergy> layers;
  bool fold_bn = true;
  bool pure = false;  // dense (non-spiking) arithmetic excluded

  static EnergyReport from_counts(std::uint64_t ac_ops, std::uint64_t mac_flops);
  std::string to_json() const;
  std::string to_text() const;
};

// Accumulates per activated synapse: each unit of input spike value reaching a
// delay layer costs n_out * (D + 1) accumulates. Strong spikes count twice.
std::uint64_t count_ac_ops(const ActivationRecord& record, const Network& net);

// Dense arithmetic: 2 per batch-norm element unless folded, one per bias
// addition, one per readout integration step.
std::uint64_t count_mac_flops(const Network& net, const ActivationRecord& record, bool fold_bn = true);

struct EnergyOptions {
  bool fold_bn = true;
  bool pure = false;  // count accumulates only
};

EnergyReport energy(const ActivationRecord& record, const Network& net, const EnergyOptions& opts = {});

struct BatchShape {
  std::size_t t_len = 100;
  std::size_t batch = 1;
};

struct ThroughputOptions {
  std::size_t iterations = 1000;
  bool parallel = false;  // single thread unless set
  double density = 0.1;   // spike probability of the synthetic input
  std::uint64_t seed = 0;
};

struct ThroughputReport {
  BatchShape shape;
  std::size_t iterations = 0;
  double elapsed_seconds = 0.0;
  double samples_per_second = 0.0;
  int threads = 1;

  std::string to_json() const;
  std::string to_text() const;
};

// One untimed warm-up forward, then `iterations` timed inference forwards on
// a fixed synthetic raster.
ThroughputReport throughput(Network& net, BatchShape shape, const ThroughputOptions& opts = {});

// Aligned table with columns: Methods, #Params(M), throughput(samples/s),
// consumption(pJ), Acc(%). Missing values print as N/a.
struct ResultRow {
  std::string method;
  std::size_t params = 0;
  std::optional<double> samples_per_second;
  std::optional<double> energy_pj;
  std::optional<double> accuracy;  // fraction in [0, 1]
};
std::string format_results_table(const std::vector<ResultRow>& rows);

}  // namespace spiketempo
