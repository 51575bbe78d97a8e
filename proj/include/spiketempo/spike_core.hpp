#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spiketempo/tensor.hpp"

namespace spiketempo {

struct Event {
  double time = 0.0;  // seconds, in [0, duration)
  std::uint32_t unit = 0;
  bool operator==(const Event&) const = default;
};

// One labeled sample of timed spike events.
struct EventStream {
  int label = 0;
  double duration = 1.0;
  std::vector<Event> events;
  bool operator==(const EventStream&) const = default;
};

// Bins events into a (n_bins, 1, n_units) raster. Bin index is
// floor(time / duration * n_bins); binary mode clamps counts to 1.
SpikeRaster bin_events(const EventStream& stream, std::size_t n_bins, std::size_t n_units,
                       bool binary = true);

// Newline-delimited event file: {"label":int,"duration":float,"events":[[t,unit],...]}
// Events are sorted by time on load.
std::vector<EventStream> read_event_file(const std::filesystem::path& path);
std::vector<EventStream> parse_event_lines(const std::string& text);
void write_event_file(const std::filesystem::path& path, const std::vector<EventStream>& streams);
std::string format_event_lines(const std::vector<EventStream>& streams);

// Raster cache: "STRAS1", T, B, N as u32 little-endian, then T*B*N u8 values.
std::string encode_raster_cache(const SpikeRaster& raster);
SpikeRaster decode_raster_cache(const std::string& bytes);
void write_raster_cache(const std::filesystem::path& path, const SpikeRaster& raster);
SpikeRaster read_raster_cache(const std::filesystem::path& path);

enum class Split { train, valid, test, all };
const char* to_string(Split s);

struct Sample {
  SpikeRaster raster;  // batch 1
  int label = 0;
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t n_classes = 0;
  std::size_t n_units = 0;
  Split split = Split::all;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::vector<std::size_t> class_counts() const;
  // Throws ConfigError when samples disagree on unit count or labels overflow.
  void validate() const;
  bool operator==(const Dataset&) const = default;
};

Dataset dataset_from_streams(const std::vector<EventStream>& streams, std::size_t n_bins,
                             std::size_t n_units, std::size_t n_classes, bool binary = true);

// Periodic firing of one unit: spikes at phase + k * period.
struct SignaturePattern {
  std::uint32_t unit = 0;
  double phase = 0.0;
  double period = 0.1;
};

struct SynthSpec {
  std::size_t n_classes = 10;
  std::size_t n_units = 64;
  double duration = 1.0;
  std::size_t n_bins = 100;
  std::vector<std::vector<SignaturePattern>> signatures;  // one list per class
  double noise_rate = 0.0;  // events / s / unit
  std::uint64_t seed = 0;

  void validate() const;
};

// Random class signatures: each class gets `units_per_class` distinct units
// with randomly drawn firing phase and period.
SynthSpec make_synth_spec(std::size_t n_classes, std::size_t n_units, double duration,
                          std::size_t n_bins, double noise_rate, std::uint64_t seed,
                          std::size_t units_per_class = 8);

// Samples are interleaved by class: sample i has label i % n_classes.
std::vector<EventStream> gen_synthetic_events(const SynthSpec& spec, std::size_t count_per_class);
Dataset gen_synthetic(const SynthSpec& spec, std::size_t count_per_class);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct DatasetSplits {
  Dataset train;
  Dataset valid;
  Dataset test;
};

// Stratified, seeded split. Each class is shuffled, then samples are ranked
// by their relative position inside their class so every split receives a
// proportional share of each label.
DatasetSplits split_dataset(const Dataset& d, SplitFractions fractions, std::uint64_t seed);

}  // namespace spiketempo
