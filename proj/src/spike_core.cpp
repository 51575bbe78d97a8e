#include "spiketempo/spike_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spiketempo/error.hpp"
#include "spiketempo/rng.hpp"

namespace spiketempo {

namespace {

constexpr char kRasterMagic[] = "STRAS1";
constexpr std::size_t kRasterHeader = 6 + 3 * 4;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

SpikeRaster bin_events(const EventStream& stream, std::size_t n_bins, std::size_t n_units,
                       bool binary) {
  if (n_bins < 1) throw ConfigError("bin_events: n_bins must be >= 1");
  if (!std::isfinite(stream.duration) || stream.duration <= 0.0)
    throw IngestError("bin_events: duration must be finite and > 0");
  SpikeRaster out(n_bins, 1, n_units);
  for (std::size_t k = 0; k < stream.events.size(); ++k) {
    const Event& e = stream.events[k];
    if (!std::isfinite(e.time))
      throw IngestError("event " + std::to_string(k) + ": non-finite time");
    if (e.unit >= n_units)
      throw IngestError("event " + std::to_string(k) + ": unit " + std::to_string(e.unit) +
                        " >= n_units " + std::to_string(n_units));
    if (e.time < 0.0 || e.time >= stream.duration)
      throw IngestError("event " + std::to_string(k) + ": time " + std::to_string(e.time) +
                        " outside [0, " + std::to_string(stream.duration) + ")");
    auto bin = static_cast<std::size_t>(std::floor(e.time / stream.duration * static_cast<double>(n_bins)));
    bin = std::min(bin, n_bins - 1);
    double& cell = out(bin, 0, e.unit);
    cell = binary ? 1.0 : cell + 1.0;
  }
  return out;
}

std::vector<EventStream> parse_event_lines(const std::string& text) {
  std::vector<EventStream> streams;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IngestError(where + ": " + e.what());
    }
    EventStream s;
    try {
      s.label = j.at("label").get<int>();
      s.duration = j.at("duration").get<double>();
      for (const auto& ev : j.at("events")) {
        if (!ev.is_array() || ev.size() != 2) throw IngestError(where + ": event must be [t, unit]");
        if (!ev[0].is_number()) throw IngestError(where + ": non-finite or non-numeric time");
        if (!ev[1].is_number_integer() || ev[1].get<long long>() < 0)
          throw IngestError(where + ": unit must be a non-negative integer");
        s.events.push_back({ev[0].get<double>(), ev[1].get<std::uint32_t>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw IngestError(where + ": " + e.what());
    }
    if (s.label < 0) throw IngestError(where + ": negative label");
    if (!std::isfinite(s.duration) || s.duration <= 0.0)
      throw IngestError(where + ": duration must be > 0");
    for (std::size_t k = 0; k < s.events.size(); ++k) {
      const double t = s.events[k].time;
      if (!std::isfinite(t)) throw IngestError(where + ", event " + std::to_string(k) + ": non-finite time");
      if (t < 0.0 || t >= s.duration)
        throw IngestError(where + ", event " + std::to_string(k) + ": time outside [0, duration)");
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    streams.push_back(std::move(s));
  }
  return streams;
}

std::vector<EventStream> read_event_file(const std::filesystem::path& path) {
  return parse_event_lines(read_all(path));
}

std::string format_event_lines(const std::vector<EventStream>& streams) {
  std::string out;
  for (const auto& s : streams) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : s.events) events.push_back({e.time, e.unit});
    nlohmann::json j = {{"label", s.label}, {"duration", s.duration}, {"events", std::move(events)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_event_file(const std::filesystem::path& path, const std::vector<EventStream>& streams) {
  write_all(path, format_event_lines(streams));
}

std::string encode_raster_cache(const SpikeRaster& raster) {
  std::string out(kRasterMagic, 6);
  put_u32(out, static_cast<std::uint32_t>(raster.t_len()));
  put_u32(out, static_cast<std::uint32_t>(raster.batch()));
  put_u32(out, static_cast<std::uint32_t>(raster.units()));
  out.reserve(out.size() + raster.size());
  for (double v : raster.values()) {
    if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v))
      throw IoError("raster cache holds integers in [0,255]; got " + std::to_string(v));
    out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  return out;
}

SpikeRaster decode_raster_cache(const std::string& bytes) {
  if (bytes.size() < kRasterHeader || bytes.compare(0, 6, kRasterMagic) != 0)
    throw IngestError("raster cache: bad magic");
  const std::size_t t = get_u32(bytes, 6), b = get_u32(bytes, 10), n = get_u32(bytes, 14);
  if (bytes.size() != kRasterHeader + t * b * n)
    throw IngestError("raster cache: payload size does not match header " + std::to_string(t) +
                      "x" + std::to_string(b) + "x" + std::to_string(n));
  SpikeRaster out(t, b, n);
  auto& values = out.values();
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = static_cast<unsigned char>(bytes[kRasterHeader + i]);
  return out;
}

void write_raster_cache(const std::filesystem::path& path, const SpikeRaster& raster) {
  write_all(path, encode_raster_cache(raster));
}

SpikeRaster read_raster_cache(const std::filesystem::path& path) {
  return decode_raster_cache(read_all(path));
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    case Split::all: return "all";
  }
  return "?";
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (const auto& s : samples)
    if (s.label >= 0 && static_cast<std::size_t>(s.label) < n_classes) ++counts[s.label];
  return counts;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.raster.units() != n_units || s.raster.batch() != 1)
      throw ConfigError("dataset sample " + std::to_string(i) + " has shape " +
                        s.raster.shape_string());
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= n_classes)
      throw ConfigError("dataset sample " + std::to_string(i) + " label " +
                        std::to_string(s.label) + " >= n_classes");
  }
}

Dataset dataset_from_streams(const std::vector<EventStream>& streams, std::size_t n_bins,
                             std::size_t n_units, std::size_t n_classes, bool binary) {
  Dataset d;
  d.n_units = n_units;
  d.n_classes = n_classes;
  d.samples.reserve(streams.size());
  for (std::size_t i = 0; i < streams.size(); ++i) {
    try {
      d.samples.push_back({bin_events(streams[i], n_bins, n_units, binary), streams[i].label});
    } catch (const IngestError& e) {
      throw IngestError("record " + std::to_string(i) + ": " + e.what());
    }
  }
  d.validate();
  return d;
}

void SynthSpec::validate() const {
  if (n_classes < 1 || n_units < 1 || n_bins < 1) throw ConfigError("synth: sizes must be >= 1");
  if (!(duration > 0.0)) throw ConfigError("synth: duration must be > 0");
  if (!(noise_rate >= 0.0)) throw ConfigError("synth: noise rate must be >= 0");
  if (signatures.size() != n_classes)
    throw ConfigError("synth: need one signature list per class");
  for (const auto& cls : signatures)
    for (const auto& p : cls) {
      if (p.unit >= n_units) throw ConfigError("synth: pattern unit >= n_units");
      if (!(p.period > 0.0) || p.phase < 0.0) throw ConfigError("synth: bad pattern timing");
    }
}

SynthSpec make_synth_spec(std::size_t n_classes, std::size_t n_units, double duration,
                          std::size_t n_bins, double noise_rate, std::uint64_t seed,
                          std::size_t units_per_class) {
  SynthSpec spec;
  spec.n_classes = n_classes;
  spec.n_units = n_units;
  spec.duration = duration;
  spec.n_bins = n_bins;
  spec.noise_rate = noise_rate;
  spec.seed = seed;
  units_per_class = std::min(units_per_class, n_units);
  Rng rng(mix_seed(seed, 0x5157));
  std::vector<std::uint32_t> units(n_units);
  std::iota(units.begin(), units.end(), 0u);
  spec.signatures.resize(n_classes);
  for (auto& cls : spec.signatures) {
    // partial Fisher-Yates picks distinct units
    for (std::size_t k = 0; k < units_per_class; ++k)
      std::swap(units[k], units[k + rng.below(n_units - k)]);
    for (std::size_t k = 0; k < units_per_class; ++k) {
      const double period = duration * rng.uniform(0.08, 0.3);
      cls.push_back({units[k], rng.uniform(0.0, period), period});
    }
  }
  spec.validate();
  return spec;
}

std::vector<EventStream> gen_synthetic_events(const SynthSpec& spec, std::size_t count_per_class) {
  spec.validate();
  if (count_per_class < 1) throw ConfigError("synth: count_per_class must be >= 1");
  const std::size_t total = count_per_class * spec.n_classes;
  std::vector<EventStream> out;
  out.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    EventStream s;
    s.label = static_cast<int>(i % spec.n_classes);
    s.duration = spec.duration;
    for (const auto& p : spec.signatures[s.label])
      for (double t = p.phase; t < spec.duration; t += p.period) s.events.push_back({t, p.unit});
    if (spec.noise_rate > 0.0) {
      Rng rng(mix_seed(spec.seed, i));
      for (std::uint32_t n = 0; n < spec.n_units; ++n)
        for (double t = rng.exponential(spec.noise_rate); t < spec.duration;
             t += rng.exponential(spec.noise_rate))
          s.events.push_back({t, n});
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    out.push_back(std::move(s));
  }
  return out;
}

Dataset gen_synthetic(const SynthSpec& spec, std::size_t count_per_class) {
  return dataset_from_streams(gen_synthetic_events(spec, count_per_class), spec.n_bins, spec.n_units,
                              spec.n_classes, true);
}

DatasetSplits split_dataset(const Dataset& d, SplitFractions f, std::uint64_t seed) {
  if (f.train < 0 || f.valid < 0 || f.test < 0 || std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must be non-negative and sum to 1");
  const std::size_t n = d.size();
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::llround(f.valid * static_cast<double>(n)));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n)
    throw ConfigError("split of " + std::to_string(n) + " samples leaves an empty split");

  std::vector<std::vector<std::size_t>> by_class(std::max<std::size_t>(d.n_classes, 1));
  for (std::size_t i = 0; i < n; ++i) by_class.at(d.samples[i].label).push_back(i);
  Rng rng(mix_seed(seed, 0x5e17));
  struct Ranked {
    double rank;
    std::size_t cls;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(n);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    for (std::size_t k = idx.size(); k > 1; --k) std::swap(idx[k - 1], idx[rng.below(k)]);
    for (std::size_t k = 0; k < idx.size(); ++k)
      ranked.push_back({static_cast<double>(k) / static_cast<double>(idx.size()), c, idx[k]});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return a.rank != b.rank ? a.rank < b.rank : a.cls < b.cls;
  });

  DatasetSplits out;
  for (Dataset* part : {&out.train, &out.valid, &out.test}) {
    part->n_classes = d.n_classes;
    part->n_units = d.n_units;
  }
  out.train.split = Split::train;
  out.valid.split = Split::valid;
  out.test.split = Split::test;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    Dataset& dst = k < n_train ? out.train : (k < n_train + n_valid ? out.valid : out.test);
    dst.samples.push_back(d.samples[ranked[k].index]);
  }
  return out;
}

}  // namespace spiketempo
