#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "spiketempo/error.hpp"
#include "spiketempo/spike_core.hpp"
#include "test_util.hpp"

using namespace spiketempo;

TEST_CASE("bin_events: empty stream gives zero raster") {
  EventStream s;
  SpikeRaster r = bin_events(s, 4, 3);
  CHECK(r.t_len() == 4);
  CHECK(r.batch() == 1);
  CHECK(r.units() == 3);
  CHECK(sum(r) == 0.0);
}

TEST_CASE("bin_events: single event lands in bin 0") {
  EventStream s{0, 1.0, {{0.0, 2}}};
  SpikeRaster r = bin_events(s, 4, 3);
  CHECK(r(0, 0, 2) == 1.0);
  CHECK(sum(r) == 1.0);
}

TEST_CASE("bin_events: binary clamps, count mode adds") {
  EventStream s{0, 1.0, {{0.30, 1}, {0.31, 1}}};
  CHECK(bin_events(s, 4, 2, true)(1, 0, 1) == 1.0);
  CHECK(bin_events(s, 4, 2, false)(1, 0, 1) == 2.0);
}

TEST_CASE("bin_events: bin index is floor(time/duration*n_bins)") {
  EventStream s{0, 2.0, {{0.49, 0}, {0.5, 0}, {1.99, 0}}};
  SpikeRaster r = bin_events(s, 4, 1);
  CHECK(r(0, 0, 0) == 1.0);
  CHECK(r(1, 0, 0) == 1.0);
  CHECK(r(3, 0, 0) == 1.0);
  CHECK(r(2, 0, 0) == 0.0);
}

TEST_CASE("bin_events: errors") {
  SUBCASE("unit out of range names the event") {
    EventStream s{0, 1.0, {{0.1, 0}, {0.2, 5}}};
    try {
      bin_events(s, 4, 3);
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(std::string(e.what()).find("event 1") != std::string::npos);
    }
  }
  SUBCASE("non-finite time") {
    EventStream s{0, 1.0, {{std::nan(""), 0}}};
    CHECK_THROWS_AS(bin_events(s, 4, 3), IngestError);
  }
  SUBCASE("time equal to duration") {
    EventStream s{0, 1.0, {{1.0, 0}}};
    CHECK_THROWS_AS(bin_events(s, 4, 3), IngestError);
  }
  SUBCASE("zero bins") {
    EventStream s;
    CHECK_THROWS_AS(bin_events(s, 0, 3), ConfigError);
  }
}

namespace {

EventStream random_stream(std::uint64_t seed, std::size_t n_events, std::uint32_t units) {
  Rng rng(seed);
  EventStream s{1, 0.5, {}};
  for (std::size_t k = 0; k < n_events; ++k)
    s.events.push_back({rng.uniform(0.0, 0.5), static_cast<std::uint32_t>(rng.below(units))});
  return s;
}

}  // namespace

TEST_CASE("bin_events properties") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EventStream s = random_stream(seed, 200, 7);
    EventStream shuffled = s;
    Rng rng(seed + 100);
    for (std::size_t k = shuffled.events.size(); k > 1; --k)
      std::swap(shuffled.events[k - 1], shuffled.events[rng.below(k)]);

    CHECK(bin_events(s, 16, 7, false) == bin_events(shuffled, 16, 7, false));
    CHECK(bin_events(s, 16, 7, true) == bin_events(shuffled, 16, 7, true));

    SpikeRaster b = bin_events(s, 16, 7, true);
    SpikeRaster again = b;
    for (auto& v : again.values()) v = std::min(v, 1.0);
    CHECK(again == b);

    CHECK(sum(bin_events(s, 16, 7, false)) == doctest::Approx(200.0));
  }
}

TEST_CASE("event file round trip and sorting") {
  std::string text =
      "{\"label\":3,\"duration\":1.5,\"events\":[[0.9,1],[0.1,0],[0.5,2]]}\n"
      "\n"
      "{\"label\":0,\"duration\":1.0,\"events\":[]}\n";
  auto streams = parse_event_lines(text);
  REQUIRE(streams.size() == 2);
  CHECK(streams[0].label == 3);
  CHECK(streams[0].duration == 1.5);
  REQUIRE(streams[0].events.size() == 3);
  CHECK(streams[0].events[0] == Event{0.1, 0});
  CHECK(streams[0].events[2] == Event{0.9, 1});
  CHECK(streams[1].events.empty());

  auto dir = testutil::scratch_dir("events");
  write_event_file(dir / "e.jsonl", streams);
  CHECK(read_event_file(dir / "e.jsonl") == streams);
  CHECK(parse_event_lines(format_event_lines(streams)) == streams);
}

TEST_CASE("event file errors name the line") {
  try {
    parse_event_lines("{\"label\":0,\"duration\":1.0,\"events\":[]}\n{\"label\":0,\"duration\":1.0,\"events\":[[0.1]]}\n");
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_event_lines("not json\n"), IngestError);
  CHECK_THROWS_AS(read_event_file("/nonexistent/dir/e.jsonl"), IoError);
}

TEST_CASE("raster cache layout") {
  SpikeRaster r(2, 1, 3);
  r(0, 0, 1) = 1;
  r(1, 0, 2) = 2;
  std::string bytes = encode_raster_cache(r);
  REQUIRE(bytes.size() == 6 + 12 + 6);
  CHECK(bytes.substr(0, 6) == "STRAS1");
  CHECK(bytes[6] == 2);
  CHECK(bytes[7] == 0);
  CHECK(bytes[10] == 1);
  CHECK(bytes[14] == 3);
  CHECK(bytes[18 + 1] == 1);
  CHECK(bytes[18 + 5] == 2);
  CHECK(decode_raster_cache(bytes) == r);

  auto dir = testutil::scratch_dir("cache");
  write_raster_cache(dir / "r.stras", r);
  CHECK(read_raster_cache(dir / "r.stras") == r);
}

TEST_CASE("raster cache errors") {
  SpikeRaster r(2, 1, 3);
  std::string bytes = encode_raster_cache(r);
  CHECK_THROWS_AS(decode_raster_cache(bytes.substr(0, bytes.size() - 1)), IngestError);
  CHECK_THROWS_AS(decode_raster_cache("XXXXXX" + bytes.substr(6)), IngestError);
  CHECK_THROWS_AS(decode_raster_cache(bytes + "x"), IngestError);
  SpikeRaster bad(1, 1, 1, 0.5);
  CHECK_THROWS(encode_raster_cache(bad));
}

TEST_CASE("gen_synthetic is deterministic") {
  SynthSpec spec = make_synth_spec(10, 32, 1.0, 50, 5.0, 42);
  Dataset a = gen_synthetic(spec, 3);
  Dataset b = gen_synthetic(spec, 3);
  CHECK(a == b);
  CHECK(format_event_lines(gen_synthetic_events(spec, 3)) == format_event_lines(gen_synthetic_events(spec, 3)));
  SynthSpec other = make_synth_spec(10, 32, 1.0, 50, 5.0, 43);
  CHECK_FALSE(gen_synthetic(other, 3) == a);
}

TEST_CASE("gen_synthetic without noise equals the signature pattern") {
  SynthSpec spec = make_synth_spec(4, 40, 1.0, 50, 0.0, 9, 5);
  Dataset d = gen_synthetic(spec, 2);
  for (const Sample& s : d.samples) {
    SpikeRaster expect(spec.n_bins, 1, spec.n_units);
    for (const auto& p : spec.signatures[s.label])
      for (double t = p.phase; t < spec.duration; t += p.period)
        expect(static_cast<std::size_t>(std::floor(t / spec.duration * spec.n_bins)), 0, p.unit) = 1.0;
    CHECK(s.raster == expect);
  }
}

TEST_CASE("gen_synthetic counts") {
  SynthSpec spec = make_synth_spec(10, 64, 1.0, 100, 2.0, 1);
  Dataset d = gen_synthetic(spec, 20);
  CHECK(d.size() == 200);
  for (std::size_t c : d.class_counts()) CHECK(c == 20);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("synth spec validation") {
  SynthSpec spec = make_synth_spec(2, 8, 1.0, 10, 0.0, 0, 2);
  spec.noise_rate = -1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.noise_rate = 0.0;
  spec.signatures[0][0].unit = 8;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK_THROWS_AS(gen_synthetic(make_synth_spec(2, 8, 1.0, 10, 0.0, 0, 2), 0), ConfigError);
}

namespace {

Dataset labeled(std::size_t classes, std::size_t per_class) {
  Dataset d;
  d.n_classes = classes;
  d.n_units = 1;
  for (std::size_t i = 0; i < classes * per_class; ++i) {
    Sample s{SpikeRaster(1, 1, 1, static_cast<double>(i)), static_cast<int>(i % classes)};
    d.samples.push_back(s);
  }
  return d;
}

}  // namespace

TEST_CASE("split_dataset sizes and errors") {
  Dataset d = labeled(10, 10);
  DatasetSplits s = split_dataset(d, {0.8, 0.1, 0.1}, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.valid.size() == 10);
  CHECK(s.test.size() == 10);
  CHECK(s.train.split == Split::train);
  CHECK_THROWS_AS(split_dataset(d, {1.0, 0.0, 0.0}, 3), ConfigError);
  CHECK_THROWS_AS(split_dataset(d, {0.5, 0.1, 0.1}, 3), ConfigError);
  CHECK_THROWS_AS(split_dataset(labeled(2, 2), {0.8, 0.1, 0.1}, 3), ConfigError);
}

TEST_CASE("split_dataset is stratified, disjoint and covering") {
  Dataset d = labeled(10, 10);
  DatasetSplits s = split_dataset(d, {0.8, 0.1, 0.1}, 11);
  for (std::size_t c : s.train.class_counts()) CHECK(c == 8);
  for (std::size_t c : s.valid.class_counts()) CHECK(c == 1);
  for (std::size_t c : s.test.class_counts()) CHECK(c == 1);

  std::multiset<double> ids;
  for (const Dataset* part : {&s.train, &s.valid, &s.test})
    for (const Sample& x : part->samples) ids.insert(x.raster(0, 0, 0));
  CHECK(ids.size() == 100);
  CHECK(std::set<double>(ids.begin(), ids.end()).size() == 100);

  DatasetSplits again = split_dataset(d, {0.8, 0.1, 0.1}, 11);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
}

TEST_CASE("split_dataset keeps uneven classes within one sample") {
  Dataset d = labeled(3, 17);
  d.samples.resize(47);
  DatasetSplits s = split_dataset(d, {0.6, 0.2, 0.2}, 5);
  auto full = d.class_counts();
  for (const auto* part : {&s.train, &s.valid, &s.test}) {
    auto counts = part->class_counts();
    double frac = static_cast<double>(part->size()) / static_cast<double>(d.size());
    for (std::size_t c = 0; c < full.size(); ++c)
      CHECK(std::abs(static_cast<double>(counts[c]) - frac * static_cast<double>(full[c])) <= 1.0);
  }
}
