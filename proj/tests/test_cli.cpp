#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spiketempo/cli.hpp"
#include "spiketempo/spike_core.hpp"
#include "test_util.hpp"

using namespace spiketempo;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small synthetic experiment so every subcommand finishes in seconds.
fs::path write_config(const fs::path& dir) {
  const fs::path p = dir / "experiment.json";
  std::ofstream(p) << R"({
  "seed": 3,
  "data": {"synthetic": {"classes": 3, "units": 12, "bins": 20, "noise_rate": 1.0,
                         "count_per_class": 10, "units_per_class": 3}},
  "network": {"inputs": 12, "classes": 3,
              "hidden": [{"size": 12, "max_delay": 2}],
              "nar": [true], "tr": {"variant": "no_overlap", "len": 2, "stride": 1}},
  "train": {"epochs": 2, "batch_size": 8, "lr": 0.005},
  "ablation": {"tr_no": {"len": 2, "stride": 1}, "tr_o": {"len": 2, "stride": 1}}
})";
  return p;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  Result r = run({"gen-data", "--bogus"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.rfind("error kind=usage message=\"", 0) == 0);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"--format", "xml", "gen-data"}).code == kExitUsage);
  CHECK(run({"bin"}).code == kExitUsage);
}

TEST_CASE("gen-data and bin") {
  fs::path dir = testutil::scratch_dir("cli_gen");
  Result g = run({"--out", dir.string(), "--seed", "5", "gen-data", "--classes", "4", "--units", "10", "--bins",
                  "16", "--count", "3", "--units-per-class", "2"});
  REQUIRE(g.code == 0);
  auto streams = read_event_file(dir / "events.jsonl");
  CHECK(streams.size() == 12);
  CHECK(fs::exists(dir / "manifest.json"));
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["seed"] == 5);
  CHECK(manifest["artifacts"].contains("events.jsonl"));

  // same seed, same bytes
  fs::path dir2 = testutil::scratch_dir("cli_gen2");
  run({"--out", dir2.string(), "--seed", "5", "gen-data", "--classes", "4", "--units", "10", "--bins", "16",
       "--count", "3", "--units-per-class", "2"});
  CHECK(slurp(dir / "events.jsonl") == slurp(dir2 / "events.jsonl"));

  Result b = run({"--out", dir.string(), "--format", "kv", "bin", "--events", (dir / "events.jsonl").string(),
                  "--bins", "16", "--units", "10"});
  REQUIRE(b.code == 0);
  auto info = nlohmann::json::parse(b.out);
  CHECK(info["t"] == 16);
  CHECK(info["b"] == 12);
  CHECK(info["n"] == 10);
  SpikeRaster r = read_raster_cache(dir / "raster.stras");
  CHECK(r.batch() == 12);

  Result bad = run({"--out", dir.string(), "bin", "--events", (dir / "events.jsonl").string(), "--units", "4"});
  CHECK(bad.code == kExitFailure);
  CHECK(bad.err.find("kind=ingest") != std::string::npos);
  CHECK(bad.err.find("record") != std::string::npos);

  CHECK(run({"--out", dir.string(), "bin", "--events", (dir / "nope.jsonl").string()}).code == kExitFailure);
}

TEST_CASE("transform shapes") {
  fs::path dir = testutil::scratch_dir("cli_tfm");
  write_raster_cache(dir / "in.stras", testutil::random_binary(10, 2, 3, 0.3, 1));
  Result r = run({"--out", dir.string(), "--format", "kv", "transform", "--input", (dir / "in.stras").string(),
                  "--tr", "no_overlap", "--len", "3", "--stride", "1"});
  REQUIRE(r.code == 0);
  CHECK(read_raster_cache(dir / "transformed.stras").t_len() == 4);

  write_raster_cache(dir / "d.stras", testutil::random_binary(13, 2, 3, 0.3, 2));
  Result n = run({"--out", dir.string(), "transform", "--input", (dir / "in.stras").string(), "--nar",
                  (dir / "d.stras").string(), "--output", (dir / "y.stras").string()});
  REQUIRE(n.code == 0);
  SpikeRaster y = read_raster_cache(dir / "y.stras");
  CHECK(y.t_len() == 13);
  CHECK(max_value(y) <= 2.0);

  Result too_long = run({"--out", dir.string(), "transform", "--input", (dir / "in.stras").string(), "--tr",
                         "overlap", "--len", "11"});
  CHECK(too_long.code == kExitConfig);
  CHECK(too_long.err.find("kind=shape") != std::string::npos);

  write_raster_cache(dir / "other.stras", testutil::random_binary(10, 2, 4, 0.3, 2));
  CHECK(run({"--out", dir.string(), "transform", "--input", (dir / "in.stras").string(), "--nar",
             (dir / "other.stras").string()})
            .code == kExitConfig);
  CHECK(run({"--out", dir.string(), "transform", "--input", (dir / "in.stras").string(), "--tr", "avg"}).code ==
        kExitUsage);
}

TEST_CASE("train, eval and profiling") {
  fs::path dir = testutil::scratch_dir("cli_train");
  fs::path cfg = write_config(dir);
  fs::path out = dir / "run";
  Result t = run({"--config", cfg.string(), "--out", out.string(), "train"});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("test accuracy") != std::string::npos);
  CHECK(fs::exists(out / "checkpoint.stnet"));
  CHECK(fs::exists(out / "run.json"));
  auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.contains("seed"));

  const std::string ckpt = (out / "checkpoint.stnet").string();
  Result e = run({"--config", cfg.string(), "--out", (dir / "eval").string(), "--format", "kv", "eval",
                  "--checkpoint", ckpt});
  REQUIRE(e.code == 0);
  auto ej = nlohmann::json::parse(e.out);
  CHECK(ej["samples"] == 3);
  CHECK(ej["accuracy"].get<double>() >= 0.0);

  Result p = run({"--config", cfg.string(), "--out", (dir / "energy").string(), "--format", "kv",
                  "profile-energy", "--checkpoint", ckpt, "--pure"});
  REQUIRE(p.code == 0);
  auto pj = nlohmann::json::parse(p.out);
  CHECK(pj["mac_flops"] == 0);
  CHECK(pj["energy_pj"].get<double>() == doctest::Approx(pj["ac_ops"].get<double>() * 0.9));

  Result th = run({"--out", (dir / "tp").string(), "profile-throughput", "--checkpoint", ckpt, "--time", "20",
                   "--batch", "2", "--iterations", "3"});
  REQUIRE(th.code == 0);
  CHECK(th.out.find("throughput(samples/s)") != std::string::npos);
  CHECK(fs::exists(dir / "tp" / "throughput.json"));

  CHECK(run({"--out", (dir / "x").string(), "eval", "--checkpoint", (dir / "missing.stnet").string()}).code ==
        kExitFailure);
}

TEST_CASE("training twice reproduces the manifest hashes") {
  fs::path dir = testutil::scratch_dir("cli_repro");
  fs::path cfg = write_config(dir);
  REQUIRE(run({"--config", cfg.string(), "--out", (dir / "a").string(), "train", "--epochs", "1"}).code == 0);
  REQUIRE(run({"--config", cfg.string(), "--out", (dir / "b").string(), "train", "--epochs", "1"}).code == 0);
  auto a = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  auto b = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
  CHECK(a["artifacts"]["checkpoint.stnet"] == b["artifacts"]["checkpoint.stnet"]);
  CHECK(a["artifacts"]["results"] == b["artifacts"]["results"]);
  CHECK(slurp(dir / "a" / "checkpoint.stnet") == slurp(dir / "b" / "checkpoint.stnet"));
}

TEST_CASE("config errors exit 3") {
  fs::path dir = testutil::scratch_dir("cli_cfg");
  fs::path cfg = write_config(dir);
  Result bad_row = run({"--config", cfg.string(), "--out", dir.string(), "ablate", "--rows", "tr_o+pool"});
  CHECK(bad_row.code == kExitConfig);
  CHECK(bad_row.err.find("kind=config") != std::string::npos);

  std::ofstream(dir / "broken.json") << R"({"train": {"optimizer": "rmsprop"}})";
  CHECK(run({"--config", (dir / "broken.json").string(), "--out", dir.string(), "train"}).code == kExitConfig);

  std::ofstream(dir / "net.json") << R"({"inputs": 12, "classes": 3, "hidden": [{"size": 5}], "nar": [true]})";
  CHECK(run({"--config", cfg.string(), "--out", dir.string(), "train", "--net", (dir / "net.json").string()})
            .code == kExitConfig);
  CHECK(run({"--config", cfg.string(), "--out", dir.string(), "train", "--lr", "0"}).code == kExitConfig);
}

TEST_CASE("ablate with every toggle off") {
  fs::path dir = testutil::scratch_dir("cli_ablate");
  fs::path cfg = write_config(dir);
  Result r = run({"--config", cfg.string(), "--out", (dir / "grid").string(), "ablate", "--rows", "none",
                  "--epochs", "1"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("NAR") != std::string::npos);
  CHECK(r.out.find("Pool") != std::string::npos);
  CHECK(r.out.find("Acc") != std::string::npos);
  auto grid = nlohmann::json::parse(slurp(dir / "grid" / "ablation.json"));
  REQUIRE(grid.size() == 1);
  CHECK(grid[0]["row"] == "none");
  CHECK(grid[0]["nar"] == false);
  CHECK(grid[0]["verified"] == true);
  CHECK(grid[0].contains("acc"));
}

#ifdef SPIKETEMPO_CLI_PATH
TEST_CASE("installed binary") {
  fs::path dir = testutil::scratch_dir("cli_bin");
  const std::string exe = SPIKETEMPO_CLI_PATH;
  auto sh = [](const std::string& cmd) {
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  CHECK(sh("\"" + exe + "\" --out \"" + dir.string() + "\" gen-data --count 1 --classes 2 > /dev/null") == 0);
  CHECK(fs::exists(dir / "events.jsonl"));
  CHECK(sh("\"" + exe + "\" --nope 2> /dev/null") == 2);
  CHECK(sh("\"" + exe + "\" --out \"" + dir.string() + "\" transform --input \"" + (dir / "none.stras").string() +
           "\" 2> /dev/null") == 1);
}
#endif
