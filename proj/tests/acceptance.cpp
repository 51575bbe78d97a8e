// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "spiketempo/delay_net.hpp"
#include "spiketempo/experiment.hpp"
#include "spiketempo/lif.hpp"
#include "spiketempo/profiler.hpp"
#include "spiketempo/temporal_ops.hpp"
#include "spiketempo/trainer.hpp"
#include "test_util.hpp"

using namespace spiketempo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

// Group starts written out from the two rules, independent of the library.
std::size_t expected_frames(std::size_t T, std::size_t len, std::size_t stride, TrVariant v) {
  const std::size_t step = v == TrVariant::overlap ? stride : len + stride - 1;
  const std::size_t groups = (T - len) / step + 1;
  const std::size_t last_start = (groups - 1) * step;
  return groups + (last_start + len < T ? 1 : 0);
}

Tensor3 group_oracle(const Tensor3& x, std::size_t len, std::size_t stride, TrVariant v, Reduction red) {
  const std::size_t T = x.t_len();
  const std::size_t step = v == TrVariant::overlap ? stride : len + stride - 1;
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + len <= T; s += step) starts.push_back(s);
  const bool tail = starts.back() + len < T;
  Tensor3 y(starts.size() + (tail ? 1 : 0), x.batch(), x.units());
  for (std::size_t g = 0; g < starts.size(); ++g)
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t n = 0; n < x.units(); ++n) {
        double m = x(starts[g], b, n);
        for (std::size_t k = 1; k < len; ++k) m = std::max(m, x(starts[g] + k, b, n));
        y(g, b, n) = red == Reduction::logical_or ? (m > 0 ? 1.0 : 0.0) : m;
      }
  if (tail)
    for (std::size_t b = 0; b < x.batch(); ++b)
      for (std::size_t n = 0; n < x.units(); ++n) {
        const double v0 = x(T - 1, b, n);
        y(y.t_len() - 1, b, n) = red == Reduction::logical_or ? (v0 > 0 ? 1.0 : 0.0) : v0;
      }
  return y;
}

Outcome operator_oracle_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::vector<TrConfig> grid;
  for (TrVariant v : {TrVariant::overlap, TrVariant::no_overlap})
    for (std::size_t len = 1; len <= 8; ++len)
      for (std::size_t stride = 1; stride <= 4; ++stride) grid.push_back(TrConfig{v, len, stride});
  for (int trial = 0; trial < 1000; ++trial) {
    TrConfig c = grid[trial % grid.size()];
    c.reduction = rng.below(2) ? Reduction::max : Reduction::logical_or;
    const std::size_t T = c.len + rng.below(65 - c.len);
    const std::size_t B = 1 + rng.below(4), N = 1 + rng.below(16);
    Tensor3 x = testutil::random_binary(T, B, N, 0.05 + 0.5 * rng.uniform(), 1000 + trial);
    if (trial % 3 == 0)  // residual outputs carry strong spikes
      for (auto& v : x.values()) v *= rng.below(2) ? 2.0 : 1.0;
    const SpikeRaster y = tr_apply(x, c);
    const std::size_t frames = expected_frames(T, c.len, c.stride, c.variant);
    const std::string tag = "trial " + std::to_string(trial);
    o.require(y == tr_oracle(x, c), tag + ": differs from tr_oracle");
    o.require(y == group_oracle(x, c.len, c.stride, c.variant, c.reduction), tag + ": differs from group oracle");
    o.require(y.t_len() == frames && tr_output_length(T, c) == frames, tag + ": shape law");
    o.require(y.batch() == B && y.units() == N, tag + ": batch/unit axes changed");
  }
  const double secs = seconds_since(t0);
  o.require(secs < 30.0, "runtime " + std::to_string(secs) + " s");
  if (o.pass) o.detail = "1000 rasters, " + std::to_string(grid.size()) + " configs, " + std::to_string(secs) + " s";
  return o;
}

Outcome shape_anchors() {
  Outcome o;
  const TrConfig tro{TrVariant::overlap, 2, 1}, trno{TrVariant::no_overlap, 2, 1};
  for (std::size_t T = 2; T <= 64; ++T) {
    Tensor3 x = testutil::random_binary(T, 2, 5, 0.4, T);
    const SpikeRaster a = tr_apply(x, tro);
    o.require(a.t_len() == T - 1, "TR-o T=" + std::to_string(T));
    const SpikeRaster b = tr_apply(x, trno);
    if (T % 2 == 0) {
      o.require(b.t_len() == T / 2, "TR-no even T=" + std::to_string(T));
    } else {
      o.require(b.t_len() == T / 2 + 1, "TR-no odd T=" + std::to_string(T));
      for (std::size_t bb = 0; bb < 2; ++bb)
        for (std::size_t n = 0; n < 5; ++n)
          o.require(b(b.t_len() - 1, bb, n) == x(T - 1, bb, n), "TR-no tail frame T=" + std::to_string(T));
    }
  }
  if (o.pass) o.detail = "T in [2,64]";
  return o;
}

Outcome nar_suite() {
  Outcome o;
  Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t tx = 1 + rng.below(40), td = 1 + rng.below(40);
    const std::size_t B = 1 + rng.below(3), N = 1 + rng.below(8);
    Tensor3 x = testutil::random_binary(tx, B, N, 0.4, 3 * trial);
    Tensor3 d = testutil::random_binary(td, B, N, 0.4, 3 * trial + 1);
    auto [xa, da] = nar_align(x, d);
    const std::size_t T = std::max(tx, td);
    o.require(xa.t_len() == T && da.t_len() == T, "aligned length");
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t n = 0; n < N; ++n) {
          o.require(xa(t, b, n) == (t < tx ? x(t, b, n) : 0.0), "x padding");
          o.require(da(t, b, n) == (t < td ? d(t, b, n) : 0.0), "d padding");
        }
    const SpikeRaster y = nar_residual(x, d);
    o.require(y.t_len() == T, "residual length");
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t n = 0; n < N; ++n) {
          const double v = y(t, b, n);
          o.require(v == 0.0 || v == 1.0 || v == 2.0, "value outside {0,1,2}");
          const bool both = xa(t, b, n) == 1.0 && da(t, b, n) == 1.0;
          o.require((v == 2.0) == both, "strong spike placement");
        }
  }
  if (o.pass) o.detail = "500 random pairs";
  return o;
}

Outcome lif_golden() {
  Outcome o;
  {
    LifParams p;  // eta 0.5, v_th 1, hard reset to 0
    LifTrace tr = lif_forward(Tensor3(3, 1, 1, 0.6), p);
    const double u[] = {0.6, 0.9, 1.05}, s[] = {0, 0, 1};
    for (int t = 0; t < 3; ++t) {
      o.require(std::abs(tr.membrane(t, 0, 0) - u[t]) < 1e-12, "hard membrane");
      o.require(tr.spikes(t, 0, 0) == s[t], "hard spikes");
    }
    LifState st = LifState::zeros(1, 1);
    for (int t = 0; t < 3; ++t) st = lif_step(std::vector<double>{0.6}, st, p).state;
    o.require(std::abs(st.h[0]) < 1e-12, "hard reset to 0");
  }
  {
    LifParams p;
    p.eta = 1.0;
    p.reset = ResetMode::soft;
    LifState st = LifState::zeros(1, 1);
    const double u[] = {0.7, 1.4}, s[] = {0, 1};
    for (int t = 0; t < 2; ++t) {
      LifStepResult r = lif_step(std::vector<double>{0.7}, st, p);
      o.require(std::abs(r.membrane[0] - u[t]) < 1e-12, "soft membrane");
      o.require(r.spikes[0] == s[t], "soft spikes");
      st = r.state;
    }
    o.require(std::abs(st.h[0] - 0.4) < 1e-12, "soft residue H=0.4");
  }
  if (o.pass) o.detail = "hard [0.6,0.9,1.05] -> [0,0,1]; soft H=0.4";
  return o;
}

Outcome gradient_check() {
  Outcome o;
  const auto t0 = Clock::now();
  NetworkSpec s;
  s.n_inputs = 6;
  s.n_classes = 3;
  LifParams lif;
  lif.v_th = 0.5;
  s.hidden.push_back(ModuleSpec{6, 2, 0.0, lif});
  s.hidden.push_back(ModuleSpec{6, 2, 0.0, lif});
  s.nar = {true, true};
  s.tr.push_back(TrStage{TrConfig{TrVariant::no_overlap, 2, 1}, 0});
  Network net = build_network(s, 11);
  Batch batch;
  batch.x = testutil::random_binary(8, 4, 6, 0.3, 12);
  batch.labels = {0, 1, 2, 0};
  GradCheckOptions opts;
  opts.max_params = 400;
  GradCheckReport r = grad_check(net, batch, opts);
  const double secs = seconds_since(t0);
  o.require(r.reliable, "unreliable: " + r.note);
  o.require(r.checked >= 200, "only " + std::to_string(r.checked) + " parameters checked");
  o.require(r.max_rel_error < 1e-4, "max relative error " + std::to_string(r.max_rel_error));
  o.require(secs < 60.0, "runtime " + std::to_string(secs) + " s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu params, max rel err %.3g, %.2f s", r.checked, r.max_rel_error, secs);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome energy_accounting() {
  Outcome o;
  // 1 input unit -> 2 hidden units over 3 taps, silent downstream.
  NetworkSpec s;
  s.n_inputs = 1;
  s.n_classes = 2;
  s.hidden.push_back(ModuleSpec{2, 2, 0.0, LifParams{}});
  s.nar = {false};
  Network net = build_network(s, 0);
  for (auto* l : {&net.hidden[0].conv, &net.output}) {
    std::fill(l->weights.begin(), l->weights.end(), 0.0);
    std::fill(l->bias.begin(), l->bias.end(), 0.0);
  }
  Tensor3 x(4, 1, 1);
  x(1, 0, 0) = 1.0;
  const ForwardResult r = network_forward(net, x);
  const EnergyReport pure = energy(r.record, net, {true, true});
  o.require(pure.ac_ops == 6 && pure.mac_flops == 0, "tiny net counts");
  o.require(pure.energy_pj == 6 * 0.9 && std::abs(pure.energy_pj - 5.4) < 1e-12, "tiny net energy");

  const EnergyReport mixed = EnergyReport::from_counts(6, 10);
  o.require(mixed.energy_pj == 6 * 0.9 + 10 * 4.6 && std::abs(mixed.energy_pj - 51.4) < 1e-12, "mixed energy");
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.1f pJ and %.1f pJ", pure.energy_pj, mixed.energy_pj);
  if (o.pass) o.detail = buf;
  return o;
}

ExperimentConfig synthetic_experiment() {
  ExperimentConfig cfg;
  cfg.seed = 42;
  cfg.train.seed = 42;
  cfg.data.synthetic = SyntheticSource{};  // 10 classes, 64 units, 100 bins, 100 per class
  cfg.splits = {0.8, 0.1, 0.1};
  return cfg;
}

Outcome end_to_end_training() {
  Outcome o;
  ExperimentConfig cfg = synthetic_experiment();
  cfg.train.epochs = 30;
  const Dataset all = load_dataset(cfg.data, cfg.seed);
  const DatasetSplits data = split_dataset(all, cfg.splits, cfg.seed);
  o.require(data.train.size() == 800 && data.valid.size() == 100 && data.test.size() == 100, "split sizes");
  o.require(all.n_units == 64 && all.samples[0].raster.t_len() == 100 && all.n_classes == 10, "dataset shape");

  const NetworkSpec full = default_network_spec(64, 10);
  AblationToggles none;
  const NetworkSpec baseline = apply_toggles(full, none, cfg.ablation);
  o.require(!full.tr.empty() && full.tr[0].config.variant == TrVariant::no_overlap, "full net uses TR-no");
  o.require(std::find(full.nar.begin(), full.nar.end(), true) != full.nar.end(), "full net uses NAR");
  o.require(baseline.tr.empty() && std::find(baseline.nar.begin(), baseline.nar.end(), true) == baseline.nar.end(),
            "baseline has no NAR/TR");

  const fs::path dir = testutil::scratch_dir("acceptance_e2e");
  std::string detail;
  auto run = [&](const NetworkSpec& spec, const char* name, double threshold) {
    const auto t0 = Clock::now();
    const RunArtifacts art = run_training(cfg, spec, data, dir / name);
    const double secs = seconds_since(t0);
    o.require(art.run.epochs.size() <= 30, std::string(name) + ": epoch budget");
    o.require(art.run.test_accuracy >= threshold,
              std::string(name) + ": test accuracy " + std::to_string(art.run.test_accuracy));
    o.require(secs < 300.0, std::string(name) + ": runtime " + std::to_string(secs) + " s");
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s acc %.2f (best epoch %zu, %.0f s)", name, art.run.test_accuracy,
                  art.run.best_epoch, secs);
    detail += (detail.empty() ? "" : "; ") + std::string(buf);
  };
  run(full, "nar+tr_no", 0.95);
  run(baseline, "none", 0.90);
  if (o.pass) o.detail = detail;
  else o.detail += " [" + detail + "]";
  return o;
}

Outcome throughput_protocol() {
  Outcome o;
  auto spec = [](bool with_tr) {
    NetworkSpec s;
    s.n_inputs = 64;
    s.n_classes = 10;
    LifParams lif;
    lif.v_th = 0.3;
    s.hidden.push_back(ModuleSpec{64, 8, 0.0, lif});
    s.hidden.push_back(ModuleSpec{64, 8, 0.0, lif});
    s.nar = {false, true};
    if (with_tr) s.tr.push_back(TrStage{TrConfig{TrVariant::no_overlap, 2, 1}, 0});
    return s;
  };
  Network plain = build_network(spec(false), 5);
  Network tr = build_network(spec(true), 5);
  o.require(plain.parameter_count() == tr.parameter_count(), "parameter counts differ");
  const BatchShape shape{100, 1};
  ThroughputOptions opts;
  opts.iterations = 1000;
  std::vector<double> a, b;
  for (int k = 0; k < 5; ++k) {  // interleaved so drift hits both equally
    const ThroughputReport ra = throughput(plain, shape, opts);
    const ThroughputReport rb = throughput(tr, shape, opts);
    o.require(ra.iterations == 1000 && ra.samples_per_second > 0, "report");
    a.push_back(ra.samples_per_second);
    b.push_back(rb.samples_per_second);
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  o.require(b[2] > a[2], "TR-no not faster");
  char buf[128];
  std::snprintf(buf, sizeof buf, "median samples/s %.2f -> %.2f", a[2], b[2]);
  o.detail = o.pass ? buf : o.detail + " (" + buf + ")";
  return o;
}

Outcome ablation_harness() {
  Outcome o;
  ExperimentConfig cfg = synthetic_experiment();
  cfg.train.epochs = 2;
  cfg.ablation.verify = true;
  const fs::path dir = testutil::scratch_dir("acceptance_ablate");
  const auto rows = run_ablation(cfg, dir);
  const std::vector<std::string> expect{"none", "nar", "nar+pool", "nar+tr_o", "nar+tr_no", "nar+tr_o+tr_no"};
  o.require(rows.size() == expect.size(), "row count " + std::to_string(rows.size()));
  for (std::size_t k = 0; k < std::min(rows.size(), expect.size()); ++k) {
    o.require(rows[k].toggles.name() == expect[k], "row " + std::to_string(k) + " is " + rows[k].toggles.name());
    o.require(rows[k].verify_ran && rows[k].verified, expect[k] + ": rerun hashes differ");
    o.require(fs::exists(dir / expect[k] / "manifest.json"), expect[k] + ": no manifest");
    o.require(std::isfinite(rows[k].test_accuracy), expect[k] + ": accuracy");
  }
  const std::string table = format_ablation_table(rows);
  o.require(std::count(table.begin(), table.end(), '\n') == 7, "table shape");
  if (o.pass) o.detail = "6 rows trained twice with identical hashes";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"operator oracle suite", operator_oracle_suite},
      {"shape anchors", shape_anchors},
      {"residual alignment suite", nar_suite},
      {"LIF golden traces", lif_golden},
      {"gradient check", gradient_check},
      {"energy accounting", energy_accounting},
      {"end-to-end training", end_to_end_training},
      {"throughput protocol", throughput_protocol},
      {"ablation harness", ablation_harness},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
