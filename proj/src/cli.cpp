#include "spiketempo/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spiketempo/delay_net.hpp"
#include "spiketempo/error.hpp"
#include "spiketempo/experiment.hpp"
#include "spiketempo/hash.hpp"
#include "spiketempo/parallel.hpp"
#include "spiketempo/profiler.hpp"
#include "spiketempo/spike_core.hpp"
#include "spiketempo/temporal_ops.hpp"
#include "spiketempo/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spiketempo {

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = ".";
  std::string format = "text";
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Records the invocation and digests of every produced file.
void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    std::uint64_t seed, const std::vector<fs::path>& artifacts) {
  json files = json::object();
  for (const auto& p : artifacts) files[p.filename().string()] = sha256_file(p);
  json m = {{"command", command}, {"args", args}, {"seed", seed}, {"artifacts", files}};
  write_text(dir / "manifest.json", m.dump(2));
}

std::string escape(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

ExperimentConfig experiment_from(const CommonFlags& common) {
  ExperimentConfig cfg = common.config.empty() ? ExperimentConfig{} : load_experiment_config(common.config);
  if (common.seed_set) {
    cfg.seed = common.seed;
    cfg.train.seed = common.seed;
  }
  return cfg;
}

// Evaluation data: an event file when given, otherwise the test split of the
// experiment's dataset.
Dataset resolve_eval_data(const CommonFlags& common, const std::string& events, std::size_t bins,
                          const NetworkSpec& spec) {
  if (!events.empty())
    return dataset_from_streams(read_event_file(events), bins, spec.n_inputs, spec.n_classes, true);
  const ExperimentConfig cfg = experiment_from(common);
  return split_dataset(load_dataset(cfg.data, cfg.seed), cfg.splits, cfg.seed).test;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Delay-network spiking models with temporal reconstruction", "spiketempo"};
  app.require_subcommand(1);
  app.fallthrough(true);
  CommonFlags common;
  app.add_option("--config", common.config, "Experiment config document");
  app.add_option("--seed", common.seed, "Seed")->each([&](const std::string&) { common.seed_set = true; });
  app.add_option("--out", common.out, "Output directory");
  app.add_option("--format", common.format, "Report format")->check(CLI::IsMember({"text", "kv"}));

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic event file");
  SyntheticSource syn;
  gen->add_option("--classes", syn.classes);
  gen->add_option("--units", syn.units);
  gen->add_option("--duration", syn.duration);
  gen->add_option("--bins", syn.bins);
  gen->add_option("--noise", syn.noise_rate, "Background events per second per unit");
  gen->add_option("--count", syn.count_per_class, "Samples per class");
  gen->add_option("--units-per-class", syn.units_per_class);

  // bin
  auto* bin = app.add_subcommand("bin", "Bin an event file into a raster cache (batch = samples)");
  std::string bin_events_path;
  std::size_t bin_bins = 100, bin_units = 64;
  bool bin_counts = false;
  bin->add_option("--events", bin_events_path)->required();
  bin->add_option("--bins", bin_bins);
  bin->add_option("--units", bin_units);
  bin->add_flag("--counts", bin_counts, "Keep spike counts instead of binarizing");

  // train
  auto* trn = app.add_subcommand("train", "Train a network");
  std::string trn_events, trn_net;
  std::optional<std::size_t> trn_epochs, trn_batch;
  std::optional<double> trn_lr;
  trn->add_option("--events", trn_events, "Event file (default: synthetic data)");
  trn->add_option("--net", trn_net, "Network spec document");
  trn->add_option("--epochs", trn_epochs);
  trn->add_option("--batch-size", trn_batch);
  trn->add_option("--lr", trn_lr);

  // eval
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string evl_ckpt, evl_events;
  std::size_t evl_bins = 100;
  evl->add_option("--checkpoint", evl_ckpt)->required();
  evl->add_option("--events", evl_events);
  evl->add_option("--bins", evl_bins);

  // transform
  auto* tfm = app.add_subcommand("transform", "Apply residual alignment / temporal reconstruction to a raster cache");
  std::string tfm_input, tfm_nar, tfm_variant, tfm_output, tfm_reduction = "max";
  std::size_t tfm_len = 2, tfm_stride = 1;
  tfm->add_option("--input", tfm_input)->required();
  tfm->add_option("--tr", tfm_variant)->check(CLI::IsMember({"overlap", "no_overlap", "pool"}));
  tfm->add_option("--len", tfm_len);
  tfm->add_option("--stride", tfm_stride);
  tfm->add_option("--reduction", tfm_reduction)->check(CLI::IsMember({"max", "or"}));
  tfm->add_option("--nar", tfm_nar, "Module-output cache added to the input after right zero-padding");
  tfm->add_option("--output", tfm_output, "Output cache (default OUT/transformed.stras)");

  // profile-energy
  auto* pen = app.add_subcommand("profile-energy", "Count accumulate / multiply-accumulate operations");
  std::string pen_ckpt, pen_events;
  std::size_t pen_bins = 100;
  bool pen_unfolded = false, pen_pure = false;
  pen->add_option("--checkpoint", pen_ckpt)->required();
  pen->add_option("--events", pen_events);
  pen->add_option("--bins", pen_bins);
  pen->add_flag("--unfolded-bn", pen_unfolded, "Count batch norm as dense arithmetic");
  pen->add_flag("--pure", pen_pure, "Accumulates only");

  // profile-throughput
  auto* pth = app.add_subcommand("profile-throughput", "Measure forward throughput");
  std::string pth_ckpt, pth_net;
  BatchShape pth_shape;
  ThroughputOptions pth_opts;
  pth->add_option("--checkpoint", pth_ckpt);
  pth->add_option("--net", pth_net);
  pth->add_option("--time", pth_shape.t_len);
  pth->add_option("--batch", pth_shape.batch);
  pth->add_option("--iterations", pth_opts.iterations);
  pth->add_option("--density", pth_opts.density);
  pth->add_flag("--parallel", pth_opts.parallel);

  // ablate
  auto* abl = app.add_subcommand("ablate", "Run the NAR / TR-o / TR-no / Pool toggle matrix");
  std::vector<std::string> abl_rows;
  std::optional<std::size_t> abl_epochs;
  bool abl_no_verify = false;
  abl->add_option("--rows", abl_rows, "Rows such as none, nar, nar+pool, nar+tr_o, nar+tr_no, nar+tr_o+tr_no")
      ->delimiter(',');
  abl->add_option("--epochs", abl_epochs);
  abl->add_flag("--no-verify", abl_no_verify, "Skip the reproducibility rerun");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error kind=usage message=\"" << escape(e.what()) << "\"\n";
    return kExitUsage;
  }

  const bool kv = common.format == "kv";
  const fs::path out_dir = common.out;
  try {
    fs::create_directories(out_dir);
    if (*gen) {
      ExperimentConfig cfg = experiment_from(common);
      if (!common.config.empty() && !cfg.data.events) syn = cfg.data.synthetic;
      const SynthSpec spec = make_synth_spec(syn.classes, syn.units, syn.duration, syn.bins, syn.noise_rate,
                                             cfg.seed, syn.units_per_class);
      const auto streams = gen_synthetic_events(spec, syn.count_per_class);
      const fs::path events = out_dir / "events.jsonl";
      write_event_file(events, streams);
      write_manifest(out_dir, "gen-data", args, cfg.seed, {events});
      if (kv) out << json{{"events", events.string()}, {"samples", streams.size()}}.dump() << '\n';
      else out << "wrote " << streams.size() << " samples to " << events.string() << '\n';
    } else if (*bin) {
      const auto streams = read_event_file(bin_events_path);
      std::vector<SpikeRaster> rasters;
      for (std::size_t i = 0; i < streams.size(); ++i) {
        try {
          rasters.push_back(bin_events(streams[i], bin_bins, bin_units, !bin_counts));
        } catch (const IngestError& e) {
          throw IngestError("record " + std::to_string(i) + ": " + e.what());
        }
      }
      std::vector<const Tensor3*> ptrs;
      for (const auto& r : rasters) ptrs.push_back(&r);
      const SpikeRaster stacked = ptrs.empty() ? SpikeRaster(bin_bins, 0, bin_units) : stack_batch(ptrs);
      const fs::path cache = out_dir / "raster.stras";
      write_raster_cache(cache, stacked);
      write_manifest(out_dir, "bin", args, common.seed, {cache});
      if (kv) out << json{{"cache", cache.string()}, {"t", stacked.t_len()}, {"b", stacked.batch()}, {"n", stacked.units()}}.dump() << '\n';
      else out << "wrote raster " << stacked.shape_string() << " to " << cache.string() << '\n';
    } else if (*trn) {
      ExperimentConfig cfg = experiment_from(common);
      if (!trn_events.empty()) cfg.data.events = trn_events;
      if (trn_epochs) cfg.train.epochs = *trn_epochs;
      if (trn_batch) cfg.train.batch_size = *trn_batch;
      if (trn_lr) cfg.train.learning_rate = *trn_lr;
      cfg.train.validate();
      const Dataset all = load_dataset(cfg.data, cfg.seed);
      NetworkSpec spec = !trn_net.empty() ? load_network_spec(trn_net)
                                          : cfg.network.value_or(default_network_spec(all.n_units, all.n_classes));
      for (const auto& w : spec.warnings()) err << "warning: " << w << '\n';
      const DatasetSplits data = split_dataset(all, cfg.splits, cfg.seed);
      const RunArtifacts art = run_training(cfg, spec, data, out_dir);
      if (kv) {
        out << art.run.to_json() << '\n';
      } else {
        for (const auto& e : art.run.epochs) {
          char line[160];
          std::snprintf(line, sizeof line, "epoch %3zu  loss %.4f  train %.4f  valid %.4f  (%.2fs)\n", e.epoch,
                        e.train_loss, e.train_accuracy, e.valid_accuracy, e.seconds);
          out << line;
        }
        out << "best epoch " << art.run.best_epoch << "  test accuracy " << art.run.test_accuracy << '\n';
      }
    } else if (*evl) {
      Network net = load_checkpoint(evl_ckpt);
      const Dataset d = resolve_eval_data(common, evl_events, evl_bins, net.spec);
      const double acc = evaluate(net, d);
      const fs::path report = out_dir / "eval.json";
      write_text(report, json{{"accuracy", acc}, {"samples", d.size()}}.dump(2));
      write_manifest(out_dir, "eval", args, common.seed, {report});
      if (kv) out << json{{"accuracy", acc}, {"samples", d.size()}}.dump() << '\n';
      else out << "accuracy " << acc << " over " << d.size() << " samples\n";
    } else if (*tfm) {
      SpikeRaster x = read_raster_cache(tfm_input);
      if (!tfm_nar.empty()) x = nar_residual(x, read_raster_cache(tfm_nar));
      if (!tfm_variant.empty()) {
        TrConfig cfg{parse_tr_variant(tfm_variant), tfm_len, tfm_stride, parse_reduction(tfm_reduction)};
        x = tr_apply(x, cfg);
      }
      const fs::path output = tfm_output.empty() ? out_dir / "transformed.stras" : fs::path(tfm_output);
      write_raster_cache(output, x);
      write_manifest(out_dir, "transform", args, common.seed, {output});
      if (kv) out << json{{"cache", output.string()}, {"t", x.t_len()}, {"b", x.batch()}, {"n", x.units()}}.dump() << '\n';
      else out << "wrote raster " << x.shape_string() << " to " << output.string() << '\n';
    } else if (*pen) {
      Network net = load_checkpoint(pen_ckpt);
      const Dataset d = resolve_eval_data(common, pen_events, pen_bins, net.spec);
      const Batch batch = make_batch(d);
      const ForwardResult fr = network_forward(net, batch.x, {});
      const EnergyReport rep = energy(fr.record, net, {!pen_unfolded, pen_pure});
      const fs::path report = out_dir / "energy.json";
      write_text(report, rep.to_json());
      write_manifest(out_dir, "profile-energy", args, common.seed, {report});
      if (kv) {
        out << rep.to_json() << '\n';
      } else {
        out << rep.to_text();
        out << "per sample (pJ) " << rep.energy_pj / static_cast<double>(d.size()) << " over " << d.size()
            << " samples\n";
      }
    } else if (*pth) {
      Network net = !pth_ckpt.empty() ? load_checkpoint(pth_ckpt)
                    : !pth_net.empty() ? build_network(load_network_spec(pth_net), common.seed)
                                       : build_network(default_network_spec(64, 10), common.seed);
      pth_opts.seed = common.seed;
      const ThroughputReport rep = throughput(net, pth_shape, pth_opts);
      const fs::path report = out_dir / "throughput.json";
      write_text(report, rep.to_json());
      write_manifest(out_dir, "profile-throughput", args, common.seed, {report});
      out << (kv ? rep.to_json() + "\n" : rep.to_text());
    } else if (*abl) {
      ExperimentConfig cfg = experiment_from(common);
      if (!abl_rows.empty()) {
        cfg.ablation.rows.clear();
        for (const auto& r : abl_rows) cfg.ablation.rows.push_back(AblationToggles::parse(r));
      }
      if (abl_epochs) cfg.train.epochs = *abl_epochs;
      if (abl_no_verify) cfg.ablation.verify = false;
      const auto rows = run_ablation(cfg, out_dir);
      const fs::path grid = out_dir / "ablation.json";
      write_text(grid, ablation_to_json(rows));
      write_text(out_dir / "ablation.txt", format_ablation_table(rows));
      write_manifest(out_dir, "ablate", args, cfg.seed, {grid, out_dir / "ablation.txt"});
      out << (kv ? ablation_to_json(rows) + "\n" : format_ablation_table(rows));
      const bool all_ok = std::all_of(rows.begin(), rows.end(),
                                      [](const AblationRowResult& r) { return !r.verify_ran || r.verified; });
      if (!all_ok) throw Error("ablate: a rerun did not reproduce its manifest hashes");
    }
  } catch (const ConfigError& e) {
    err << "error kind=" << e.kind() << " message=\"" << escape(e.what()) << "\"\n";
    return kExitConfig;
  } catch (const ShapeError& e) {
    err << "error kind=" << e.kind() << " message=\"" << escape(e.what()) << "\"\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error kind=" << e.kind() << " message=\"" << escape(e.what()) << "\"\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error kind=internal message=\"" << escape(e.what()) << "\"\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace spiketempo
