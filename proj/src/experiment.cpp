#include "spiketempo/experiment.hpp"

#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "spiketempo/error.hpp"
#include "spiketempo/hash.hpp"

namespace spiketempo {

using nlohmann::json;

void AblationToggles::validate() const {
  const int active = int(tr_o) + int(tr_no) + int(pool);
  if (active > 1 && !(tr_o && tr_no && !pool))
    throw ConfigError("ablation row '" + name() + "': at most one of tr_o/tr_no/pool, or tr_o+tr_no");
}

std::string AblationToggles::name() const {
  std::string s;
  auto add = [&s](bool on, const char* part) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += part;
  };
  add(nar, "nar");
  add(pool, "pool");
  add(tr_o, "tr_o");
  add(tr_no, "tr_no");
  return s.empty() ? "none" : s;
}

AblationToggles AblationToggles::parse(const std::string& name) {
  AblationToggles t;
  if (name == "none" || name.empty()) return t;
  std::size_t start = 0;
  while (start <= name.size()) {
    const std::size_t end = std::min(name.find('+', start), name.size());
    const std::string part = name.substr(start, end - start);
    if (part == "nar") t.nar = true;
    else if (part == "tr_o" || part == "tr-o") t.tr_o = true;
    else if (part == "tr_no" || part == "tr-no") t.tr_no = true;
    else if (part == "pool") t.pool = true;
    else throw ConfigError("unknown ablation toggle '" + part + "'");
    start = end + 1;
  }
  t.validate();
  return t;
}

std::vector<AblationToggles> full_ablation_matrix() {
  return {{false, false, false, false}, {true, false, false, false}, {true, false, false, true},
          {true, true, false, false},   {true, false, true, false},  {true, true, true, false}};
}

namespace {

json tr_json(const TrConfig& c) {
  return {{"variant", to_string(c.variant)}, {"len", c.len}, {"stride", c.stride},
          {"reduction", to_string(c.reduction)}};
}

TrConfig tr_from_json(const json& j, TrConfig fallback) {
  if (j.contains("variant")) fallback.variant = parse_tr_variant(j.at("variant").get<std::string>());
  if (j.contains("len")) fallback.len = j.at("len").get<std::size_t>();
  if (j.contains("stride")) fallback.stride = j.at("stride").get<std::size_t>();
  if (j.contains("reduction")) fallback.reduction = parse_reduction(j.at("reduction").get<std::string>());
  fallback.validate();
  return fallback;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json data_j;
  if (data.events) {
    data_j = {{"events", data.events->string()}, {"bins", data.bins}, {"units", data.units},
              {"classes", data.classes}, {"binary", data.binary}};
  } else {
    const auto& s = data.synthetic;
    data_j = {{"synthetic",
               {{"classes", s.classes}, {"units", s.units}, {"duration", s.duration}, {"bins", s.bins},
                {"noise_rate", s.noise_rate}, {"count_per_class", s.count_per_class},
                {"units_per_class", s.units_per_class}}}};
  }
  json rows = json::array();
  for (const auto& r : ablation.rows) rows.push_back(r.name());
  json j = {{"seed", seed},
            {"data", data_j},
            {"splits", {splits.train, splits.valid, splits.test}},
            {"train",
             {{"epochs", train.epochs}, {"batch_size", train.batch_size}, {"lr", train.learning_rate},
              {"optimizer", train.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
              {"momentum", train.momentum}, {"beta1", train.beta1}, {"beta2", train.beta2},
              {"soft_forward", train.soft_forward}}},
            {"ablation",
             {{"rows", rows}, {"tr_o", tr_json(ablation.tr_o)}, {"tr_no", tr_json(ablation.tr_no)},
              {"verify", ablation.verify}}}};
  if (ablation.pool) j["ablation"]["pool"] = tr_json(*ablation.pool);
  if (network) j["network"] = json::parse(dump_network_spec(*network));
  return j.dump(2);
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("events")) {
        std::filesystem::path p = d.at("events").get<std::string>();
        cfg.data.events = p.is_absolute() ? p : base_dir / p;
        cfg.data.bins = d.value("bins", cfg.data.bins);
        cfg.data.units = d.value("units", cfg.data.units);
        cfg.data.classes = d.value("classes", cfg.data.classes);
        cfg.data.binary = d.value("binary", true);
      } else if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        auto& syn = cfg.data.synthetic;
        syn.classes = s.value("classes", syn.classes);
        syn.units = s.value("units", syn.units);
        syn.duration = s.value("duration", syn.duration);
        syn.bins = s.value("bins", syn.bins);
        syn.noise_rate = s.value("noise_rate", syn.noise_rate);
        syn.count_per_class = s.value("count_per_class", syn.count_per_class);
        syn.units_per_class = s.value("units_per_class", syn.units_per_class);
        cfg.data.bins = syn.bins;
        cfg.data.units = syn.units;
        cfg.data.classes = syn.classes;
      }
    }
    if (j.contains("splits")) {
      const auto f = j.at("splits").get<std::vector<double>>();
      if (f.size() != 3) throw ConfigError("experiment: splits needs three fractions");
      cfg.splits = {f[0], f[1], f[2]};
    }
    if (j.contains("network")) {
      const auto& n = j.at("network");
      if (n.is_string()) {
        std::filesystem::path p = n.get<std::string>();
        cfg.network = load_network_spec(p.is_absolute() ? p : base_dir / p);
      } else {
        cfg.network = parse_network_spec(n.dump());
      }
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      auto& tc = cfg.train;
      tc.epochs = t.value("epochs", tc.epochs);
      tc.batch_size = t.value("batch_size", tc.batch_size);
      tc.learning_rate = t.value("lr", tc.learning_rate);
      const auto opt = t.value("optimizer", std::string("adam"));
      if (opt == "adam") tc.optimizer = OptimizerKind::adam;
      else if (opt == "sgd") tc.optimizer = OptimizerKind::sgd;
      else throw ConfigError("experiment: unknown optimizer '" + opt + "'");
      tc.momentum = t.value("momentum", tc.momentum);
      tc.beta1 = t.value("beta1", tc.beta1);
      tc.beta2 = t.value("beta2", tc.beta2);
      tc.soft_forward = t.value("soft_forward", false);
    }
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      if (a.contains("rows"))
        for (const auto& r : a.at("rows")) cfg.ablation.rows.push_back(AblationToggles::parse(r.get<std::string>()));
      if (a.contains("tr_o")) cfg.ablation.tr_o = tr_from_json(a.at("tr_o"), cfg.ablation.tr_o);
      if (a.contains("tr_no")) cfg.ablation.tr_no = tr_from_json(a.at("tr_no"), cfg.ablation.tr_no);
      if (a.contains("pool"))
        cfg.ablation.pool = tr_from_json(a.at("pool"), {TrVariant::pool, cfg.ablation.tr_no.len,
                                                        cfg.ablation.tr_no.stride, Reduction::max});
      cfg.ablation.verify = a.value("verify", true);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  cfg.train.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text(path), path.parent_path());
}

NetworkSpec default_network_spec(std::size_t inputs, std::size_t classes) {
  NetworkSpec spec;
  spec.n_inputs = inputs;
  spec.n_classes = classes;
  ModuleSpec m;
  m.size = 64;
  m.max_delay = 8;
  m.dropout = 0.1;
  spec.hidden = {m, m};
  spec.nar = {false, true};
  spec.tr = {{{TrVariant::no_overlap, 3, 1, Reduction::max}, 1}};
  spec.readout.eta = 0.8;
  spec.validate();
  return spec;
}

NetworkSpec apply_toggles(const NetworkSpec& base, const AblationToggles& t, const AblationSettings& settings) {
  t.validate();
  NetworkSpec spec = base;
  const std::size_t K = spec.hidden.size();
  spec.nar.assign(K, false);
  if (t.nar) {
    for (std::size_t k = 0; k < K; ++k)
      if ((k >= 1 || K == 1) && spec.module_input_size(k) == spec.hidden[k].size) spec.nar[k] = true;
  }
  spec.tr.clear();
  const std::size_t after = K - 1;
  if (t.tr_o) spec.tr.push_back({settings.tr_o, after});
  if (t.tr_no) spec.tr.push_back({settings.tr_no, after});
  if (t.pool) {
    TrConfig pool = settings.pool.value_or(TrConfig{TrVariant::pool, settings.tr_no.len, settings.tr_no.stride});
    pool.variant = TrVariant::pool;
    spec.tr.push_back({pool, after});
  }
  spec.validate();
  return spec;
}

Dataset load_dataset(const DataSource& source, std::uint64_t seed) {
  if (source.events)
    return dataset_from_streams(read_event_file(*source.events), source.bins, source.units, source.classes,
                                source.binary);
  const auto& s = source.synthetic;
  const SynthSpec spec =
      make_synth_spec(s.classes, s.units, s.duration, s.bins, s.noise_rate, seed, s.units_per_class);
  return gen_synthetic(spec, s.count_per_class);
}

namespace {

std::string results_document(const TrainRun& run) {
  json epochs = json::array();
  for (const auto& e : run.epochs)
    epochs.push_back({e.epoch, e.train_loss, e.train_accuracy, e.valid_accuracy});
  return json{{"epochs", epochs},
              {"best_epoch", run.best_epoch},
              {"best_valid_accuracy", run.best_valid_accuracy},
              {"test_accuracy", run.test_accuracy}}
      .dump();
}

}  // namespace

RunArtifacts run_training(const ExperimentConfig& cfg, const NetworkSpec& spec, const DatasetSplits& data,
                          const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  Network net = build_network(spec, cfg.seed);
  RunArtifacts art;
  art.run = train(net, data, cfg.train);
  const std::string ckpt = encode_checkpoint(net);
  {
    std::ofstream out(out_dir / "checkpoint.stnet", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (out_dir / "checkpoint.stnet").string());
    out.write(ckpt.data(), static_cast<std::streamsize>(ckpt.size()));
  }
  write_text(out_dir / "run.json", art.run.to_json());
  art.checkpoint_sha256 = sha256_hex(ckpt);
  art.results_sha256 = sha256_hex(results_document(art.run));
  json manifest = {{"seed", cfg.seed},
                   {"config", json::parse(cfg.to_json())},
                   {"network", json::parse(dump_network_spec(spec))},
                   {"artifacts",
                    {{"checkpoint.stnet", art.checkpoint_sha256}, {"results", art.results_sha256}}}};
  art.manifest_json = manifest.dump(2);
  write_text(out_dir / "manifest.json", art.manifest_json);
  return art;
}

std::vector<AblationRowResult> run_ablation(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const Dataset all = load_dataset(cfg.data, cfg.seed);
  const DatasetSplits data = split_dataset(all, cfg.splits, cfg.seed);
  const NetworkSpec base = cfg.network.value_or(default_network_spec(all.n_units, all.n_classes));
  const auto rows = cfg.ablation.rows.empty() ? full_ablation_matrix() : cfg.ablation.rows;
  std::vector<AblationRowResult> results;
  for (const auto& toggles : rows) {
    const NetworkSpec spec = apply_toggles(base, toggles, cfg.ablation);
    const auto dir = out_dir / toggles.name();
    const RunArtifacts art = run_training(cfg, spec, data, dir);
    AblationRowResult r;
    r.toggles = toggles;
    r.test_accuracy = art.run.test_accuracy;
    r.best_valid_accuracy = art.run.best_valid_accuracy;
    r.params = build_network(spec, cfg.seed).parameter_count();
    r.checkpoint_sha256 = art.checkpoint_sha256;
    r.results_sha256 = art.results_sha256;
    if (cfg.ablation.verify) {
      const RunArtifacts again = run_training(cfg, spec, data, dir / "verify");
      r.verify_ran = true;
      r.verified = again.checkpoint_sha256 == art.checkpoint_sha256 && again.results_sha256 == art.results_sha256;
    }
    results.push_back(r);
  }
  return results;
}

std::string format_ablation_table(const std::vector<AblationRowResult>& rows) {
  std::string out = "NAR   TR-o  TR-no Pool  Acc(%)\n";
  auto mark = [](bool on) { return on ? std::string("✓     ") : std::string("      "); };
  for (const auto& r : rows) {
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.2f", r.test_accuracy * 100.0);
    out += mark(r.toggles.nar) + mark(r.toggles.tr_o) + mark(r.toggles.tr_no) + mark(r.toggles.pool) + acc;
    if (r.verify_ran) out += r.verified ? "  reproduced" : "  NOT REPRODUCED";
    out += '\n';
  }
  return out;
}

std::string ablation_to_json(const std::vector<AblationRowResult>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"row", r.toggles.name()},
                   {"nar", r.toggles.nar},
                   {"tr_o", r.toggles.tr_o},
                   {"tr_no", r.toggles.tr_no},
                   {"pool", r.toggles.pool},
                   {"acc", r.test_accuracy},
                   {"best_valid_acc", r.best_valid_accuracy},
                   {"params", r.params},
                   {"checkpoint_sha256", r.checkpoint_sha256},
                   {"results_sha256", r.results_sha256},
                   {"verified", r.verify_ran ? json(r.verified) : json(nullptr)}});
  return arr.dump(2);
}

}  // namespace spiketempo
