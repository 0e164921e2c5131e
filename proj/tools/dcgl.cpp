// dcgl: synth | train | eval | gradcheck
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcgl/checkpoint.hpp"
#include "dcgl/config.hpp"
#include "dcgl/dataset.hpp"
#include "dcgl/error.hpp"
#include "dcgl/evalkit.hpp"
#include "dcgl/gradsuite.hpp"
#include "dcgl/synth.hpp"
#include "dcgl/trainer.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace dcgl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string kebab(std::string s) {
  for (auto& c : s)
    if (c == '_') c = '-';
  return s;
}

struct DataArgs {
  std::string dir;
  std::string interactions, kg, embeddings, id_map, split;
  std::size_t min_interactions = 0;
  std::uint64_t split_seed = 1;
  bool strict_linking = false;

  void attach(CLI::App* app) {
    app->add_option("--data", dir, "dataset directory")->required();
    app->add_option("--interactions", interactions, "override path of interactions.tsv");
    app->add_option("--kg", kg, "override path of kg.tsv");
    app->add_option("--embeddings", embeddings, "override path of semantic.emb");
    app->add_option("--id-map", id_map, "override path of id_map.tsv");
    app->add_option("--split", split, "override path of split.txt");
    app->add_option("--min-interactions", min_interactions, "drop users with fewer edges");
    app->add_option("--split-seed", split_seed, "seed for a fresh split when no split file exists");
    app->add_flag("--strict-linking", strict_linking, "reject KG heads that are not items");
  }

  data::LoadOptions options(bool need_semantic) const {
    data::LoadOptions o;
    o.paths = data::DatasetPaths::in(dir);
    if (!interactions.empty()) o.paths.interactions = interactions;
    if (!kg.empty()) o.paths.kg = kg;
    if (!embeddings.empty()) o.paths.embeddings = embeddings;
    if (!id_map.empty()) o.paths.id_map = id_map;
    if (!split.empty()) o.paths.split = split;
    o.min_interactions = min_interactions;
    o.split_seed = split_seed;
    o.need_semantic = need_semantic;
    o.strict_linking = strict_linking;
    return o;
  }
};

void record_inputs(cli::RunManifest& m, const data::LoadOptions& o) {
  for (const auto& p : o.paths.all())
    if (fs::exists(p)) {
      if (!o.need_semantic && (p == o.paths.embeddings || p == o.paths.id_map)) continue;
      m.add_input(p);
    }
}

void ensure_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
  fs::create_directories(dir);
}

int cmd_synth(const corpus::SynthConfig& cfg, const std::string& out, bool force) {
  cfg.validate();
  ensure_output_dir(out, force);
  auto data = corpus::gen_synthetic(cfg);
  data::write_synthetic(data::DatasetPaths::in(out), data);
  std::cout << "wrote " << data.graph.num_users << " users, " << data.graph.num_items << " items, "
            << data.graph.edges.size() << " interactions, " << data.kg.triplets.size() << " triplets to " << out
            << "\n";
  return 0;
}

train::TrainConfig resolve_config(const std::string& path, const std::map<std::string, std::string>& flags) {
  train::TrainConfig cfg;
  if (!path.empty()) cfg = train::TrainConfig::from_text(io::read_text_file(path));
  if (const char* env = std::getenv("DCGL_SEED")) cfg.set("seed", env);
  for (const auto& [k, v] : flags) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

int cmd_train(const train::TrainConfig& cfg, const std::string& config_path, const DataArgs& data_args,
              const std::string& out, bool force, bool quiet) {
  ensure_output_dir(out, force);
  const fs::path dir(out);
  cli::RunManifest manifest;
  manifest.command = "train";
  manifest.config_path = config_path;
  manifest.config_hash = to_hex(cfg.hash());
  manifest.seed = cfg.seed;
  manifest.build = DCGL_BUILD_ID;
  manifest.started = cli::utc_timestamp();
  const auto load = data_args.options(model::uses_semantic(cfg.ablation));
  record_inputs(manifest, load);
  manifest.outputs = {(dir / "config.txt").string(), (dir / "checkpoint.bin").string(),
                      (dir / "history.jsonl").string(), (dir / "manifest.json").string()};
  manifest.write(dir / "manifest.json");

  auto bundle = data::load_bundle(load);
  if (bundle.missing_semantic > 0)
    std::clog << "note: " << bundle.missing_semantic << " entities have no semantic vector (zeros used)\n";
  io::write_text_file(dir / "config.txt", cfg.to_text());

  std::ofstream history(dir / "history.jsonl");
  train::Trainer trainer(cfg, bundle);
  auto result = trainer.fit([&](const train::EpochRecord& r) {
    history << train::to_json_line(r) << "\n";
    history.flush();
    if (!quiet)
      std::clog << "epoch " << r.epoch << " loss " << r.loss.total << " val_recall@" << cfg.early_stop_k << " "
                << r.val_recall << "\n";
  });
  ckpt::save(dir / "checkpoint.bin", result.best_checkpoint);
  manifest.finished = cli::utc_timestamp();
  manifest.status = "ok";
  manifest.write(dir / "manifest.json");
  std::cout << "best epoch " << result.best_epoch << " validation recall@" << cfg.early_stop_k << " "
            << result.best_validation << "\n";
  return 0;
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      ks.push_back(std::stoul(tok, &pos));
      if (pos != tok.size() || ks.back() == 0) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("bad cutoff list '" + text + "'");
    }
  }
  if (ks.empty()) throw ConfigError("empty cutoff list");
  return ks;
}

int cmd_eval(const std::string& run, std::string config_path, std::string checkpoint_path, const DataArgs& data_args,
             const std::string& ks_text, std::vector<std::string> groups, const std::string& target_text,
             const std::string& out, std::size_t threads) {
  if (config_path.empty()) config_path = (fs::path(run) / "config.txt").string();
  if (checkpoint_path.empty()) checkpoint_path = (fs::path(run) / "checkpoint.bin").string();
  auto cfg = train::TrainConfig::from_text(io::read_text_file(config_path));
  cfg.threads = threads;
  auto ck = ckpt::load(checkpoint_path);
  ckpt::require_hash(ck, cfg.hash());

  eval::Target target = eval::Target::test;
  if (target_text == "validation") target = eval::Target::validation;
  else if (target_text == "train") target = eval::Target::train;
  else if (target_text != "test") throw ConfigError("target must be train, validation or test");

  auto bundle = data::load_bundle(data_args.options(model::uses_semantic(cfg.ablation)));
  auto init = model::init_params(cfg, model::dimensions(cfg, bundle));
  model::ParamStore params;
  for (const auto& name : init.names()) params.add(name, ck.matrix("param." + name));
  auto reps = model::represent(params, bundle, cfg);
  auto report = eval::evaluate(reps, bundle.split, target, parse_ks(ks_text), threads);

  if (groups.empty()) groups = {"user:0,18,36,72", "item:0,12,24,48"};
  std::vector<std::pair<eval::GroupSpec, std::vector<eval::GroupRow>>> tables;
  for (const auto& g : groups) {
    auto spec = eval::GroupSpec::parse(g);
    tables.emplace_back(spec, eval::group_report(report, bundle.freq, spec));
  }
  auto gates = eval::export_gates(reps, bundle.freq);

  const fs::path dir = out.empty() ? fs::path(run.empty() ? "." : run) : fs::path(out);
  fs::create_directories(dir);
  io::write_text_file(dir / "metrics.json", eval::metrics_json(report, to_hex(cfg.hash()), tables, &gates));
  {
    std::ofstream tsv(dir / "gates.tsv");
    eval::write_gate_tsv(tsv, gates);
  }
  for (std::size_t k = 0; k < report.ks.size(); ++k)
    std::cout << "recall@" << report.ks[k] << " " << report.recall[k] << "  ndcg@" << report.ks[k] << " "
              << report.ndcg[k] << "\n";
  return 0;
}

int cmd_gradcheck(std::size_t trials, std::uint64_t seed) {
  grad::SuiteOptions o;
  o.trials = trials;
  o.seed = seed;
  auto r = grad::run_gradient_suite(o);
  for (const auto& rep : r.reports)
    std::cout << (rep.pass ? "PASS " : "FAIL ") << rep.kernel << " max_rel_error=" << rep.max_rel_error
              << " trials=" << rep.trials << (rep.detail.empty() ? "" : " " + rep.detail) << "\n";
  std::cout << "gradient suite " << (r.pass() ? "passed" : "FAILED") << " in " << r.seconds << " s\n";
  return r.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DCGL training and evaluation engine"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset directory");
  corpus::SynthConfig sc;
  std::string synth_out;
  bool synth_force = false;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--users", sc.num_users);
  synth->add_option("--items", sc.num_items);
  synth->add_option("--entities", sc.num_entities, "attribute entities besides items");
  synth->add_option("--relations", sc.num_relations);
  synth->add_option("--popularity-exponent", sc.popularity_exponent);
  synth->add_option("--latent-dim", sc.latent_dim);
  synth->add_option("--semantic-dim", sc.semantic_dim);
  synth->add_option("--clusters", sc.num_clusters);
  synth->add_option("--mean-degree", sc.mean_user_degree);
  synth->add_option("--min-degree", sc.min_user_degree);
  synth->add_flag("--noise-by-frequency", sc.semantic_noise_by_frequency);
  synth->add_option("--seed", sc.seed);
  synth->add_flag("--force", synth_force, "write into a non-empty directory");

  // train
  auto* trn = app.add_subcommand("train", "fit a model and write checkpoint, history and manifest");
  std::string config_path, train_out;
  bool train_force = false, quiet = false;
  DataArgs train_data;
  train_data.attach(trn);
  trn->add_option("--config", config_path, "key=value config file");
  trn->add_option("--out", train_out, "run directory")->required();
  trn->add_flag("--force", train_force);
  trn->add_flag("--quiet", quiet);
  std::map<std::string, std::string> flag_values;
  std::map<std::string, std::string> storage;
  for (const auto& key : train::TrainConfig::keys()) storage[key];
  for (auto& [key, value] : storage) trn->add_option("--" + kebab(key), value);

  // eval
  auto* ev = app.add_subcommand("eval", "rank held-out items and write metrics, groups and gates");
  std::string run_dir, eval_config, eval_ckpt, ks = "50,100", target = "test", eval_out;
  std::vector<std::string> groups;
  std::size_t eval_threads = 1;
  DataArgs eval_data;
  eval_data.attach(ev);
  ev->add_option("--run", run_dir, "run directory holding config.txt and checkpoint.bin");
  ev->add_option("--config", eval_config);
  ev->add_option("--checkpoint", eval_ckpt);
  ev->add_option("--ks", ks, "comma-separated cutoffs");
  ev->add_option("--groups", groups, "side:b0,b1,... (repeatable)");
  ev->add_option("--target", target, "train | validation | test");
  ev->add_option("--out", eval_out, "output directory (default: the run directory)");
  ev->add_option("--threads", eval_threads);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  std::size_t trials = 20;
  std::uint64_t gc_seed = 1;
  gc->add_option("--trials", trials);
  gc->add_option("--seed", gc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(sc, synth_out, synth_force);
    if (*trn) {
      for (const auto& [key, value] : storage)
        if (trn->count("--" + kebab(key)) > 0) flag_values[key] = value;
      auto cfg = resolve_config(config_path, flag_values);
      return cmd_train(cfg, config_path, train_data, train_out, train_force, quiet);
    }
    if (*ev) {
      if (run_dir.empty() && (eval_config.empty() || eval_ckpt.empty()))
        throw ConfigError("eval needs --run or both --config and --checkpoint");
      return cmd_eval(run_dir, eval_config, eval_ckpt, eval_data, ks, groups, target, eval_out, eval_threads);
    }
    if (*gc) return cmd_gradcheck(trials, gc_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
