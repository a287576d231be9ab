// lecb: command-line driver for pools, sampling, training, evaluation,
// the experiment grid, SVCCA curves and the retention sweep.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lecb/error.hpp"
#include "lecb/harness.hpp"
#include "lecb/numerics/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lecb;

namespace {

std::string default_out(const std::string& leaf) {
  const char* env = std::getenv("LECB_OUT_DIR");
  const fs::path base = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("lecb_out");
  return (base / leaf).string();
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(6) << v;
  return o.str();
}

std::vector<double> parse_probs(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad probability '" + item + "' in --probs");
    }
  }
  if (out.empty()) throw ConfigError("--probs is empty");
  return out;
}

// ---------------------------------------------------------------------------
// Shared option groups

struct TaskOptions {
  std::string task = "default";
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--task", task, "\"default\" or a JSON file of task settings");
    app->add_option("--task-seed", seed, "Override the task seed");
  }

  harness::TaskConfig resolve() const {
    harness::TaskConfig cfg =
        task == "default" ? harness::TaskConfig{} : harness::TaskConfig::from_json(read_json(task));
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
  }

  std::map<std::string, std::string> inputs() const {
    if (task == "default") return {};
    return {{"task", harness::file_hash(task)}};
  }
};

struct TrainOptions {
  std::string config;
  std::optional<std::string> variant, sampler;
  std::optional<double> lambda;
  std::optional<std::size_t> B, epochs, window, heads;
  std::optional<double> lr, lr_decay, retention;
  std::optional<std::uint64_t> seed, eval_seed;
  bool verbose = false;

  void attach(CLI::App* app, bool with_variant) {
    app->add_option("--train-config", config, "JSON file of training settings");
    if (with_variant) {
      app->add_option("--variant", variant, "none, baseline_nam, lecb_v1, lecb_v2 (default), cb_c");
      app->add_option("--sampler", sampler, "Training sampler: sma, smb (default), smc");
      app->add_option("--lambda", lambda, "Weight of the local branch");
      app->add_option("--retention", retention, "Positive retention probability");
    }
    app->add_option("--B", B, "Context phrases per utterance");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--window", window, "Neighbourhood window (odd)");
    app->add_option("--heads", heads, "Retrieval attention heads");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--lr-decay", lr_decay, "Per-epoch learning-rate decay");
    app->add_option("--seed", seed, "Training seed");
    app->add_option("--eval-seed", eval_seed, "Seed of the evaluation batches");
    app->add_flag("--verbose", verbose, "Log every epoch to stderr");
  }

  harness::TrainConfig resolve(bool with_variant) const {
    harness::TrainConfig cfg = config.empty() ? harness::TrainConfig{}
                                              : harness::TrainConfig::from_json(read_json(config));
    if (with_variant) {
      if (variant) cfg.variant = bias::parse_variant(*variant);
      if (sampler) cfg.sampler = sampling::parse_method(*sampler);
      if (cfg.sampler == sampling::Method::smd) {
        throw ConfigError("smd is the evaluation sampler; train with sma, smb or smc");
      }
      if (lambda) cfg.lambda = *lambda;
      if (retention) cfg.retention = *retention;
    }
    if (B) cfg.B = *B;
    if (epochs) cfg.epochs = *epochs;
    if (window) cfg.window = *window;
    if (heads) cfg.heads = *heads;
    if (lr) cfg.lr = *lr;
    if (lr_decay) cfg.lr_decay = *lr_decay;
    if (seed) cfg.seed = *seed;
    if (eval_seed) cfg.eval_seed = *eval_seed;
    cfg.verbose = verbose;
    cfg.validate();
    return cfg;
  }
};

json seeds_of(const harness::TaskConfig& t, const harness::TrainConfig& c) {
  return {{"task", t.seed}, {"train", c.seed}, {"eval", c.eval_seed}};
}

void write_report_csv(const fs::path& path, const std::string& variant, const std::string& sampler,
                      double lambda, const harness::EvalReport& report) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "variant,sampler,lambda,split,wer,errors,words\n";
  for (const auto& [name, r] : report.splits) {
    os << variant << ',' << sampler << ',' << std::fixed << std::setprecision(1) << lambda << ','
       << name << ',' << fmt(r.wer) << ',' << r.errors << ',' << r.words << '\n';
  }
}

// ---------------------------------------------------------------------------
// pools

struct PoolsCmd {
  std::string corpus;
  std::size_t n_max = 3;
  std::size_t rare_threshold = 4;
  std::size_t min_len = 3;
  std::string out = default_out("pools");

  void attach(CLI::App* app) {
    app->add_option("--corpus", corpus, "Corpus file (id<TAB>transcript)")->required();
    app->add_option("--nmax", n_max, "Longest n-gram");
    app->add_option("--rare-threshold", rare_threshold, "Entity detector frequency threshold");
    app->add_option("--min-len", min_len, "Entity detector minimum word length");
    app->add_option("--out", out, "Output directory");
  }

  int run() const {
    if (!fs::exists(corpus)) throw ConfigError("corpus file not found: " + corpus);
    const auto c = pools::load_corpus(corpus);
    const pools::FrequencyEntityDetector det(c, rare_threshold, min_len);
    const auto pool = pools::build_ngram_pool(c, n_max);
    const auto map = pools::build_entity_map(c, det, n_max);
    const std::string corpus_hash = harness::file_hash(corpus);
    pools::save_pools(out, pool, map, det, corpus_hash);
    harness::write_manifest(fs::path(out) / "ngram_pool.json", "pools",
                            {{"n_max", n_max},
                             {"rare_threshold", rare_threshold},
                             {"min_len", min_len},
                             {"entity_map_hash", harness::file_hash(fs::path(out) / "entity_map.json")}},
                            json::object(), {{"corpus", corpus_hash}});
    std::printf("%zu n-grams, %zu entities -> %s\n", pool.size(), map.size(), out.c_str());
    return 0;
  }
};

// ---------------------------------------------------------------------------
// sample

struct SampleCmd {
  std::string method = "smd";
  std::size_t B = 10;
  double retention = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_tokens = 8;
  std::size_t vocab_size = 512;
  std::size_t rare_threshold = 4;
  std::size_t min_len = 3;
  std::string corpus, pools_dir;
  std::string out = default_out("batches.jsonl");

  void attach(CLI::App* app) {
    app->add_option("--method", method, "sma, smb, smc or smd");
    app->add_option("--B", B, "Phrases per batch");
    app->add_option("--retention", retention, "Positive retention probability");
    app->add_option("--seed", seed, "Base seed");
    app->add_option("--l", max_tokens, "Maximum tokens per phrase");
    app->add_option("--vocab-size", vocab_size, "Subword vocabulary size built from the corpus");
    app->add_option("--rare-threshold", rare_threshold, "Entity detector frequency threshold");
    app->add_option("--min-len", min_len, "Entity detector minimum word length");
    app->add_option("--corpus", corpus, "Corpus file")->required();
    app->add_option("--pools", pools_dir, "Directory written by `pools`")->required();
    app->add_option("--out", out, "Output JSONL file");
  }

  int run() const {
    if (!fs::exists(corpus)) throw ConfigError("corpus file not found: " + corpus);
    const auto c = pools::load_corpus(corpus);
    const auto files = pools::load_pools(pools_dir);
    const std::string corpus_hash = harness::file_hash(corpus);
    if (files.corpus_hash != corpus_hash) {
      throw ConfigError("pools in " + pools_dir + " were built from corpus " + files.corpus_hash +
                        " but " + corpus + " hashes to " + corpus_hash +
                        "; rebuild them with `lecb pools`");
    }
    const pools::FrequencyEntityDetector det(c, rare_threshold, min_len);
    const std::string det_hash = pools::hex64(pools::fnv1a(det.config_string()));
    if (files.detector_hash != det_hash) {
      throw ConfigError("pools in " + pools_dir + " used a different entity detector (" +
                        files.detector_hash + " vs " + det_hash +
                        "); pass the --rare-threshold/--min-len used by `lecb pools`");
    }
    const auto vocab = tok::build_vocab(c.transcripts(), vocab_size);
    sampling::SamplerConfig sc;
    sc.B = B;
    sc.n_max = files.ngram_pool.n_max();
    sc.retention = retention;
    sc.max_tokens = max_tokens;
    sc.seed = seed;
    const sampling::Sampler sampler(files.ngram_pool, files.entity_map, det, vocab, sc);
    const auto m = sampling::parse_method(method);

    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    std::ofstream os(out);
    if (!os) throw Error("cannot write " + out);
    for (const auto& u : c.utterances) {
      const auto batch = sampler.sample(m, u, sampling::utterance_seed(seed, u.id));
      os << sampling::to_json(batch, vocab).dump() << '\n';
    }
    os.close();
    harness::write_manifest(out, "sample",
                            {{"method", method},
                             {"B", B},
                             {"retention", retention},
                             {"l", max_tokens},
                             {"vocab_size", vocab_size},
                             {"rare_threshold", rare_threshold},
                             {"min_len", min_len}},
                            {{"seed", seed}},
                            {{"corpus", corpus_hash},
                             {"ngram_pool", harness::file_hash(fs::path(pools_dir) / "ngram_pool.json")},
                             {"entity_map", harness::file_hash(fs::path(pools_dir) / "entity_map.json")}});
    std::printf("%zu batches -> %s\n", c.size(), out.c_str());
    return 0;
  }
};

// ---------------------------------------------------------------------------
// train

struct TrainCmd {
  TaskOptions task;
  TrainOptions train;
  std::string out = default_out("train");
  bool no_dumps = false;

  void attach(CLI::App* app) {
    task.attach(app);
    train.attach(app, true);
    app->add_option("--out", out, "Run directory");
    app->add_flag("--no-dumps", no_dumps, "Skip per-epoch bias embedding dumps");
  }

  int run() const {
    const auto tcfg = task.resolve();
    auto cfg = train.resolve(true);
    cfg.dump_embeddings = !no_dumps;
    const auto exp = harness::prepare_experiment(tcfg);
    const fs::path dir(out);
    fs::create_directories(dir);
    auto run = harness::train_cb(*exp, cfg);

    const fs::path metrics = dir / "metrics.csv";
    {
      std::ofstream os(metrics);
      if (!os) throw Error("cannot write " + metrics.string());
      os << "epoch,loss,dev_wer,seconds\n";
      for (const auto& e : run.epochs)
        os << e.epoch << ',' << fmt(e.loss) << ',' << fmt(e.dev_wer) << ',' << fmt(e.seconds) << '\n';
    }
    if (cfg.variant != bias::Variant::none) {
      num::save_checkpoint(run.model->parameters(), dir / "model.ckpt");
      if (!run.dumps.empty()) fs::create_directories(dir / "dumps");
      for (const auto& d : run.dumps) {
        std::ostringstream name;
        name << "epoch" << std::setw(3) << std::setfill('0') << d.tag.epoch << ".dump";
        svcca::save_dump(d, dir / "dumps" / name.str());
      }
    }
    const json run_info = {{"task", tcfg.to_json()},
                           {"train", cfg.to_json()},
                           {"task_hash", pools::hex64(exp->task.hash())},
                           {"backbone_checksum", pools::hex64(run.backbone_checksum_after)}};
    write_json(dir / "run.json", run_info);
    harness::write_manifest(metrics, "train", run_info, seeds_of(tcfg, cfg), task.inputs());
    std::printf("%s/%s: dev WER %.4f after %zu epochs -> %s\n",
                harness::variant_label(cfg.variant, cfg.lambda).c_str(),
                sampling::to_string(cfg.sampler).c_str(), run.epochs.back().dev_wer, cfg.epochs,
                dir.string().c_str());
    return 0;
  }
};

// ---------------------------------------------------------------------------
// eval

struct EvalCmd {
  TaskOptions task;
  std::string run_dir;
  std::string variant;
  std::size_t B = 10;
  std::uint64_t eval_seed = 99;
  bool attribution = false;
  std::string out = default_out("eval.csv");

  void attach(CLI::App* app) {
    task.attach(app);
    app->add_option("--run", run_dir, "Directory written by `train`");
    app->add_option("--variant", variant, "Use `none` to evaluate the backbone alone");
    app->add_option("--B", B, "Context phrases per utterance");
    app->add_option("--eval-seed", eval_seed, "Seed of the SMd batches");
    app->add_flag("--attribution", attribution, "Report bias attribution on test_rare");
    app->add_option("--out", out, "Output CSV");
  }

  int run() const {
    if (run_dir.empty() == variant.empty()) {
      throw ConfigError("eval needs exactly one of --run DIR or --variant none");
    }
    if (!variant.empty() && bias::parse_variant(variant) != bias::Variant::none) {
      throw ConfigError("only --variant none can be evaluated without a trained --run");
    }
    harness::TaskConfig tcfg;
    harness::TrainConfig cfg;
    cfg.variant = bias::Variant::none;
    json config;
    std::map<std::string, std::string> inputs;
    if (!run_dir.empty()) {
      const json info = read_json(fs::path(run_dir) / "run.json");
      tcfg = harness::TaskConfig::from_json(info.at("task"));
      cfg = harness::TrainConfig::from_json(info.at("train"));
      config["run"] = info;
      inputs["run.json"] = harness::file_hash(fs::path(run_dir) / "run.json");
    } else {
      tcfg = task.resolve();
      inputs = task.inputs();
    }
    const auto exp = harness::prepare_experiment(tcfg);
    if (!run_dir.empty()) {
      const json info = read_json(fs::path(run_dir) / "run.json");
      const std::string now = pools::hex64(exp->task.hash());
      if (info.at("task_hash").get<std::string>() != now) {
        throw ConfigError("run " + run_dir + " was trained on task " +
                          info.at("task_hash").get<std::string>() + " but the regenerated task " +
                          "hashes to " + now + "; retrain or use the matching build");
      }
    }

    std::unique_ptr<bias::ContextualBiasModel> model;
    if (cfg.variant != bias::Variant::none) {
      model = std::make_unique<bias::ContextualBiasModel>(
          exp->task.vocab.size(), cfg.encoder, harness::bias_config(cfg, exp->backbone->d_a()),
          cfg.seed);
      const fs::path ckpt = fs::path(run_dir) / "model.ckpt";
      num::load_checkpoint(model->parameters(), ckpt);
      inputs["model.ckpt"] = harness::file_hash(ckpt);
    }
    harness::EvalOptions opt;
    opt.B = B;
    opt.eval_seed = eval_seed;
    opt.attribution = attribution && model != nullptr;
    const auto report = harness::evaluate(*exp, model.get(), opt);

    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    const std::string label = harness::variant_label(cfg.variant, cfg.lambda);
    const std::string sampler =
        cfg.variant == bias::Variant::none ? "-" : sampling::to_string(cfg.sampler);
    write_report_csv(out, label, sampler, cfg.variant == bias::Variant::none ? 0.0 : cfg.lambda,
                     report);
    config["task"] = tcfg.to_json();
    config["B"] = B;
    config["attribution"] = opt.attribution;
    if (report.attribution) {
      config["attribution_pass_rate"] = report.attribution->pass_rate();
      config["attribution_utterances"] = report.attribution->utterances;
    }
    harness::write_manifest(out, "eval", config, {{"task", tcfg.seed}, {"eval", eval_seed}},
                            inputs);
    for (const auto& [name, r] : report.splits)
      std::printf("%-11s WER %.4f (%zu/%zu)\n", name.c_str(), r.wer, r.errors, r.words);
    if (report.attribution) {
      std::printf("attribution: %zu/%zu utterances with factor >= %.1f\n",
                  report.attribution->passing, report.attribution->utterances,
                  report.attribution->threshold);
    }
    return 0;
  }
};

// ---------------------------------------------------------------------------
// matrix

struct MatrixCmd {
  TaskOptions task;
  TrainOptions train;
  std::string out = default_out("matrix");

  void attach(CLI::App* app) {
    task.attach(app);
    train.attach(app, false);
    app->add_option("--out", out, "Output directory");
  }

  int run() const {
    const auto tcfg = task.resolve();
    const auto cfg = train.resolve(false);
    const auto exp = harness::prepare_experiment(tcfg);
    fs::create_directories(out);
    const auto result = harness::run_matrix(*exp, cfg, [](const harness::MatrixRow& r) {
      std::printf("%-14s %-3s rare WER %.4f\n", r.variant.c_str(), r.sampler.c_str(),
                  r.report.wer("test_rare"));
      std::fflush(stdout);
    });
    const fs::path csv = fs::path(out) / "matrix.csv";
    harness::write_matrix_csv(result, csv);
    harness::write_rwerr_csv(result, fs::path(out) / "rwerr.csv");
    harness::write_manifest(csv, "matrix",
                            {{"task", tcfg.to_json()},
                             {"train", cfg.to_json()},
                             {"rwerr_hash", harness::file_hash(fs::path(out) / "rwerr.csv")}},
                            seeds_of(tcfg, cfg), task.inputs());
    std::printf("%zu rows -> %s\n", result.rows.size(), csv.string().c_str());
    return 0;
  }
};

// ---------------------------------------------------------------------------
// svcca

struct SvccaCmd {
  std::vector<std::string> dumps;
  double keep = 0.99;
  double threshold = 0.9;
  std::string out = default_out("svcca");

  void attach(CLI::App* app) {
    app->add_option("--dumps", dumps, "Embedding dump files")->required();
    app->add_option("--keep", keep, "Variance kept by the SVD pruning");
    app->add_option("--threshold", threshold, "Correlation reported as converged");
    app->add_option("--out", out, "Output directory");
  }

  int run() const {
    std::map<std::string, std::vector<svcca::EmbeddingDump>> groups;
    std::map<std::string, std::string> inputs;
    for (const auto& path : dumps) {
      if (!fs::exists(path)) throw ConfigError("dump not found: " + path);
      auto d = svcca::load_dump(path);
      inputs[path] = harness::file_hash(path);
      groups[d.tag.model + "/" + d.tag.sampler].push_back(std::move(d));
    }
    fs::create_directories(out);
    const fs::path csv = fs::path(out) / "rho_curve.csv";
    std::ofstream os(csv);
    if (!os) throw Error("cannot write " + csv.string());
    os << "model,sampler,epoch,rho,dims_from,dims_to\n";
    std::vector<svcca::Series> series;
    json converged = json::object();
    for (auto& [name, list] : groups) {
      std::sort(list.begin(), list.end(),
                [](const auto& a, const auto& b) { return a.tag.epoch < b.tag.epoch; });
      const auto curve = svcca::epoch_correlation_curve(list, keep);
      svcca::Series s{name, {}, {}};
      for (const auto& p : curve) {
        os << p.from.model << ',' << p.from.sampler << ',' << p.from.epoch << ','
           << std::setprecision(10) << p.rho << ',' << p.dims_from << ',' << p.dims_to << '\n';
        s.x.push_back(static_cast<double>(p.from.epoch));
        s.y.push_back(p.rho);
      }
      series.push_back(std::move(s));
      const auto first = svcca::first_epoch_reaching(curve, threshold);
      converged[name] = first ? json(*first) : json(nullptr);
      std::printf("%-20s first epoch with rho >= %.2f: %s\n", name.c_str(), threshold,
                  first ? std::to_string(*first).c_str() : "never");
    }
    os.close();
    const fs::path svg = fs::path(out) / "rho_curve.svg";
    svcca::write_line_chart(series, "Epoch-to-epoch SVCCA of the bias embedding", "epoch",
                            "mean canonical correlation", svg);
    harness::write_manifest(csv, "svcca",
                            {{"keep", keep},
                             {"threshold", threshold},
                             {"first_epoch_reaching", converged},
                             {"svg_hash", harness::file_hash(svg)}},
                            json::object(), inputs);
    return 0;
  }
};

// ---------------------------------------------------------------------------
// sweep

struct SweepCmd {
  TaskOptions task;
  TrainOptions train;
  std::string probs = "1.0,0.9,0.8,0.7,0.5,0.3";
  std::string out = default_out("sweep");

  void attach(CLI::App* app) {
    task.attach(app);
    train.attach(app, false);
    app->add_option("--probs", probs, "Comma-separated retention probabilities");
    app->add_option("--out", out, "Output directory");
  }

  int run() const {
    const auto tcfg = task.resolve();
    const auto cfg = train.resolve(false);
    const auto p = parse_probs(probs);
    const auto exp = harness::prepare_experiment(tcfg);
    fs::create_directories(out);
    const auto rows = harness::retention_sweep(*exp, cfg, p, [](const harness::SweepRow& r) {
      std::printf("p=%.2f rare WER %.4f\n", r.retention, r.rare_wer);
      std::fflush(stdout);
    });
    const fs::path csv = fs::path(out) / "sweep.csv";
    harness::write_sweep_csv(rows, csv);
    harness::write_manifest(csv, "sweep",
                            {{"task", tcfg.to_json()}, {"train", cfg.to_json()}, {"probs", p}},
                            seeds_of(tcfg, cfg), task.inputs());
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locality-enhanced contextual biasing toolkit"};
  app.set_version_flag("--version", std::string(harness::kToolVersion));
  app.require_subcommand(1);

  PoolsCmd pools_cmd;
  SampleCmd sample_cmd;
  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  MatrixCmd matrix_cmd;
  SvccaCmd svcca_cmd;
  SweepCmd sweep_cmd;
  pools_cmd.attach(app.add_subcommand("pools", "Build the n-gram and entity-n-gram pools"));
  sample_cmd.attach(app.add_subcommand("sample", "Write context batches for a corpus"));
  train_cmd.attach(app.add_subcommand("train", "Train a biasing module on the synthetic task"));
  eval_cmd.attach(app.add_subcommand("eval", "Evaluate a trained run (or none) with SMd"));
  matrix_cmd.attach(app.add_subcommand("matrix", "Train and evaluate the variant x sampler grid"));
  svcca_cmd.attach(app.add_subcommand("svcca", "Epoch-to-epoch SVCCA curves from dumps"));
  sweep_cmd.attach(app.add_subcommand("sweep", "Rare-word WER across retention probabilities"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand("pools")) return pools_cmd.run();
    if (app.got_subcommand("sample")) return sample_cmd.run();
    if (app.got_subcommand("train")) return train_cmd.run();
    if (app.got_subcommand("eval")) return eval_cmd.run();
    if (app.got_subcommand("matrix")) return matrix_cmd.run();
    if (app.got_subcommand("svcca")) return svcca_cmd.run();
    if (app.got_subcommand("sweep")) return sweep_cmd.run();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
