#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "lecb/error.hpp"
#include "lecb/harness.hpp"

namespace lecb::harness {

using num::Rng;
using num::Tape;
using num::Tensor;
using num::Var;

const Tensor& Experiment::X(const std::string& utterance_id) const {
  auto it = encoded.find(utterance_id);
  if (it == encoded.end()) throw Error("no encoded features for utterance " + utterance_id);
  return it->second;
}

std::unique_ptr<Experiment> prepare_experiment(const TaskConfig& cfg, std::size_t n_max) {
  auto exp = std::make_unique<Experiment>();
  exp->task = generate_task(cfg);
  exp->n_max = n_max;
  exp->backbone = std::make_unique<FrozenBackbone>(exp->task);
  exp->detector = std::make_unique<pools::FrequencyEntityDetector>(
      exp->task.train, cfg.rare_threshold, cfg.min_entity_len);
  exp->pool = pools::build_ngram_pool(exp->task.train, n_max);
  exp->entity_map = pools::build_entity_map(exp->task.train, *exp->detector, n_max);
  for (const auto* c : {&exp->task.train, &exp->task.dev, &exp->task.test_clean,
                        &exp->task.test_rare, &exp->task.test_ood}) {
    for (const auto& u : c->utterances) exp->encoded[u.id] = exp->backbone->encode(*u.features);
  }
  return exp;
}

void TrainConfig::validate() const {
  if (B < 1) throw ConfigError("train: B must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must lie in (0,1]");
  if (!(retention >= 0.0 && retention <= 1.0)) throw ConfigError("train: retention must lie in [0,1]");
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
  encoder.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"variant", bias::to_string(variant)},
          {"sampler", sampling::to_string(sampler)},
          {"lambda", lambda},
          {"B", B},
          {"window", window},
          {"heads", heads},
          {"na_heads", na_heads},
          {"encoder",
           {{"layers", encoder.layers},
            {"d", encoder.d},
            {"heads", encoder.heads},
            {"ff", encoder.ff},
            {"l", encoder.l},
            {"dropout", encoder.dropout},
            {"ln_eps", encoder.ln_eps}}},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"lr_decay", lr_decay},
          {"beta1", beta1},
          {"beta2", beta2},
          {"adam_eps", adam_eps},
          {"clip_norm", clip_norm},
          {"retention", retention},
          {"seed", seed},
          {"eval_seed", eval_seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  const nlohmann::json known = c.to_json();
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("train config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("variant")) c.variant = bias::parse_variant(j.at("variant").get<std::string>());
    if (j.contains("sampler")) c.sampler = sampling::parse_method(j.at("sampler").get<std::string>());
#define LECB_FIELD(name) \
  if (j.contains(#name)) j.at(#name).get_to(c.name)
    LECB_FIELD(lambda);
    LECB_FIELD(B);
    LECB_FIELD(window);
    LECB_FIELD(heads);
    LECB_FIELD(na_heads);
    LECB_FIELD(epochs);
    LECB_FIELD(batch_size);
    LECB_FIELD(lr);
    LECB_FIELD(lr_decay);
    LECB_FIELD(beta1);
    LECB_FIELD(beta2);
    LECB_FIELD(adam_eps);
    LECB_FIELD(clip_norm);
    LECB_FIELD(retention);
    LECB_FIELD(seed);
    LECB_FIELD(eval_seed);
#undef LECB_FIELD
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      for (const auto& [key, value] : e.items()) {
        if (!known.at("encoder").contains(key))
          throw ConfigError("train config: unknown encoder key '" + key + "'");
      }
      if (e.contains("layers")) e.at("layers").get_to(c.encoder.layers);
      if (e.contains("d")) e.at("d").get_to(c.encoder.d);
      if (e.contains("heads")) e.at("heads").get_to(c.encoder.heads);
      if (e.contains("ff")) e.at("ff").get_to(c.encoder.ff);
      if (e.contains("l")) e.at("l").get_to(c.encoder.l);
      if (e.contains("dropout")) e.at("dropout").get_to(c.encoder.dropout);
      if (e.contains("ln_eps")) e.at("ln_eps").get_to(c.encoder.ln_eps);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

bias::BiasConfig bias_config(const TrainConfig& cfg, std::size_t d_a) {
  bias::BiasConfig b;
  b.variant = cfg.variant;
  b.lambda = cfg.lambda;
  b.window = cfg.window;
  b.heads = cfg.heads;
  b.na_heads = cfg.na_heads;
  b.d = cfg.encoder.d;
  b.d_a = d_a;
  return b;
}

double EvalReport::wer(const std::string& split) const {
  auto it = splits.find(split);
  if (it == splits.end()) throw Error("evaluation has no split '" + split + "'");
  return it->second.wer;
}

namespace {

sampling::Sampler make_sampler(const Experiment& exp, std::size_t B, std::size_t l,
                               double retention, std::uint64_t seed) {
  sampling::SamplerConfig sc;
  sc.B = B;
  sc.n_max = exp.n_max;
  sc.max_tokens = l;
  sc.retention = retention;
  sc.seed = seed;
  return sampling::Sampler(exp.pool, exp.entity_map, *exp.detector, exp.task.vocab, sc);
}

std::size_t model_l(const bias::ContextualBiasModel* model) {
  return model != nullptr ? model->encoder_config().l : 8;
}

}  // namespace

EvalReport evaluate(const Experiment& exp, const bias::ContextualBiasModel* model,
                    const EvalOptions& opt) {
  const auto sampler = make_sampler(exp, opt.B, model_l(model), 1.0, opt.eval_seed);
  const std::set<std::string> rare(exp.task.rare_words.begin(), exp.task.rare_words.end());
  EvalReport report;
  for (const auto& name : opt.splits) {
    const pools::Corpus& corpus = exp.task.split(name);
    if (corpus.empty()) throw ConfigError("evaluate: split '" + name + "' is empty");
    SplitResult sr;
    sr.split = name;
    const bool attribute = opt.attribution && name == "test_rare";
    AttributionStats stats;
    stats.threshold = opt.attribution_threshold;
    for (const auto& u : corpus.utterances) {
      const Tensor& x = exp.X(u.id);
      Tensor logits;
      if (model == nullptr || model->config().variant == bias::Variant::none) {
        logits = exp.backbone->logits(x);
      } else {
        const auto batch =
            sampler.sample_smd(u, sampling::utterance_seed(opt.eval_seed, u.id));
        Tape tape;
        auto out = model->forward(tape, tape.constant(x), batch);
        logits = exp.backbone->logits(out.H.value());
        if (attribute && out.attention_weights) {
          const Alignment& al = exp.task.alignment(u.id);
          const std::size_t l = model->encoder_config().l;
          const double keys = static_cast<double>(batch.size() * l);
          double factor_sum = 0.0;
          std::size_t found = 0;
          for (std::size_t w = 0; w < u.words.size(); ++w) {
            if (!rare.count(u.words[w])) continue;
            std::size_t p = batch.size();
            for (std::size_t i = 0; i < batch.size(); ++i)
              if (batch.phrases[i].positive() && batch.phrases[i].words == u.words[w]) p = i;
            if (p == batch.size()) continue;
            const std::size_t k_eff = batch.phrases[p].tokens.size();
            double mass = 0.0;
            std::size_t frames = 0;
            for (std::size_t f = 0; f < al.word_index.size(); ++f) {
              if (al.word_index[f] != static_cast<long>(w)) continue;
              for (const Tensor& W : *out.attention_weights) {
                for (std::size_t r = p * l; r < p * l + k_eff; ++r) mass += W(f, r);
              }
              ++frames;
            }
            mass /= static_cast<double>(frames * out.attention_weights->size());
            factor_sum += mass / (static_cast<double>(k_eff) / keys);
            ++found;
          }
          if (found > 0) {
            const double factor = factor_sum / static_cast<double>(found);
            stats.factors.push_back(factor);
            ++stats.utterances;
            if (factor >= stats.threshold) ++stats.passing;
          }
        }
      }
      const auto hyp = greedy_decode(logits, exp.task.vocab);
      sr.errors += edit_distance(u.words, hyp);
      sr.words += u.words.size();
      ++sr.utterances;
    }
    sr.wer = static_cast<double>(sr.errors) / static_cast<double>(sr.words);
    report.splits[name] = sr;
    if (attribute) report.attribution = stats;
  }
  return report;
}

svcca::EmbeddingDump dump_embeddings(const Experiment& exp, const bias::ContextualBiasModel& model,
                                     const svcca::EmbeddingTag& tag, std::size_t B,
                                     std::uint64_t seed, bool combined) {
  if (model.config().variant == bias::Variant::none) {
    throw ConfigError("dump_embeddings: variant none has no bias embedding");
  }
  const auto sampler = make_sampler(exp, B, model.encoder_config().l, 1.0, seed);
  std::vector<double> rows;
  std::size_t n = 0, cols = 0;
  std::string ids;
  for (const auto& u : exp.task.probe.utterances) {
    const auto batch = sampler.sample_smd(u, sampling::utterance_seed(seed, u.id));
    Tape tape;
    auto out = model.forward(tape, tape.constant(exp.X(u.id)), batch);
    const Tensor& h = combined ? out.H.value() : out.H_cb->value();
    rows.insert(rows.end(), h.values().begin(), h.values().end());
    n += h.rows();
    cols = h.cols();
    ids += u.id + ",";
  }
  svcca::EmbeddingDump d;
  d.tag = tag;
  d.matrix = Tensor(n, cols, std::move(rows));
  d.probe_hash = pools::hex64(pools::fnv1a(ids + "B=" + std::to_string(B) + ";seed=" +
                                           std::to_string(seed) + (combined ? ";H" : ";H_cb")));
  return d;
}

namespace {

struct Adam {
  std::vector<num::Parameter*> params;
  std::vector<Tensor> m, v;
  std::size_t t = 0;

  explicit Adam(std::vector<num::Parameter*> ps) : params(std::move(ps)) {
    for (auto* p : params) {
      m.emplace_back(p->value.rows(), p->value.cols());
      v.emplace_back(p->value.rows(), p->value.cols());
    }
  }

  void step(double lr, double b1, double b2, double eps) {
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& val = params[i]->value.values();
      const auto& g = params[i]->grad.values();
      auto& mi = m[i].values();
      auto& vi = v[i].values();
      for (std::size_t k = 0; k < val.size(); ++k) {
        mi[k] = b1 * mi[k] + (1 - b1) * g[k];
        vi[k] = b2 * vi[k] + (1 - b2) * g[k] * g[k];
        val[k] -= lr * (mi[k] / c1) / (std::sqrt(vi[k] / c2) + eps);
      }
    }
  }
};

double grad_norm(const std::vector<num::Parameter*>& ps) {
  double s = 0.0;
  for (const auto* p : ps)
    for (double g : p->grad.values()) s += g * g;
  return std::sqrt(s);
}

}  // namespace

TrainRun train_cb(const Experiment& exp, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  TrainRun run;
  run.cfg = cfg;
  run.backbone_checksum_before = exp.backbone->checksum();
  run.model = std::make_unique<bias::ContextualBiasModel>(
      exp.task.vocab.size(), cfg.encoder, bias_config(cfg, exp.backbone->d_a()), cfg.seed);
  auto& model = *run.model;
  const std::string model_tag = variant_label(cfg.variant, cfg.lambda);
  const std::string sampler_tag = sampling::to_string(cfg.sampler);

  EvalOptions dev_opt;
  dev_opt.splits = {"dev"};
  dev_opt.B = cfg.B;
  dev_opt.eval_seed = cfg.eval_seed;

  auto record = [&](std::size_t epoch, double loss, double seconds) {
    EpochMetrics em;
    em.epoch = epoch;
    em.loss = loss;
    em.seconds = seconds;
    if (cfg.eval_each_epoch || epoch == cfg.epochs) {
      em.dev_wer = evaluate(exp, &model, dev_opt).wer("dev");
    }
    if (cfg.dump_embeddings && cfg.variant != bias::Variant::none) {
      run.dumps.push_back(
          dump_embeddings(exp, model, {model_tag, sampler_tag, epoch}, cfg.B, cfg.eval_seed));
    }
    run.epochs.push_back(em);
    if (cfg.verbose) {
      std::fprintf(stderr, "[%s/%s] epoch %zu loss %.4f dev WER %.4f (%.1fs)\n", model_tag.c_str(),
                   sampler_tag.c_str(), epoch, loss, em.dev_wer, seconds);
    }
    if (on_epoch) on_epoch(em);
  };

  if (cfg.variant == bias::Variant::none) {
    const double w = evaluate(exp, nullptr, dev_opt).wer("dev");
    for (std::size_t e = 0; e <= cfg.epochs; ++e) {
      EpochMetrics em;
      em.epoch = e;
      em.dev_wer = w;
      run.epochs.push_back(em);
      if (on_epoch) on_epoch(em);
    }
    run.backbone_checksum_after = exp.backbone->checksum();
    return run;
  }

  record(0, 0.0, 0.0);
  auto params = model.active_parameters();
  Adam adam(params);
  const auto sampler = make_sampler(exp, cfg.B, cfg.encoder.l, cfg.retention, cfg.seed);
  const auto& train = exp.task.train.utterances;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = clock::now();
    Rng rng(Rng::combine(cfg.seed, epoch));
    rng.shuffle(std::span<std::size_t>(order));
    const double lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch - 1));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      model.parameters().zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const pools::Utterance& u = train[order[i]];
        const std::uint64_t useed = sampling::utterance_seed(cfg.seed, u.id, epoch);
        const auto batch = sampler.sample(cfg.sampler, u, useed);
        Tape tape;
        auto out = model.forward(tape, tape.constant(exp.X(u.id)), batch, Rng::mix(useed), true);
        Var ce = num::cross_entropy(exp.backbone->logits(tape, out.H),
                                    exp.task.alignment(u.id).labels);
        const double l = ce.value()[0];
        if (!std::isfinite(l)) {
          throw NumericError("train_cb: non-finite loss at epoch " + std::to_string(epoch) +
                             ", utterance " + u.id + " (" + model_tag + "/" + sampler_tag +
                             ", lr " + std::to_string(lr) + ")");
        }
        loss_sum += l;
        tape.backward(num::scale(ce, 1.0 / static_cast<double>(end - start)));
      }
      const double norm = grad_norm(params);
      if (!std::isfinite(norm)) {
        throw NumericError("train_cb: non-finite gradient norm at epoch " + std::to_string(epoch));
      }
      if (norm > cfg.clip_norm) {
        for (auto* p : params)
          for (double& g : p->grad.values()) g *= cfg.clip_norm / norm;
      }
      adam.step(lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
    }
    if (!exp.backbone->grads_zero()) throw Error("train_cb: backbone received gradients");
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    record(epoch, loss_sum / static_cast<double>(train.size()), secs);
  }
  run.backbone_checksum_after = exp.backbone->checksum();
  if (run.backbone_checksum_after != run.backbone_checksum_before) {
    throw Error("train_cb: frozen backbone changed during training");
  }
  return run;
}

}  // namespace lecb::harness
