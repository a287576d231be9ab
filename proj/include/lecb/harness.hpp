#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lecb/biasing.hpp"
#include "lecb/context_encoder.hpp"
#include "lecb/numerics/parameter.hpp"
#include "lecb/pools.hpp"
#include "lecb/sampling.hpp"
#include "lecb/svcca.hpp"
#include "lecb/tokenizer.hpp"

namespace lecb::harness {

inline constexpr const char* kToolVersion = "lecb 0.1.0";

// ---------------------------------------------------------------------------
// Word error rate

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t total() const { return substitutions + deletions + insertions; }
};

/// Unit-cost Levenshtein alignment of word sequences.
EditCounts edit_counts(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
std::size_t edit_distance(const std::vector<std::string>& ref,
                          const std::vector<std::string>& hyp);
/// edit distance / |ref|. Throws ConfigError for an empty reference.
double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

// ---------------------------------------------------------------------------
// Synthetic task

struct TaskConfig {
  std::size_t alphabet = 10;        // letters 'a'.. used by every word
  std::size_t common_words = 60;
  std::size_t rare_words = 48;
  std::size_t vocab_target = 56;    // non-special subword pieces
  std::size_t pretrain_sentences = 1500;
  std::size_t train_common = 160;   // training utterances without rare words
  std::size_t rare_train_occurrences = 4;
  std::size_t dev_utterances = 48;
  std::size_t test_clean = 40;
  std::size_t test_rare_per_word = 1;
  std::size_t test_ood = 40;
  std::size_t min_words = 3;
  std::size_t max_words = 6;
  std::size_t frames_per_token = 3;
  std::size_t blank_frames = 2;
  std::size_t coarse_dims = 16;
  std::size_t fine_dims = 16;
  double coarse_scale = 2.0;
  double fine_scale = 1.8;
  double noise = 0.35;
  double ood_noise = 0.45;
  double ood_shift = 0.1;
  double logit_temperature = 1.0;   // divides every frozen classifier logit
  std::size_t rare_threshold = 4;   // entity detector threshold
  std::size_t min_entity_len = 3;
  std::size_t probe_size = 64;
  bool zero_shot = false;           // keep rare test words out of training
  std::uint64_t seed = 1234;

  std::size_t feature_dims() const { return coarse_dims + fine_dims; }
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are a ConfigError.
  static TaskConfig from_json(const nlohmann::json& j);
};

/// Frame labels and word alignment of a rendered utterance.
struct Alignment {
  std::vector<long> labels;      // token id per frame, 0 for blank
  std::vector<long> word_index;  // word per frame, -1 for blank
};

struct SyntheticTask {
  TaskConfig cfg;
  tok::SubwordVocab vocab;
  std::vector<std::string> common_words;
  std::vector<std::string> rare_words;
  std::map<std::string, std::string> confusable;  // rare -> common partner
  num::Tensor coarse;  // vocab x coarse_dims prototypes
  num::Tensor fine;    // vocab x fine_dims signatures
  std::vector<std::string> pretrain_text;
  pools::Corpus train, dev, test_clean, test_rare, test_ood, probe;
  std::unordered_map<std::string, Alignment> alignments;

  const pools::Corpus& split(const std::string& name) const;
  const Alignment& alignment(const std::string& utterance_id) const;
  /// FNV-1a over the serialized splits and features.
  std::uint64_t hash() const;
};

/// Renders `words` as frames: every token of a word contributes
/// frames_per_token frames of [coarse, fine] plus Gaussian noise, with blank
/// frames around words. Rare words borrow the coarse part of their partner.
std::pair<num::Tensor, Alignment> render(const SyntheticTask& task,
                                         const std::vector<std::string>& words, double noise,
                                         double shift, num::Rng& rng);

SyntheticTask generate_task(const TaskConfig& cfg);

// ---------------------------------------------------------------------------
// Frozen backbone

/// Fixed orthogonal feature encoder plus a closed-form linear frame
/// classifier over the subword vocabulary (blank = id 0).
class FrozenBackbone {
 public:
  explicit FrozenBackbone(const SyntheticTask& task);

  std::size_t d_a() const { return d_a_; }
  num::Tensor encode(const num::Tensor& features) const;
  num::Var logits(num::Tape& tape, num::Var H) const;
  num::Tensor logits(const num::Tensor& H) const;
  std::uint64_t checksum() const { return store_.checksum(); }
  const num::ParameterStore& parameters() const { return store_; }
  /// Every backbone gradient buffer is exactly zero.
  bool grads_zero() const;

 private:
  std::size_t d_a_;
  mutable num::ParameterStore store_;
  num::Parameter* rotation_;
  num::Parameter* weight_;
  num::Parameter* bias_;
};

/// Frame argmax, repeat collapse, blank removal; tokens between blanks form a word.
std::vector<std::string> greedy_decode(const num::Tensor& logits, const tok::SubwordVocab& vocab);

// ---------------------------------------------------------------------------
// Experiment state shared by training runs

struct Experiment {
  SyntheticTask task;
  std::unique_ptr<FrozenBackbone> backbone;
  std::unique_ptr<pools::FrequencyEntityDetector> detector;
  pools::NGramPool pool;
  pools::EntityNGramMap entity_map;
  std::size_t n_max = 3;
  std::unordered_map<std::string, num::Tensor> encoded;  // backbone output per utterance

  const num::Tensor& X(const std::string& utterance_id) const;
};

std::unique_ptr<Experiment> prepare_experiment(const TaskConfig& cfg, std::size_t n_max = 3);

// ---------------------------------------------------------------------------
// Training and evaluation

struct TrainConfig {
  bias::Variant variant = bias::Variant::lecb_v2;
  sampling::Method sampler = sampling::Method::smb;
  double lambda = 1.0;
  std::size_t B = 10;
  std::size_t window = 3;
  std::size_t heads = 1;
  std::size_t na_heads = 0;
  encoder::EncoderConfig encoder{5, 32, 4, 64, 8, 0.0, 1e-5};
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr = 4e-3;
  double lr_decay = 0.92;  // per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  double retention = 1.0;
  std::uint64_t seed = 7;
  std::uint64_t eval_seed = 99;
  bool eval_each_epoch = true;
  bool dump_embeddings = true;
  bool verbose = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct SplitResult {
  std::string split;
  double wer = 0.0;
  std::size_t errors = 0;
  std::size_t words = 0;
  std::size_t utterances = 0;
};

struct AttributionStats {
  std::size_t utterances = 0;
  std::size_t passing = 0;  // factor >= threshold
  double threshold = 5.0;
  std::vector<double> factors;
  double pass_rate() const { return utterances ? double(passing) / double(utterances) : 0.0; }
};

struct EvalReport {
  std::map<std::string, SplitResult> splits;
  std::optional<AttributionStats> attribution;
  double wer(const std::string& split) const;
};

struct EvalOptions {
  std::vector<std::string> splits{"dev", "test_clean", "test_rare", "test_ood"};
  std::size_t B = 10;
  std::uint64_t eval_seed = 99;
  bool attribution = false;
  double attribution_threshold = 5.0;
};

/// Greedy-decoded WER under SMd context batches. `model == nullptr` is the
/// backbone alone (variant none).
EvalReport evaluate(const Experiment& exp, const bias::ContextualBiasModel* model,
                    const EvalOptions& opt);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;     // mean training loss over the epoch (0 for epoch 0)
  double dev_wer = 0.0;
  double seconds = 0.0;
};

struct TrainRun {
  TrainConfig cfg;
  std::vector<EpochMetrics> epochs;
  std::vector<svcca::EmbeddingDump> dumps;  // epoch 0 .. epochs
  std::unique_ptr<bias::ContextualBiasModel> model;
  std::uint64_t backbone_checksum_before = 0;
  std::uint64_t backbone_checksum_after = 0;
};

bias::BiasConfig bias_config(const TrainConfig& cfg, std::size_t d_a);

/// Trains only the CB parameters through the frozen classifier with
/// frame-level cross-entropy and Adam. Throws NumericError on a non-finite loss
/// and Error when the backbone changes or receives gradients.
TrainRun train_cb(const Experiment& exp, const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// H_cb rows over the probe set with fixed SMd batches.
svcca::EmbeddingDump dump_embeddings(const Experiment& exp, const bias::ContextualBiasModel& model,
                                     const svcca::EmbeddingTag& tag, std::size_t B,
                                     std::uint64_t seed, bool combined = false);

// ---------------------------------------------------------------------------
// Experiment grid and retention sweep

struct MatrixRow {
  std::string variant;
  std::string sampler;
  double lambda = 0.0;
  EvalReport report;
};

struct MatrixResult {
  std::vector<MatrixRow> rows;
  /// variant label -> split -> mean relative WER reduction against baseline_nam.
  std::map<std::string, std::map<std::string, double>> rwerr;
};

/// Grid entries as (variant, lambda) pairs in table order.
std::vector<std::pair<bias::Variant, double>> matrix_variants();
std::string variant_label(bias::Variant v, double lambda);

MatrixResult run_matrix(const Experiment& exp, const TrainConfig& base,
                        const std::function<void(const MatrixRow&)>& on_row = {});
void write_matrix_csv(const MatrixResult& result, const std::filesystem::path& path);
void write_rwerr_csv(const MatrixResult& result, const std::filesystem::path& path);

/// (WER_base - WER) / WER_base; 0 when the baseline is already 0.
double relative_wer_reduction(double base, double wer);

struct SweepRow {
  double retention = 1.0;
  double rare_wer = 0.0;
  EvalReport report;
};

std::vector<SweepRow> retention_sweep(const Experiment& exp, const TrainConfig& base,
                                      const std::vector<double>& probs,
                                      const std::function<void(const SweepRow&)>& on_row = {});
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Manifests

/// Writes `<result>.manifest.json` next to a result file.
void write_manifest(const std::filesystem::path& result, const std::string& subcommand,
                    const nlohmann::json& config, const nlohmann::json& seeds,
                    const std::map<std::string, std::string>& input_hashes);
std::string file_hash(const std::filesystem::path& path);

}  // namespace lecb::harness
