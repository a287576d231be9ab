#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

#include <gtest/gtest.h>

#include "lecb/error.hpp"
#include "lecb/harness.hpp"

using namespace lecb;
using namespace lecb::harness;

namespace {

std::vector<std::string> words(const std::string& s) { return tok::split_words(s); }

/// Independent recursive edit distance with memoisation.
std::size_t dp_oracle(const std::vector<std::string>& r, const std::vector<std::string>& h) {
  std::vector<std::vector<long>> memo(r.size() + 1, std::vector<long>(h.size() + 1, -1));
  std::function<long(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> long {
    if (i == r.size()) return static_cast<long>(h.size() - j);
    if (j == h.size()) return static_cast<long>(r.size() - i);
    long& m = memo[i][j];
    if (m >= 0) return m;
    m = std::min({go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (r[i] != h[j])});
    return m;
  };
  return static_cast<std::size_t>(go(0, 0));
}

TaskConfig tiny_task() {
  TaskConfig c;
  c.common_words = 24;
  c.rare_words = 6;
  c.vocab_target = 30;
  c.pretrain_sentences = 200;
  c.train_common = 16;
  c.rare_train_occurrences = 2;
  c.dev_utterances = 6;
  c.test_clean = 4;
  c.test_ood = 4;
  c.probe_size = 8;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.encoder = {1, 8, 2, 16, 8, 0.0, 1e-5};
  t.heads = 2;
  t.epochs = 1;
  return t;
}

}  // namespace

TEST(Wer, TrivialCases) {
  EXPECT_EQ(wer(words("a b c"), words("a b c")), 0.0);
  EXPECT_EQ(wer(words("a b c"), words("x y z")), 1.0);
  EXPECT_DOUBLE_EQ(wer(words("a b c"), words("a x c")), 1.0 / 3.0);
  EXPECT_EQ(wer(words("a"), words("a b")), 1.0);
  EXPECT_THROW(wer({}, words("a")), ConfigError);
  const auto e = edit_counts(words("a b c d"), words("a x c"));
  EXPECT_EQ(e.substitutions, 1u);
  EXPECT_EQ(e.deletions, 1u);
  EXPECT_EQ(e.insertions, 0u);
}

TEST(Wer, RandomPairsMatchOracle) {
  num::Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> r, h;
    for (std::size_t k = 0, n = 1 + rng.below(8); k < n; ++k) r.push_back(std::string(1, 'a' + rng.below(4)));
    for (std::size_t k = 0, n = rng.below(8); k < n; ++k) h.push_back(std::string(1, 'a' + rng.below(4)));
    EXPECT_EQ(edit_distance(r, h), dp_oracle(r, h));
    EXPECT_EQ(edit_counts(r, h).total(), dp_oracle(r, h));
  }
}

TEST(Decode, CollapseAndBlanks) {
  const auto vocab = tok::build_vocab({"ab"}, 2);  // [PAD] [UNK] a b
  const auto a = vocab.id_of("a"), b = vocab.id_of("b");
  const std::vector<long> path{0, a, a, b, 0, 0, b, b, 0, a};
  num::Tensor logits(path.size(), vocab.size());
  for (std::size_t r = 0; r < path.size(); ++r) logits(r, static_cast<std::size_t>(path[r])) = 1.0;
  EXPECT_EQ(greedy_decode(logits, vocab), (std::vector<std::string>{"ab", "b", "a"}));
}

TEST(Task, DeterministicAndWellFormed) {
  const auto a = generate_task(tiny_task());
  const auto b = generate_task(tiny_task());
  EXPECT_EQ(a.hash(), b.hash());
  auto other = tiny_task();
  other.seed = 5;
  EXPECT_NE(generate_task(other).hash(), a.hash());

  std::map<std::string, std::size_t> train_counts;
  for (const auto& u : a.train.utterances) {
    std::set<std::string> seen(u.words.begin(), u.words.end());
    for (const auto& w : seen) ++train_counts[w];
  }
  for (const auto& r : a.rare_words) {
    EXPECT_LE(train_counts[r], a.cfg.rare_threshold) << r;
    ASSERT_TRUE(a.confusable.count(r));
    const auto& c = a.confusable.at(r);
    EXPECT_EQ(tok::tokenize(r, a.vocab).size(), tok::tokenize(c, a.vocab).size());
  }
  for (const auto& u : a.test_rare.utterances) {
    const auto& al = a.alignment(u.id);
    EXPECT_EQ(al.labels.size(), u.features->rows());
  }
  EXPECT_THROW(a.split("nope"), ConfigError);
}

TEST(Task, ZeroShotKeepsTestRareWordsOutOfTraining) {
  auto cfg = tiny_task();
  cfg.zero_shot = true;
  const auto t = generate_task(cfg);
  std::set<std::string> train_words;
  for (const auto& u : t.train.utterances) train_words.insert(u.words.begin(), u.words.end());
  std::set<std::string> rare(t.rare_words.begin(), t.rare_words.end());
  std::size_t checked = 0;
  for (const auto& u : t.test_rare.utterances)
    for (const auto& w : u.words)
      if (rare.count(w)) {
        EXPECT_FALSE(train_words.count(w)) << w;
        ++checked;
      }
  EXPECT_GT(checked, 0u);
}

TEST(Backbone, ConfusesRareWordsWithPartners) {
  const auto exp = prepare_experiment(TaskConfig{});
  const auto& task = exp->task;
  std::set<std::string> rare(task.rare_words.begin(), task.rare_words.end());
  std::size_t rare_frames = 0, rare_ok = 0, common_frames = 0, common_ok = 0;
  for (const auto& u : task.test_rare.utterances) {
    const auto logits = exp->backbone->logits(exp->X(u.id));
    const auto& al = task.alignment(u.id);
    for (std::size_t f = 0; f < al.labels.size(); ++f) {
      if (al.word_index[f] < 0) continue;
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.cols(); ++c)
        if (logits(f, c) > logits(f, best)) best = c;
      const bool ok = static_cast<long>(best) == al.labels[f];
      if (rare.count(u.words[static_cast<std::size_t>(al.word_index[f])])) {
        ++rare_frames;
        rare_ok += ok;
      } else {
        ++common_frames;
        common_ok += ok;
      }
    }
  }
  EXPECT_LT(static_cast<double>(rare_ok) / rare_frames, 0.3);
  EXPECT_GT(static_cast<double>(common_ok) / common_frames, 0.95);
  EXPECT_GE(task.rare_words.size(), 40u);
}

TEST(Training, ResidualStartAndFrozenBackbone) {
  const auto exp = prepare_experiment(tiny_task());
  EvalOptions opt;
  const auto none = evaluate(*exp, nullptr, opt);
  for (auto v : {bias::Variant::none, bias::Variant::baseline_nam, bias::Variant::lecb_v2}) {
    auto cfg = tiny_train();
    cfg.variant = v;
    const auto run = train_cb(*exp, cfg);
    ASSERT_EQ(run.epochs.size(), 2u);
    EXPECT_EQ(run.epochs[0].dev_wer, none.wer("dev")) << bias::to_string(v);
    EXPECT_EQ(run.backbone_checksum_before, run.backbone_checksum_after);
    EXPECT_TRUE(exp->backbone->grads_zero());
    if (v == bias::Variant::none) EXPECT_EQ(run.epochs[1].dev_wer, none.wer("dev"));
    else EXPECT_EQ(run.dumps.size(), 2u);
  }
}

TEST(Training, Deterministic) {
  const auto exp = prepare_experiment(tiny_task());
  const auto a = train_cb(*exp, tiny_train());
  const auto b = train_cb(*exp, tiny_train());
  EXPECT_EQ(a.epochs[1].loss, b.epochs[1].loss);
  EXPECT_EQ(a.model->parameters().checksum(), b.model->parameters().checksum());
}

TEST(Grid, Layout) {
  EXPECT_EQ(matrix_variants().size(), 5u);
  EXPECT_EQ(variant_label(bias::Variant::lecb_v1, 0.5), "lecb_v1@0.5");
  EXPECT_EQ(variant_label(bias::Variant::baseline_nam, 1.0), "baseline_nam");
  EXPECT_DOUBLE_EQ(relative_wer_reduction(0.2, 0.15), 0.25);
  EXPECT_EQ(relative_wer_reduction(0.0, 0.1), 0.0);
}

TEST(Manifest, WrittenNextToResult) {
  const auto dir = std::filesystem::temp_directory_path() / "lecb_test_manifest";
  std::filesystem::create_directories(dir);
  const auto result = dir / "out.csv";
  std::ofstream(result) << "x\n";
  write_manifest(result, "train", {{"a", 1}}, {{"seed", 7}}, {{"corpus", "abc"}});
  std::ifstream is(dir / "out.csv.manifest.json");
  const auto m = nlohmann::json::parse(is);
  EXPECT_EQ(m["subcommand"], "train");
  EXPECT_EQ(m["seeds"]["seed"], 7);
  EXPECT_EQ(m["inputs"]["corpus"], "abc");
  EXPECT_EQ(m["result_hash"], file_hash(result));
  std::filesystem::remove_all(dir);
}

TEST(Config, JsonRoundTrip) {
  auto t = tiny_task();
  t.noise = 0.41;
  EXPECT_EQ(TaskConfig::from_json(t.to_json()).to_json(), t.to_json());
  EXPECT_THROW(TaskConfig::from_json({{"nosie", 1.0}}), ConfigError);
  auto c = tiny_train();
  c.variant = bias::Variant::cb_c;
  c.lr = 0.01;
  EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(TrainConfig::from_json({{"epochs", "many"}}), ConfigError);
}
