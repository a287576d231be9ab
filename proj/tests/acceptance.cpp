// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Training artifacts (SVCCA curves, sweep rows) go to $LECB_OUT_DIR/acceptance
// or ./acceptance_artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lecb/biasing.hpp"
#include "lecb/context_encoder.hpp"
#include "lecb/harness.hpp"
#include "lecb/numerics/grad_check.hpp"
#include "lecb/svcca.hpp"

using namespace lecb;
using num::Tensor;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Tensor random_tensor(std::size_t r, std::size_t c, num::Rng& rng) {
  Tensor t(r, c);
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

tok::TokenSeq seq(std::vector<tok::TokenId> ids) {
  tok::TokenSeq s;
  s.continuation.assign(ids.size(), false);
  s.ids = std::move(ids);
  return s;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

fs::path artifact_dir() {
  const char* env = std::getenv("LECB_OUT_DIR");
  fs::path dir = env != nullptr && *env != '\0' ? fs::path(env) / "acceptance"
                                                 : fs::path("acceptance_artifacts");
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------

Outcome na_sa_equivalence() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    num::Rng rng(seed);
    const std::size_t tau = 1 + rng.below(16);
    const std::size_t heads = std::size_t{1} << rng.below(3);
    const std::size_t d = heads * (1 + rng.below(32 / heads));
    const std::size_t k = 2 * tau - 1 + 2 * rng.below(3);
    num::Tape tape;
    auto q = tape.constant(random_tensor(tau, d, rng));
    auto kk = tape.constant(random_tensor(tau, d, rng));
    auto v = tape.constant(random_tensor(tau, d, rng));
    auto na = bias::neighbourhood_attention(q, kk, v, tape.constant(Tensor(heads, k)), heads, k);
    auto sa = num::attention(q, kk, v, heads,
                             num::AttentionMask::full(tau, std::vector<bool>(tau, true)));
    worst = std::max(worst, num::max_abs_diff(na.out.value(), sa.out.value()));
  }
  return {worst <= 1e-9, fmt("max-abs diff %.3g over 100 seeds", worst)};
}

Outcome locality() {
  const std::size_t tau = 9, d = 4, k = 3, heads = 1;
  num::Rng rng(41);
  const Tensor x = random_tensor(tau, d, rng);
  const Tensor rel = random_tensor(heads, k, rng);
  auto inside = [&](std::size_t i, std::size_t j) {
    const auto w = bias::neighbourhood_window(i, tau, k);
    return j >= w.start && j < w.start + w.size;
  };
  auto run = [&](const Tensor& in) {
    num::Tape tape;
    auto t = tape.constant(in);
    return bias::neighbourhood_attention(t, t, t, tape.constant(rel), heads, k).out.value();
  };

  std::size_t violations = 0;
  const Tensor base = run(x);
  for (std::size_t j = 0; j < tau; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      Tensor y = x;
      y(j, c) += 1e-6;
      const Tensor out = run(y);
      for (std::size_t i = 0; i < tau; ++i) {
        double diff = 0;
        for (std::size_t e = 0; e < d; ++e) diff = std::max(diff, std::abs(out(i, e) - base(i, e)));
        if (!inside(i, j) && diff != 0.0) ++violations;
      }
    }
  }
  // Every frame must respond to some coordinate of each in-window frame.
  for (std::size_t j = 0; j < tau; ++j) {
    Tensor y = x;
    for (std::size_t c = 0; c < d; ++c) y(j, c) += 1e-6;
    const Tensor out = run(y);
    for (std::size_t i = 0; i < tau; ++i) {
      double diff = 0;
      for (std::size_t e = 0; e < d; ++e) diff = std::max(diff, std::abs(out(i, e) - base(i, e)));
      if (inside(i, j) && diff == 0.0) ++violations;
    }
  }

  // Analytic Jacobian rows from reverse mode.
  std::size_t jac_violations = 0, jac_nonzero_inside = 0;
  num::ParameterStore store(1);
  auto& p = store.add("x", tau, d, num::Init::zeros);
  p.value = x;
  for (std::size_t i = 0; i < tau; ++i) {
    for (std::size_t e = 0; e < d; ++e) {
      store.zero_grad();
      num::Tape tape;
      auto t = tape.param(p);
      auto out = bias::neighbourhood_attention(t, t, t, tape.constant(rel), heads, k).out;
      Tensor sel(tau, d);
      sel(i, e) = 1.0;
      tape.backward(num::sum(num::mul(out, tape.constant(sel))));
      for (std::size_t j = 0; j < tau; ++j) {
        double g = 0;
        for (std::size_t c = 0; c < d; ++c) g = std::max(g, std::abs(p.grad(j, c)));
        if (!inside(i, j) && g != 0.0) ++jac_violations;
        if (inside(i, j) && g != 0.0) ++jac_nonzero_inside;
      }
    }
  }
  std::ostringstream o;
  o << "perturbation violations " << violations << ", Jacobian entries outside window "
    << jac_violations << ", inside non-zero " << jac_nonzero_inside;
  return {violations == 0 && jac_violations == 0 && jac_nonzero_inside > 0, o.str()};
}

Outcome gradient_check() {
  encoder::EncoderConfig e;
  e.layers = 1;
  e.d = 8;
  e.heads = 2;
  e.ff = 16;
  e.l = 2;
  num::Rng rng(3);
  const Tensor x = random_tensor(3, 6, rng);  // tau = 3, d_a = 6
  const Tensor cls = random_tensor(6, 5, rng);
  std::ostringstream o;
  bool ok = true;
  for (auto v : {bias::Variant::lecb_v1, bias::Variant::lecb_v2}) {
    bias::BiasConfig b;
    b.variant = v;
    b.d = 8;
    b.d_a = 6;
    b.heads = 2;
    b.window = 3;
    bias::ContextualBiasModel m(12, e, b, 4);
    num::Rng init(11);
    for (auto* p : m.parameters().all())
      for (auto& val : p->value.values()) val += 0.3 * init.normal();
    auto f = [&](num::Tape& t) {
      // N = 2 phrases of l = 2 tokens
      auto out = m.forward(t, t.constant(x), {seq({2, 3}), seq({4, 5})});
      return num::cross_entropy(num::matmul(out.H, t.constant(cls)), {1, 0, 4});
    };
    const auto r = num::grad_check_report(f, m.active_parameters());
    ok = ok && r.max_rel_error < 1e-4;
    o << bias::to_string(v) << " max rel err " << fmt("%.3g", r.max_rel_error) << "  ";
  }
  return {ok, o.str()};
}

Outcome left_shift_oracle() {
  num::Rng rng(2024);
  std::size_t mismatches = 0, cross = 0;
  for (int trial = 0; trial < 500; ++trial) {
    encoder::PhraseLayout layout;
    layout.l = 1 + rng.below(8);
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t p = 0; p < n; ++p) layout.lengths.push_back(1 + rng.below(layout.l));
    Tensor keys(n * layout.l, 3);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t t = 0; t < layout.lengths[p]; ++t)
        for (std::size_t c = 0; c < 3; ++c) keys(p * layout.l + t, c) = rng.normal();
    num::Tape tape;
    const Tensor v = encoder::left_shift(tape.constant(keys), layout).value();
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t t = 0; t < layout.l; ++t) {
        const std::size_t r = p * layout.l + t;
        for (std::size_t c = 0; c < 3; ++c) {
          const double want = t + 1 < layout.lengths[p] ? keys(r + 1, c) : 0.0;
          if (v(r, c) != want) ++mismatches;
        }
      }
    }
    const auto index = encoder::left_shift_index(layout);
    for (std::size_t r = 0; r < index.size(); ++r)
      if (index[r] >= 0 && static_cast<std::size_t>(index[r]) / layout.l != r / layout.l) ++cross;
  }
  std::ostringstream o;
  o << mismatches << " mismatches, " << cross << " cross-phrase links over 500 layouts";
  return {mismatches == 0 && cross == 0, o.str()};
}

Outcome sampling_invariants(const harness::Experiment& exp) {
  sampling::SamplerConfig sc;
  sc.B = 10;
  sc.n_max = exp.n_max;
  const sampling::Sampler s(exp.pool, exp.entity_map, *exp.detector, exp.task.vocab, sc);
  const auto& utts = exp.task.train.utterances;
  std::size_t bad_size = 0, bad_sub = 0, bad_ent = 0;
  auto substring = [](const std::vector<std::string>& words, const std::string& phrase) {
    const auto p = tok::split_words(phrase);
    if (p.empty() || p.size() > words.size()) return false;
    for (std::size_t i = 0; i + p.size() <= words.size(); ++i)
      if (std::equal(p.begin(), p.end(), words.begin() + static_cast<long>(i))) return true;
    return false;
  };
  for (auto m : {sampling::Method::sma, sampling::Method::smb, sampling::Method::smc,
                 sampling::Method::smd}) {
    for (std::size_t n = 0; n < 10000; ++n) {
      const auto& u = utts[n % utts.size()];
      const auto b = s.sample(m, u, sampling::utterance_seed(n, u.id));
      if (b.size() != sc.B) ++bad_size;
      if (m == sampling::Method::sma || m == sampling::Method::smb) {
        for (const auto& p : b.phrases)
          if (p.positive() && !substring(u.words, p.words)) ++bad_sub;
      }
      if (m == sampling::Method::smd) {
        const auto ents = pools::detect_entities(u.words, *exp.detector);
        std::multiset<std::string> want(ents.begin(), ents.end()), got;
        for (const auto& p : b.phrases)
          if (p.positive()) got.insert(p.words);
        if (ents.size() <= sc.B ? got != want : got.size() != sc.B) ++bad_ent;
      }
    }
  }
  std::size_t total = 0, kept = 0;
  for (std::size_t n = 0; n < 10000; ++n) {
    const auto& u = utts[n % utts.size()];
    const auto b = s.sample_sma(u, sampling::utterance_seed(n, u.id));
    const auto r = s.apply_retention(b, u, 0.7, sampling::utterance_seed(n, u.id, 1));
    if (r.size() != sc.B) ++bad_size;
    total += b.count_positive();
    kept += r.count_positive();
  }
  const double rate = static_cast<double>(kept) / static_cast<double>(total);
  std::ostringstream o;
  o << "size errors " << bad_size << ", non-substring positives " << bad_sub
    << ", SMd entity mismatches " << bad_ent << ", retention " << fmt("%.4f", rate) << " ("
    << kept << "/" << total << ")";
  return {bad_size == 0 && bad_sub == 0 && bad_ent == 0 && std::abs(rate - 0.7) <= 0.02, o.str()};
}

Outcome svcca_properties() {
  num::Rng rng(77);
  const Tensor a = random_tensor(500, 6, rng);
  const double self = svcca::cca(a, a).mean_rho;

  Tensor q = random_tensor(6, 6, rng);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < 6; ++c) dot += q(i, c) * q(j, c);
      for (std::size_t c = 0; c < 6; ++c) q(i, c) -= dot * q(j, c);
    }
    double nrm = 0;
    for (std::size_t c = 0; c < 6; ++c) nrm += q(i, c) * q(i, c);
    for (std::size_t c = 0; c < 6; ++c) q(i, c) /= std::sqrt(nrm);
  }
  Tensor b = random_tensor(500, 4, rng);
  for (std::size_t r = 0; r < 500; ++r) b(r, 0) += 0.7 * a(r, 2);
  const auto base = svcca::cca(a, b);
  const auto rot = svcca::cca(num::matmul_plain(a, q), b);
  double inv = 0;
  for (std::size_t i = 0; i < base.rho.size(); ++i)
    inv = std::max(inv, std::abs(base.rho[i] - rot.rho[i]));

  double null_mean = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    num::Rng r(1000 + seed);
    null_mean += svcca::cca(random_tensor(1000, 8, r), random_tensor(1000, 8, r)).mean_rho;
  }
  null_mean /= 50;
  std::ostringstream o;
  o << "self " << fmt("%.12f", self) << ", rotation diff " << fmt("%.3g", inv)
    << ", null mean " << fmt("%.4f", null_mean);
  return {std::abs(self - 1.0) <= 1e-8 && inv <= 1e-6 && null_mean < 0.2, o.str()};
}

std::size_t quadratic_dp(const std::vector<std::string>& r, const std::vector<std::string>& h) {
  std::vector<std::vector<std::size_t>> D(r.size() + 1, std::vector<std::size_t>(h.size() + 1));
  for (std::size_t i = 0; i <= r.size(); ++i) D[i][0] = i;
  for (std::size_t j = 0; j <= h.size(); ++j) D[0][j] = j;
  for (std::size_t i = 1; i <= r.size(); ++i)
    for (std::size_t j = 1; j <= h.size(); ++j)
      D[i][j] = std::min({D[i - 1][j] + 1, D[i][j - 1] + 1,
                          D[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0u : 1u)});
  return D[r.size()][h.size()];
}

Outcome wer_oracle() {
  num::Rng rng(12345);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> r, h;
    const std::size_t nr = 1 + rng.below(12), nh = rng.below(12);
    for (std::size_t k = 0; k < nr; ++k) r.push_back(std::string(1, static_cast<char>('a' + rng.below(5))));
    for (std::size_t k = 0; k < nh; ++k) h.push_back(std::string(1, static_cast<char>('a' + rng.below(5))));
    const double want = static_cast<double>(quadratic_dp(r, h)) / static_cast<double>(r.size());
    if (harness::wer(r, h) != want) ++mismatches;
  }
  auto w = [](const char* r, const char* h) {
    return harness::wer(tok::split_words(r), tok::split_words(h));
  };
  const bool trivial = w("a b c", "a b c") == 0.0 && w("a b c", "a x c") == 1.0 / 3.0 &&
                       w("a", "a b") == 1.0;
  std::ostringstream o;
  o << mismatches << " mismatches over 1000 pairs, trivial cases " << (trivial ? "ok" : "wrong");
  return {mismatches == 0 && trivial, o.str()};
}

Outcome residual_start(const harness::Experiment& exp, const harness::TrainConfig& base) {
  harness::EvalOptions opt;
  const auto none = harness::evaluate(exp, nullptr, opt);
  bool ok = true;
  std::ostringstream o;
  for (auto v : {bias::Variant::baseline_nam, bias::Variant::lecb_v1, bias::Variant::lecb_v2,
                 bias::Variant::cb_c}) {
    auto cfg = base;
    cfg.variant = v;
    const bias::ContextualBiasModel m(exp.task.vocab.size(), cfg.encoder,
                                      harness::bias_config(cfg, exp.backbone->d_a()), cfg.seed);
    const auto r = harness::evaluate(exp, &m, opt);
    for (const auto& [split, res] : none.splits) {
      if (r.wer(split) != res.wer) {
        ok = false;
        o << bias::to_string(v) << "/" << split << " " << r.wer(split) << " vs " << res.wer << "  ";
      }
    }
  }
  if (ok) o << "all variants reproduce none WER exactly on every split";
  return {ok, o.str()};
}

struct Trained {
  harness::TrainRun run;
  harness::EvalReport report;
  double seconds = 0.0;
};

Trained train_and_eval(const harness::Experiment& exp, const harness::TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Trained t;
  t.run = harness::train_cb(exp, cfg);
  harness::EvalOptions opt;
  opt.B = cfg.B;
  opt.eval_seed = cfg.eval_seed;
  opt.attribution = true;
  t.report = harness::evaluate(exp, t.run.model.get(), opt);
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "  trained %s/%s p=%.1f in %.0f s: rare WER %.4f\n",
               bias::to_string(cfg.variant).c_str(), sampling::to_string(cfg.sampler).c_str(),
               cfg.retention, t.seconds, t.report.wer("test_rare"));
  return t;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %-22s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report("na_sa_equivalence", na_sa_equivalence);
  report("locality", locality);
  report("gradient_check", gradient_check);
  report("left_shift_oracle", left_shift_oracle);

  const auto exp = harness::prepare_experiment(harness::TaskConfig{});
  const harness::TrainConfig base;

  report("sampling_invariants", [&] { return sampling_invariants(*exp); });
  report("svcca_properties", svcca_properties);
  report("wer_oracle", wer_oracle);
  report("residual_start", [&] { return residual_start(*exp, base); });

  const fs::path out = artifact_dir();
  harness::EvalOptions plain;
  const double none_rare = harness::evaluate(*exp, nullptr, plain).wer("test_rare");

  auto v2_cfg = base;
  v2_cfg.variant = bias::Variant::lecb_v2;
  v2_cfg.sampler = sampling::Method::smb;
  auto nam_cfg = v2_cfg;
  nam_cfg.variant = bias::Variant::baseline_nam;

  std::optional<Trained> v2, nam;
  report("biasing_efficacy", [&]() -> Outcome {
    v2 = train_and_eval(*exp, v2_cfg);
    nam = train_and_eval(*exp, nam_cfg);
    const double r_v2 = v2->report.wer("test_rare"), r_nam = nam->report.wer("test_rare");
    const auto& attr = *v2->report.attribution;
    std::ostringstream o;
    o << "rare WER none " << fmt("%.4f", none_rare) << ", baseline_nam " << fmt("%.4f", r_nam)
      << ", lecb_v2 " << fmt("%.4f", r_v2) << "; attribution >= 5 on " << attr.passing << "/"
      << attr.utterances << " (" << fmt("%.3f", attr.pass_rate()) << ") rare words "
      << exp->task.rare_words.size();
    const bool ok = r_v2 < none_rare && r_v2 <= r_nam && attr.pass_rate() >= 0.8 &&
                    exp->task.rare_words.size() >= 40;
    return {ok, o.str()};
  });

  report("convergence_dynamics", [&]() -> Outcome {
    if (!v2 || !nam) return {false, "training runs unavailable"};
    const auto c_v2 = svcca::epoch_correlation_curve(v2->run.dumps);
    const auto c_nam = svcca::epoch_correlation_curve(nam->run.dumps);
    const fs::path csv = out / "rho_curve.csv";
    svcca::write_curve_csv(c_v2, csv);
    svcca::write_curve_csv(c_nam, csv, true);
    auto series = [](const std::string& name, const std::vector<svcca::CurvePoint>& c) {
      svcca::Series s{name, {}, {}};
      for (const auto& p : c) {
        s.x.push_back(static_cast<double>(p.from.epoch));
        s.y.push_back(p.rho);
      }
      return s;
    };
    svcca::write_line_chart({series("lecb_v2/smb", c_v2), series("baseline_nam/smb", c_nam)},
                            "Epoch-to-epoch SVCCA of the bias embedding", "epoch",
                            "mean canonical correlation", out / "rho_curve.svg");
    const auto e_v2 = svcca::first_epoch_reaching(c_v2, 0.9);
    const auto e_nam = svcca::first_epoch_reaching(c_nam, 0.9);
    auto show = [](const std::optional<std::uint64_t>& e) {
      return e ? std::to_string(*e) : std::string("never");
    };
    // Reported alongside: first epoch after which the curve never drops below 0.9.
    auto settled = [](const std::vector<svcca::CurvePoint>& c) -> std::optional<std::uint64_t> {
      std::optional<std::uint64_t> e;
      for (const auto& p : c) {
        if (p.rho < 0.9) e.reset();
        else if (!e) e = p.from.epoch;
      }
      return e;
    };
    std::ostringstream o;
    o << "first epoch with rho >= 0.9: lecb_v2 " << show(e_v2) << ", baseline_nam " << show(e_nam)
      << " (stays above from: " << show(settled(c_v2)) << " vs " << show(settled(c_nam))
      << "); curves in " << csv.string();
    return {e_v2.has_value() && (!e_nam || *e_v2 <= *e_nam), o.str()};
  });

  report("retention_direction", [&]() -> Outcome {
    auto cfg = v2_cfg;
    cfg.dump_embeddings = false;
    cfg.eval_each_epoch = false;
    const auto rows = harness::retention_sweep(*exp, cfg, {0.7, 0.3});
    harness::write_sweep_csv(rows, out / "retention_sweep.csv");
    std::ostringstream o;
    o << "rare WER p=0.7 " << fmt("%.4f", rows[0].rare_wer) << ", p=0.3 "
      << fmt("%.4f", rows[1].rare_wer);
    return {rows[1].rare_wer > rows[0].rare_wer, o.str()};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
