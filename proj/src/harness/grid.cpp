#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lecb/error.hpp"
#include "lecb/harness.hpp"

namespace lecb::harness {

namespace {

const std::vector<std::string> kReportSplits{"dev", "test_clean", "test_rare", "test_ood"};

std::string fmt(double v, int precision = 6) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << v;
  return o.str();
}

}  // namespace

std::vector<std::pair<bias::Variant, double>> matrix_variants() {
  return {{bias::Variant::baseline_nam, 1.0},
          {bias::Variant::lecb_v1, 1.0},
          {bias::Variant::lecb_v2, 1.0},
          {bias::Variant::lecb_v1, 0.5},
          {bias::Variant::cb_c, 1.0}};
}

std::string variant_label(bias::Variant v, double lambda) {
  if (v == bias::Variant::none || v == bias::Variant::baseline_nam) return bias::to_string(v);
  return bias::to_string(v) + "@" + fmt(lambda, 1);
}

double relative_wer_reduction(double base, double wer) {
  if (base == 0.0) return 0.0;
  return (base - wer) / base;
}

MatrixResult run_matrix(const Experiment& exp, const TrainConfig& base,
                        const std::function<void(const MatrixRow&)>& on_row) {
  MatrixResult result;
  EvalOptions opt;
  opt.B = base.B;
  opt.eval_seed = base.eval_seed;
  opt.splits = kReportSplits;

  MatrixRow none;
  none.variant = "none";
  none.sampler = "-";
  none.lambda = 0.0;
  none.report = evaluate(exp, nullptr, opt);
  result.rows.push_back(none);
  if (on_row) on_row(none);

  std::map<std::string, EvalReport> baseline;  // sampler -> baseline_nam report
  for (auto method : {sampling::Method::sma, sampling::Method::smb, sampling::Method::smc}) {
    for (auto [variant, lambda] : matrix_variants()) {
      TrainConfig cfg = base;
      cfg.variant = variant;
      cfg.lambda = lambda;
      cfg.sampler = method;
      cfg.dump_embeddings = false;
      cfg.eval_each_epoch = false;
      auto run = train_cb(exp, cfg);
      MatrixRow row;
      row.variant = variant_label(variant, lambda);
      row.sampler = sampling::to_string(method);
      row.lambda = lambda;
      row.report = evaluate(exp, run.model.get(), opt);
      if (variant == bias::Variant::baseline_nam) baseline[row.sampler] = row.report;
      result.rows.push_back(row);
      if (on_row) on_row(row);
    }
  }

  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
  for (const auto& row : result.rows) {
    if (row.variant == "none" || row.variant == "baseline_nam") continue;
    const EvalReport& b = baseline.at(row.sampler);
    for (const auto& s : kReportSplits) {
      auto& a = acc[row.variant][s];
      a.first += relative_wer_reduction(b.wer(s), row.report.wer(s));
      ++a.second;
    }
  }
  for (const auto& [variant, per_split] : acc)
    for (const auto& [split, a] : per_split)
      result.rwerr[variant][split] = a.first / static_cast<double>(a.second);
  return result;
}

void write_matrix_csv(const MatrixResult& result, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "variant,sampler,lambda,split,wer\n";
  for (const auto& row : result.rows) {
    for (const auto& s : kReportSplits) {
      os << row.variant << ',' << row.sampler << ',' << fmt(row.lambda, 1) << ',' << s << ','
         << fmt(row.report.wer(s)) << '\n';
    }
  }
}

void write_rwerr_csv(const MatrixResult& result, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "variant";
  for (const auto& s : kReportSplits) os << ",rwerr_" << s;
  os << '\n';
  for (const auto& [variant, per_split] : result.rwerr) {
    os << variant;
    for (const auto& s : kReportSplits) os << ',' << fmt(per_split.at(s));
    os << '\n';
  }
}

std::vector<SweepRow> retention_sweep(const Experiment& exp, const TrainConfig& base,
                                      const std::vector<double>& probs,
                                      const std::function<void(const SweepRow&)>& on_row) {
  if (probs.empty()) throw ConfigError("retention_sweep: no probabilities given");
  std::vector<SweepRow> rows;
  EvalOptions opt;
  opt.B = base.B;
  opt.eval_seed = base.eval_seed;
  opt.splits = kReportSplits;
  for (double p : probs) {
    TrainConfig cfg = base;
    cfg.variant = bias::Variant::lecb_v2;
    cfg.sampler = sampling::Method::smb;
    cfg.retention = p;
    cfg.dump_embeddings = false;
    cfg.eval_each_epoch = false;
    auto run = train_cb(exp, cfg);
    SweepRow row;
    row.retention = p;
    row.report = evaluate(exp, run.model.get(), opt);
    row.rare_wer = row.report.wer("test_rare");
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "retention";
  for (const auto& s : kReportSplits) os << ",wer_" << s;
  os << '\n';
  for (const auto& row : rows) {
    os << fmt(row.retention, 2);
    for (const auto& s : kReportSplits) os << ',' << fmt(row.report.wer(s));
    os << '\n';
  }
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return pools::hex64(pools::fnv1a(ss.str()));
}

void write_manifest(const std::filesystem::path& result, const std::string& subcommand,
                    const nlohmann::json& config, const nlohmann::json& seeds,
                    const std::map<std::string, std::string>& input_hashes) {
  nlohmann::json m;
  m["subcommand"] = subcommand;
  m["tool_version"] = kToolVersion;
  m["config"] = config;
  m["seeds"] = seeds;
  m["inputs"] = input_hashes;
  m["result"] = result.filename().string();
  if (std::filesystem::exists(result) && std::filesystem::is_regular_file(result)) {
    m["result_hash"] = file_hash(result);
  }
  std::filesystem::path path = result;
  path += ".manifest.json";
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << m.dump(2) << '\n';
}

}  // namespace lecb::harness
