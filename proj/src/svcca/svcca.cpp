#include "lecb/svcca.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lecb/error.hpp"
#include "lecb/io/binary.hpp"

namespace lecb::svcca {

using num::Tensor;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

constexpr char kMagic[8] = {'L', 'E', 'C', 'B', 'D', 'U', 'M', 'P'};

Mat to_eigen(const Tensor& t) {
  return Eigen::Map<const RowMat>(t.data(), static_cast<Eigen::Index>(t.rows()),
                                  static_cast<Eigen::Index>(t.cols()));
}

Tensor from_eigen(const Mat& m) {
  Tensor t(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  Eigen::Map<RowMat>(t.data(), m.rows(), m.cols()) = m;
  return t;
}

Mat centred(const Tensor& t) {
  Mat m = to_eigen(t);
  m.rowwise() -= m.colwise().mean();
  return m;
}

struct Whitener {
  Mat inv_sqrt;
  double epsilon = 0.0;
};

Whitener whitener(const Mat& cov, const Regularization& reg, const char* side) {
  const auto dim = static_cast<double>(cov.rows());
  const double trace = cov.trace();
  if (!(trace > 0.0)) {
    throw NumericError(std::string("cca: ") + side + " has no variance");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.info() != Eigen::Success) throw NumericError("cca: eigen decomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const bool singular = ev.minCoeff() <= 1e-10 * ev.maxCoeff();

  double eps = 0.0;
  if (!reg.relative_epsilon.has_value()) {
    if (singular) eps = 1e-8 * trace / dim;
  } else if (*reg.relative_epsilon == 0.0) {
    if (singular) {
      throw NumericError(std::string("cca: covariance of ") + side +
                         " is singular; supply a regularisation epsilon (e.g. 1e-8 * trace/dim)");
    }
  } else {
    if (*reg.relative_epsilon < 0.0) throw ConfigError("cca: epsilon must be >= 0");
    eps = *reg.relative_epsilon * trace / dim;
  }
  Eigen::VectorXd d = ev;
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = 1.0 / std::sqrt(std::max(d[i], 0.0) + eps);
  Whitener w;
  w.inv_sqrt = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  w.epsilon = eps;
  return w;
}

}  // namespace

std::string EmbeddingTag::str() const {
  return model + "/" + sampler + "/epoch" + std::to_string(epoch);
}

void save_dump(const EmbeddingDump& dump, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write dump " + path.string());
  os.write(kMagic, sizeof(kMagic));
  io::write_le<std::uint32_t>(os, kDumpVersion);
  io::write_string(os, dump.tag.model);
  io::write_string(os, dump.tag.sampler);
  io::write_le<std::uint64_t>(os, dump.tag.epoch);
  io::write_string(os, dump.probe_hash);
  io::write_le<std::uint64_t>(os, dump.matrix.rows());
  io::write_le<std::uint64_t>(os, dump.matrix.cols());
  for (double v : dump.matrix.values()) io::write_le<double>(os, v);
  if (!os) throw Error("failed writing dump " + path.string());
}

EmbeddingDump load_dump(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open dump " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || !std::equal(magic, magic + 8, kMagic)) {
    throw FormatError(path.string() + ": not an embedding dump");
  }
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kDumpVersion) {
    throw FormatError(path.string() + ": unsupported dump version " + std::to_string(version));
  }
  EmbeddingDump d;
  d.tag.model = io::read_string(is);
  d.tag.sampler = io::read_string(is);
  d.tag.epoch = io::read_le<std::uint64_t>(is);
  d.probe_hash = io::read_string(is);
  const auto rows = io::read_le<std::uint64_t>(is);
  const auto cols = io::read_le<std::uint64_t>(is);
  if (rows * cols > (1ull << 32)) throw FormatError(path.string() + ": implausible shape");
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = io::read_le<double>(is);
  d.matrix = Tensor(rows, cols, std::move(v));
  return d;
}

Tensor center_columns(const Tensor& m) { return from_eigen(centred(m)); }

PruneResult svd_prune(const Tensor& m, double variance_keep) {
  if (!(variance_keep > 0.0 && variance_keep <= 1.0)) {
    throw ConfigError("svd_prune: variance_keep must lie in (0, 1]");
  }
  if (m.rows() == 0 || m.cols() == 0) throw DimensionError("svd_prune: empty matrix");
  const Mat x = centred(m);
  Eigen::BDCSVD<Mat> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double total = s.squaredNorm();
  if (!(total > 0.0)) throw NumericError("svd_prune: matrix has zero variance");

  PruneResult r;
  r.singular_values.assign(s.data(), s.data() + s.size());
  const double target = variance_keep * total - 1e-12 * total;
  double acc = 0.0;
  std::size_t keep = 0;
  while (keep < static_cast<std::size_t>(s.size())) {
    acc += s[static_cast<Eigen::Index>(keep)] * s[static_cast<Eigen::Index>(keep)];
    ++keep;
    if (acc >= target) break;
  }
  r.retained = keep;
  const auto k = static_cast<Eigen::Index>(keep);
  r.data = from_eigen(x * svd.matrixV().leftCols(k));
  return r;
}

CcaResult cca(const Tensor& a, const Tensor& b, Regularization reg) {
  if (a.rows() != b.rows()) {
    throw DimensionError("cca: sample counts differ (" + a.shape_string() + " vs " +
                         b.shape_string() + ")");
  }
  if (a.rows() < 2 || a.cols() == 0 || b.cols() == 0) {
    throw DimensionError("cca: need at least 2 samples and 1 column on each side");
  }
  const Mat x = centred(a);
  const Mat y = centred(b);
  const double n1 = static_cast<double>(a.rows() - 1);
  const Mat caa = (x.transpose() * x) / n1;
  const Mat cbb = (y.transpose() * y) / n1;
  const Mat cab = (x.transpose() * y) / n1;
  const Whitener wa = whitener(caa, reg, "A");
  const Whitener wb = whitener(cbb, reg, "B");
  const Mat t = wa.inv_sqrt * cab * wb.inv_sqrt;
  Eigen::JacobiSVD<Mat> svd(t);
  const Eigen::VectorXd& s = svd.singularValues();

  CcaResult r;
  r.dims_a = a.cols();
  r.dims_b = b.cols();
  r.epsilon = std::max(wa.epsilon, wb.epsilon);
  const std::size_t n = std::min(a.cols(), b.cols());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::clamp(s[static_cast<Eigen::Index>(i)], 0.0, 1.0);
    r.rho.push_back(v);
    sum += v;
  }
  r.mean_rho = sum / static_cast<double>(n);
  return r;
}

std::vector<CurvePoint> epoch_correlation_curve(const std::vector<EmbeddingDump>& dumps,
                                                double variance_keep) {
  if (dumps.size() < 2) throw ConfigError("svcca: need at least two dumps for a curve");
  std::vector<CurvePoint> curve;
  for (std::size_t i = 0; i + 1 < dumps.size(); ++i) {
    const EmbeddingDump& p = dumps[i];
    const EmbeddingDump& q = dumps[i + 1];
    if (p.probe_hash != q.probe_hash || p.matrix.rows() != q.matrix.rows()) {
      throw ConfigError("svcca: probe-set mismatch between " + p.tag.str() + " (" + p.probe_hash +
                        ", " + std::to_string(p.matrix.rows()) + " rows) and " + q.tag.str() +
                        " (" + q.probe_hash + ", " + std::to_string(q.matrix.rows()) + " rows)");
    }
    const PruneResult pa = svd_prune(p.matrix, variance_keep);
    const PruneResult pb = svd_prune(q.matrix, variance_keep);
    const CcaResult c = cca(pa.data, pb.data);
    curve.push_back({p.tag, q.tag, c.mean_rho, pa.retained, pb.retained});
  }
  return curve;
}

std::optional<std::uint64_t> first_epoch_reaching(const std::vector<CurvePoint>& curve,
                                                  double threshold) {
  for (const auto& pt : curve) {
    if (pt.rho >= threshold) return pt.from.epoch;
  }
  return std::nullopt;
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path,
                     bool append) {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  if (!append) os << "model,sampler,epoch,rho,dims_from,dims_to\n";
  os << std::setprecision(10);
  for (const auto& pt : curve) {
    os << pt.from.model << ',' << pt.from.sampler << ',' << pt.from.epoch << ',' << pt.rho << ','
       << pt.dims_from << ',' << pt.dims_to << '\n';
  }
}

namespace {

std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace

std::string render_line_chart(const std::vector<Series>& series, const std::string& title,
                              const std::string& x_label, const std::string& y_label) {
  const double W = 640, H = 400, L = 60, R = 160, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw DimensionError("line chart: x/y length mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << escape(title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0;
    const double xv = x0 + (x1 - x0) * i / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
      << std::setprecision(3) << yv << std::setprecision(2) << "</text>\n";
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
      << std::setprecision(1) << xv << std::setprecision(2) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << escape(x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colours[k % 8];
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    o << "\"/>\n";
    const double ly = T + 16 * static_cast<double>(k);
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\""
      << ly << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << escape(s.name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_line_chart(const std::vector<Series>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << render_line_chart(series, title, x_label, y_label);
}

}  // namespace lecb::svcca
