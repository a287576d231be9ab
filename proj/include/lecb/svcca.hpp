#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lecb/numerics/tensor.hpp"

namespace lecb::svcca {

struct EmbeddingTag {
  std::string model;
  std::string sampler;
  std::uint64_t epoch = 0;

  std::string str() const;
};

/// Rows of a bias embedding collected over a fixed probe set.
struct EmbeddingDump {
  EmbeddingTag tag;
  num::Tensor matrix;  // samples x dim
  std::string probe_hash;
};

/// Binary layout (little-endian): magic "LECBDUMP", u32 version, model,
/// sampler (u32 length + bytes), u64 epoch, probe hash, u64 rows, u64 cols,
/// then rows*cols f64 in row-major order.
inline constexpr std::uint32_t kDumpVersion = 1;
void save_dump(const EmbeddingDump& dump, const std::filesystem::path& path);
EmbeddingDump load_dump(const std::filesystem::path& path);

/// Subtracts every column's mean.
num::Tensor center_columns(const num::Tensor& m);

struct PruneResult {
  num::Tensor data;                     // samples x retained
  std::size_t retained = 0;
  std::vector<double> singular_values;  // all of them, descending
};

/// Centres M, then projects it on the fewest leading right-singular directions
/// whose squared singular values reach `variance_keep` of the total.
/// Throws ConfigError for variance_keep outside (0, 1] and NumericError for a
/// matrix without variance.
PruneResult svd_prune(const num::Tensor& m, double variance_keep);

struct CcaResult {
  std::vector<double> rho;  // non-increasing, in [0, 1]
  double mean_rho = 0.0;
  std::size_t dims_a = 0;
  std::size_t dims_b = 0;
  double epsilon = 0.0;     // regularisation actually applied
};

/// How much ridge to add to the covariance diagonals.
struct Regularization {
  /// nullopt: none when both covariances are well conditioned, otherwise
  /// 1e-8 * trace / dim. 0: never (a singular covariance is an error).
  /// Positive: that multiple of trace / dim, always.
  std::optional<double> relative_epsilon;
};

/// Canonical correlations of the centred columns of A and B (same sample
/// count), obtained as the singular values of the whitened cross-covariance.
CcaResult cca(const num::Tensor& a, const num::Tensor& b, Regularization reg = {});

struct CurvePoint {
  EmbeddingTag from;
  EmbeddingTag to;
  double rho = 0.0;
  std::size_t dims_from = 0;
  std::size_t dims_to = 0;
};

/// Mean canonical correlation between each pair of consecutive dumps after
/// pruning both sides. Throws ConfigError for fewer than two dumps or a
/// probe-set mismatch.
std::vector<CurvePoint> epoch_correlation_curve(const std::vector<EmbeddingDump>& dumps,
                                                double variance_keep = 0.99);

/// First epoch index at which the curve reaches `threshold` (nullopt if never).
std::optional<std::uint64_t> first_epoch_reaching(const std::vector<CurvePoint>& curve,
                                                  double threshold);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path,
                     bool append = false);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal self-contained SVG line chart.
std::string render_line_chart(const std::vector<Series>& series, const std::string& title,
                              const std::string& x_label, const std::string& y_label);
void write_line_chart(const std::vector<Series>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::filesystem::path& path);

}  // namespace lecb::svcca
