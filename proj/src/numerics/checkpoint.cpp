#include "lecb/numerics/checkpoint.hpp"

#include <fstream>
#include <set>

#include "lecb/error.hpp"
#include "lecb/io/binary.hpp"

namespace lecb::num {

namespace {
constexpr char kMagic[8] = {'L', 'E', 'C', 'B', 'C', 'K', 'P', 'T'};
}

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_le<std::uint64_t>(os, store.size());
  for (const Parameter* p : store.all()) {
    io::write_string(os, p->name);
    io::write_le<std::uint64_t>(os, p->value.rows());
    io::write_le<std::uint64_t>(os, p->value.cols());
    for (double v : p->value.values()) io::write_le<double>(os, v);
  }
  if (!os) throw Error("failed writing checkpoint: " + path.string());
}

void load_checkpoint(ParameterStore& store, const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw FormatError(path.string() + ": not a checkpoint file");
  }
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  const auto count = io::read_le<std::uint64_t>(is);
  if (count != store.size()) {
    throw FormatError(path.string() + ": holds " + std::to_string(count) +
                      " parameters, model expects " + std::to_string(store.size()));
  }
  std::set<std::string> seen;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = io::read_string(is);
    if (!seen.insert(name).second) throw FormatError("duplicate parameter '" + name + "'");
    Parameter& p = store.at(name);
    const auto rows = io::read_le<std::uint64_t>(is);
    const auto cols = io::read_le<std::uint64_t>(is);
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw FormatError("parameter '" + name + "' has shape [" + std::to_string(rows) + "," +
                        std::to_string(cols) + "], model expects " + p.value.shape_string());
    }
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = io::read_le<double>(is);
    p.value = Tensor(rows, cols, std::move(values));
  }
}

}  // namespace lecb::num
