#pragma once

#include <filesystem>

#include "lecb/numerics/parameter.hpp"

namespace lecb::num {

/// Binary checkpoint layout (all integers and doubles little-endian):
///   magic "LECBCKPT", u32 version, u64 count,
///   count x { u32 name_len, name bytes, u64 rows, u64 cols, rows*cols f64 }
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);

/// Loads values into an already-constructed store. Every stored name must
/// exist in the store with the same shape; missing or extra names are errors.
void load_checkpoint(ParameterStore& store, const std::filesystem::path& path);

}  // namespace lecb::num
