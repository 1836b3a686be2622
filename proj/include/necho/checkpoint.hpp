#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "necho/nn.hpp"

namespace necho {

/// Checkpoint layout (a directory):
///   manifest.json  {"format": "necho-checkpoint", "version": 1, "dtype": "float64",
///                   "byte_order": "little", "data_file": "params.bin",
///                   "tensors": [{"name", "shape": [rows, cols], "offset", "nbytes"}]}
///   params.bin     concatenated little-endian float64 buffers, row-major,
///                  in manifest order; offsets are byte offsets into this file.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kDataFile = "params.bin";

using NamedMatrices = std::vector<std::pair<std::string, Matrix>>;

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& dir);
NamedMatrices read_checkpoint(const std::filesystem::path& dir);

/// Copies checkpoint values into `params`. Missing, extra or mis-shaped
/// tensors are all reported in one error.
void load_checkpoint(ParameterSet& params, const std::filesystem::path& dir);

}  // namespace necho
