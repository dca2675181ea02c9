#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "deepar/network.hpp"

namespace deepar {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Binary little-endian container; layout documented in docs/model_format.md.
void write_model(std::ostream& out, const ModelParams& params);
ModelParams read_model(std::istream& in);

// save_model writes to a temporary file and renames it into place.
void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace deepar
