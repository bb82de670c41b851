#pragma once

#include "unires/image.hpp"

#include <filesystem>
#include <stdexcept>

namespace unires {

struct ImageIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class BitDepth { k8 = 8, k16 = 16 };

/// Reads binary PGM (P5) or PPM (P6) with maxval up to 65535.
Image load_image(const std::filesystem::path& path);

/// Writes P5 for one channel, P6 for three. Samples are clamped to [0,1]
/// and rounded to the nearest code.
void save_image(const Image& img, const std::filesystem::path& path, BitDepth depth = BitDepth::k16);

}  // namespace unires
