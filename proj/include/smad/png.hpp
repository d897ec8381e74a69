#pragma once

#include <filesystem>

#include "smad/image.hpp"

namespace smad {

/// Reads 8-bit gray, gray+alpha, RGB or RGBA PNGs. Alpha is dropped, gray stays 1 channel.
ImageU8 read_png(const std::filesystem::path& path);

/// Writes a 1- or 3-channel 8-bit image. Output bytes depend only on the pixels.
void write_png(const std::filesystem::path& path, const ImageU8& image);

}  // namespace smad
