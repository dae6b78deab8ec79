#pragma once

#include <filesystem>

#include "wsvt/frame.hpp"

namespace wsvt {

/// Reads binary (P5) or ASCII (P2) PGM. Samples are rescaled from [0, maxval]
/// to [0, 255]; 16-bit P5 is accepted.
Frame read_pgm(const std::filesystem::path& path);

/// Writes 8-bit binary PGM, rounding pixels to the nearest integer. Atomic.
void write_pgm(const std::filesystem::path& path, const Frame& frame);

/// 8-bit PNG; color images are converted to gray. Throws Io when the library
/// was built without PNG support.
Frame read_png(const std::filesystem::path& path);

bool png_supported() noexcept;

/// Dispatches on the extension (.pgm / .pnm / .png, case-insensitive).
Frame read_image(const std::filesystem::path& path);
bool is_image_file(const std::filesystem::path& path);

}  // namespace wsvt
